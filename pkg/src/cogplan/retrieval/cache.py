"""LRU result cache for search backends, optionally persisted to disk."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
from collections import OrderedDict
from pathlib import Path
from typing import Callable

from cogplan.core import ImageRef
from cogplan.retrieval.backends import RawHit, SearchBackend
from cogplan.text import normalize_query

log = logging.getLogger(__name__)

CacheKey = tuple[str, str, str, int]


def cache_key(mode: str, query: str, image: ImageRef | None, count: int) -> CacheKey:
    return (mode, normalize_query(query), image.locator if image else "", int(count))


def key_digest(key: CacheKey) -> str:
    return hashlib.sha256(json.dumps(list(key), ensure_ascii=False).encode("utf-8")).hexdigest()


class CachedBackend:
    """Wraps a :class:`SearchBackend`; hits never reach the inner backend.

    Entries are evicted least-recently-used beyond ``capacity``.  With
    ``cache_dir`` set, every entry is also written to a content-addressed JSON
    file and evicted entries are deleted from disk.  Disk errors degrade to
    in-memory behaviour.  Concurrent misses on the same key make one inner call.
    """

    def __init__(self, inner: SearchBackend, capacity: int = 1024, cache_dir: str | os.PathLike | None = None):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.inner = inner
        self.capacity = capacity
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self._entries: OrderedDict[CacheKey, tuple[RawHit, ...]] = OrderedDict()
        self._lock = threading.Lock()
        self._key_locks: dict[CacheKey, threading.Lock] = {}
        self.hits = 0
        self.misses = 0
        if self.cache_dir is not None:
            try:
                self.cache_dir.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                log.warning("cache dir unusable, memory only: %s", exc)
                self.cache_dir = None

    def __len__(self) -> int:
        return len(self._entries)

    def _path(self, key: CacheKey) -> Path:
        assert self.cache_dir is not None
        return self.cache_dir / f"{key_digest(key)}.json"

    def _disk_get(self, key: CacheKey) -> tuple[RawHit, ...] | None:
        if self.cache_dir is None:
            return None
        path = self._path(key)
        try:
            if not path.is_file():
                return None
            data = json.loads(path.read_text(encoding="utf-8"))
            if tuple(data["key"]) != key:
                return None
            return tuple(RawHit.from_dict(h) for h in data["hits"])
        except (OSError, ValueError, KeyError, TypeError) as exc:
            log.warning("cache read failed for %s: %s", path.name, exc)
            return None

    def _disk_put(self, key: CacheKey, hits: tuple[RawHit, ...]) -> None:
        if self.cache_dir is None:
            return
        path = self._path(key)
        tmp = path.with_suffix(f".{threading.get_ident()}.tmp")
        try:
            tmp.write_text(
                json.dumps({"key": list(key), "hits": [h.to_dict() for h in hits]}, ensure_ascii=False),
                encoding="utf-8",
            )
            tmp.replace(path)
        except OSError as exc:
            log.warning("cache write failed for %s: %s", path.name, exc)

    def _disk_drop(self, key: CacheKey) -> None:
        if self.cache_dir is None:
            return
        try:
            self._path(key).unlink(missing_ok=True)
        except OSError as exc:
            log.warning("cache eviction failed: %s", exc)

    def _remember(self, key: CacheKey, hits: tuple[RawHit, ...]) -> None:
        evicted = []
        with self._lock:
            self._entries[key] = hits
            self._entries.move_to_end(key)
            while len(self._entries) > self.capacity:
                old, _ = self._entries.popitem(last=False)
                evicted.append(old)
        for old in evicted:
            self._disk_drop(old)

    def _lookup(self, key: CacheKey) -> tuple[RawHit, ...] | None:
        with self._lock:
            if key in self._entries:
                self._entries.move_to_end(key)
                self.hits += 1
                return self._entries[key]
        return None

    def _get(self, key: CacheKey, fetch: Callable[[], list[RawHit]]) -> list[RawHit]:
        found = self._lookup(key)
        if found is not None:
            return list(found)
        with self._lock:
            key_lock = self._key_locks.setdefault(key, threading.Lock())
        with key_lock:
            found = self._lookup(key)
            if found is None:
                found = self._disk_get(key)
                if found is not None:
                    with self._lock:
                        self.hits += 1
                    self._remember(key, found)
            if found is None:
                with self._lock:
                    self.misses += 1
                found = tuple(fetch())
                self._remember(key, found)
                self._disk_put(key, found)
        with self._lock:
            self._key_locks.pop(key, None)
        return list(found)

    def text_search(self, query: str, k: int) -> list[RawHit]:
        return self._get(cache_key("text", query, None, k), lambda: self.inner.text_search(query, k))

    def image_search(self, image: ImageRef, query: str, max_results: int) -> list[RawHit]:
        return self._get(
            cache_key("image", query, image, max_results),
            lambda: self.inner.image_search(image, query, max_results),
        )


def cached(backend: SearchBackend, capacity: int = 1024, cache_dir: str | os.PathLike | None = None) -> CachedBackend:
    return CachedBackend(backend, capacity=capacity, cache_dir=cache_dir)

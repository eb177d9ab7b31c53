"""Search backends: the local-corpus simulator and a generic remote HTTP client."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Protocol, runtime_checkable

import httpx

from cogplan.core import ImageRef
from cogplan.errors import RetrievalError, ValidationError
from cogplan.text import word_tokens

log = logging.getLogger(__name__)

STOPWORDS = frozenset(
    """a an and are as at be by can did do does for from had has have how in is it its of on or
    that the this these those to was were what when where which who whom whose why will with
    image picture photo shown show shows""".split()
)


@dataclass(frozen=True)
class RawHit:
    source_id: str
    title: str = ""
    body: str = ""
    image: ImageRef | None = None
    caption: str | None = None
    score: float = 0.0

    def __post_init__(self) -> None:
        if not self.source_id:
            raise ValidationError("source_id", "empty source id")
        if self.image is not None and not (self.caption or "").strip():
            raise ValidationError("caption", f"image hit {self.source_id!r} has no caption")

    def to_dict(self) -> dict[str, Any]:
        return {
            "source_id": self.source_id,
            "title": self.title,
            "body": self.body,
            "image": self.image.locator if self.image else None,
            "caption": self.caption,
            "score": self.score,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RawHit:
        image = d.get("image")
        return cls(
            source_id=str(d["source_id"]),
            title=d.get("title") or "",
            body=d.get("body") or "",
            image=ImageRef.from_locator(image) if image else None,
            caption=d.get("caption"),
            score=float(d.get("score") or 0.0),
        )


@runtime_checkable
class SearchBackend(Protocol):
    def text_search(self, query: str, k: int) -> list[RawHit]: ...

    def image_search(self, image: ImageRef, query: str, max_results: int) -> list[RawHit]: ...


@dataclass(frozen=True)
class CorpusDoc:
    doc_id: str
    title: str
    body: str
    tags: tuple[str, ...] = ()


@dataclass(frozen=True)
class CorpusImage:
    img_id: str
    image: ImageRef
    caption: str
    tags: tuple[str, ...] = ()


class LocalCorpus:
    """A directory holding ``corpus.json`` plus the files it names.

    Manifest::

        {"docs":   [{"id", "title", "file", "tags": [...]}],
         "images": [{"id", "file", "caption", "tags": [...]}]}
    """

    def __init__(self, docs: list[CorpusDoc], images: list[CorpusImage] | None = None, root: Path | None = None):
        images = images or []
        ids = [d.doc_id for d in docs] + [i.img_id for i in images]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise ValidationError("corpus.id", f"duplicate ids {dupes}")
        self.docs = {d.doc_id: d for d in docs}
        self.images = {i.img_id: i for i in images}
        self.root = root

    @classmethod
    def load(cls, root: str | os.PathLike) -> LocalCorpus:
        root = Path(root)
        manifest = root / "corpus.json"
        try:
            data = json.loads(manifest.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ValidationError("corpus.json", f"cannot read manifest: {exc}") from exc
        docs = []
        for i, entry in enumerate(data.get("docs", [])):
            try:
                if "body" in entry:
                    body = entry["body"]
                else:
                    body = (root / entry["file"]).read_text(encoding="utf-8")
                docs.append(CorpusDoc(entry["id"], entry.get("title", ""), body, tuple(entry.get("tags", ()))))
            except (KeyError, OSError) as exc:
                raise ValidationError(f"docs[{i}]", str(exc)) from exc
        images = []
        for i, entry in enumerate(data.get("images", [])):
            try:
                path = root / entry["file"]
                if not path.is_file():
                    raise ValidationError(f"images[{i}].file", f"missing {path}")
                if not entry.get("caption", "").strip():
                    raise ValidationError(f"images[{i}].caption", "empty caption")
                images.append(
                    CorpusImage(entry["id"], ImageRef(str(path)), entry["caption"], tuple(entry.get("tags", ())))
                )
            except KeyError as exc:
                raise ValidationError(f"images[{i}]", f"missing key {exc}") from exc
        return cls(docs, images, root)


def _content_tokens(text: str) -> set[str]:
    return {t for t in word_tokens(text) if t not in STOPWORDS}


def _tag_tokens(tags: tuple[str, ...]) -> set[str]:
    return {t for tag in tags for t in word_tokens(tag)}


def score_doc(query_tokens: set[str], doc: CorpusDoc) -> int:
    """Title match counts 2, body/tag match counts 1, per distinct query token."""
    title = set(word_tokens(doc.title))
    rest = set(word_tokens(doc.body)) | _tag_tokens(doc.tags)
    return sum(2 if tok in title else 1 if tok in rest else 0 for tok in query_tokens)


def simulator_rank(corpus: LocalCorpus, query: str) -> list[str]:
    """Doc ids with a positive score, best first; ties go to the smaller id."""
    q = _content_tokens(query)
    scored = [(score_doc(q, doc), doc_id) for doc_id, doc in corpus.docs.items()]
    return [doc_id for s, doc_id in sorted(scored, key=lambda p: (-p[0], p[1])) if s > 0]


def image_query_tokens(image: ImageRef, query: str) -> set[str]:
    """Entity cues for image search: the query text plus the image file's name."""
    stem = Path(image.locator).stem if image.media_kind.value != "inline-bytes" else ""
    return _content_tokens(query) | _content_tokens(stem.replace("_", " ").replace("-", " "))


def score_image(tokens: set[str], img: CorpusImage) -> int:
    tags = _tag_tokens(img.tags)
    caption = set(word_tokens(img.caption))
    return sum(2 if tok in tags else 1 if tok in caption else 0 for tok in tokens)


class SimulatorBackend:
    """Deterministic stand-in for web text and image search over a :class:`LocalCorpus`."""

    def __init__(self, corpus: LocalCorpus):
        self.corpus = corpus

    def text_search(self, query: str, k: int) -> list[RawHit]:
        q = _content_tokens(query)
        hits = []
        for doc_id in simulator_rank(self.corpus, query)[:k]:
            doc = self.corpus.docs[doc_id]
            hits.append(RawHit(doc_id, doc.title, doc.body, score=float(score_doc(q, doc))))
        return hits

    def image_search(self, image: ImageRef, query: str, max_results: int) -> list[RawHit]:
        tokens = image_query_tokens(image, query)
        scored = [(score_image(tokens, img), img_id) for img_id, img in self.corpus.images.items()]
        ranked = [(s, i) for s, i in sorted(scored, key=lambda p: (-p[0], p[1])) if s > 0]
        hits = []
        for score, img_id in ranked[:max_results]:
            img = self.corpus.images[img_id]
            hits.append(RawHit(img_id, img.caption, "", image=img.image, caption=img.caption, score=float(score)))
        return hits


class RemoteSearchBackend:
    """JSON-over-HTTP search client.

    Sends ``POST {url}`` with ``{"mode", "query", "count", "image"}`` and
    expects ``{"results": [{"id"|"url", "title", "body"|"snippet", "image",
    "caption", "score"}]}``.
    """

    def __init__(
        self,
        url: str,
        api_key: str | None = None,
        *,
        timeout: float = 30.0,
        max_retries: int = 2,
        backoff_s: float = 0.5,
        client: httpx.Client | None = None,
    ):
        if not url:
            raise ValidationError("search_url", "search endpoint not configured")
        self.url = url
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self._headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=timeout)

    @classmethod
    def from_env(cls, **kwargs: Any) -> RemoteSearchBackend:
        return cls(os.getenv("COGPLAN_SEARCH_URL", ""), os.getenv("COGPLAN_SEARCH_KEY") or None, **kwargs)

    def _post(self, payload: dict[str, Any]) -> list[dict[str, Any]]:
        last_err: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                resp = self._client.post(self.url, json=payload, headers=self._headers)
                resp.raise_for_status()
                results = resp.json().get("results", [])
                if not isinstance(results, list):
                    raise ValueError("'results' is not a list")
                return results
            except (httpx.HTTPError, ValueError, AttributeError) as exc:
                last_err = exc
                log.warning("search attempt %d/%d failed: %r", attempt + 1, self.max_retries, exc)
                if attempt + 1 < self.max_retries:
                    time.sleep(self.backoff_s * (attempt + 1))
        raise RetrievalError(f"search backend failed: {last_err}")

    @staticmethod
    def _to_hit(r: dict[str, Any]) -> RawHit:
        image = r.get("image")
        return RawHit(
            source_id=str(r.get("id") or r.get("url") or ""),
            title=r.get("title") or "",
            body=r.get("body") or r.get("snippet") or r.get("content") or "",
            image=ImageRef.from_locator(image) if image else None,
            caption=r.get("caption") or r.get("title") if image else r.get("caption"),
            score=float(r.get("score") or 0.0),
        )

    def _hits(self, results: list[dict[str, Any]], limit: int) -> list[RawHit]:
        hits = []
        for r in results:
            try:
                hits.append(self._to_hit(r))
            except ValidationError as exc:
                log.info("dropping malformed search result: %s", exc)
        hits.sort(key=lambda h: -h.score)
        return hits[:limit]

    def text_search(self, query: str, k: int) -> list[RawHit]:
        return self._hits(self._post({"mode": "text", "query": query, "count": k}), k)

    def image_search(self, image: ImageRef, query: str, max_results: int) -> list[RawHit]:
        payload = {"mode": "image", "query": query, "count": max_results, "image": image.as_data_uri()}
        return self._hits(self._post(payload), max_results)

"""Benchmark samples: JSONL loading, validation and summary statistics."""

from __future__ import annotations

import enum
import json
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from cogplan.core import ImageRef, MultimodalQuery, count_tokens
from cogplan.errors import ValidationError

HOP_BUCKETS = ("1-hop", "2-hop", ">2-hop")


def hop_bucket(hop_count: int) -> str:
    if hop_count <= 1:
        return "1-hop"
    if hop_count == 2:
        return "2-hop"
    return ">2-hop"


class AnswerType(str, enum.Enum):
    OPEN = "open-ended"
    CLOSE = "close-ended"


@dataclass(frozen=True)
class BenchSample:
    id: str
    query: MultimodalQuery
    hop_count: int
    answer_type: AnswerType
    domain: str
    golden_answer: str
    golden_trace: dict[str, Any] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("id", "empty id")
        if not isinstance(self.hop_count, int) or self.hop_count < 1:
            raise ValidationError("hop_count", "must be an integer >= 1")
        object.__setattr__(self, "answer_type", AnswerType(self.answer_type))
        if not self.golden_answer or not self.golden_answer.strip():
            raise ValidationError("golden_answer", "empty golden answer")

    @property
    def bucket(self) -> str:
        return hop_bucket(self.hop_count)

    def golden_queries(self) -> list[str] | None:
        """Reformulated queries of the last step of the golden chain, if recorded."""
        steps = (self.golden_trace or {}).get("steps") or []
        if not steps:
            return None
        return list(steps[-1].get("queries") or []) or None


_REQUIRED = ("id", "query", "hop_count", "answer_type", "domain", "golden_answer")


def _resolve_image(locator: str | None, root: Path) -> ImageRef | None:
    if not locator:
        return None
    ref = ImageRef.from_locator(locator)
    if ref.media_kind.value == "path" and not os.path.isabs(locator):
        ref = ImageRef(str(root / locator))
    return ref


def parse_sample(data: dict[str, Any], root: Path) -> BenchSample:
    for key in _REQUIRED:
        if key not in data or data[key] in (None, ""):
            raise ValidationError(key, "missing")
    query = data["query"]
    if not isinstance(query, dict):
        raise ValidationError("query", "expected an object with text and image")
    try:
        answer_type = AnswerType(data["answer_type"])
    except ValueError as exc:
        raise ValidationError("answer_type", f"unknown value {data['answer_type']!r}") from exc
    mq = MultimodalQuery(
        text=query.get("text") or "",
        image=_resolve_image(query.get("image"), root),
        id=str(data["id"]),
    )
    return BenchSample(
        id=str(data["id"]),
        query=mq,
        hop_count=data["hop_count"],
        answer_type=answer_type,
        domain=str(data["domain"]),
        golden_answer=data["golden_answer"],
        golden_trace=data.get("golden_trace"),
    )


def load_dataset(path: str | os.PathLike) -> list[BenchSample]:
    """Parse and validate a JSONL dataset; image paths resolve against its directory."""
    path = Path(path)
    root = path.parent
    samples: list[BenchSample] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except ValueError as exc:
                raise ValidationError(f"line {line_no}", f"invalid JSON: {exc}") from exc
            if not isinstance(data, dict):
                raise ValidationError(f"line {line_no}", "expected a JSON object")
            try:
                sample = parse_sample(data, root)
            except ValidationError as exc:
                raise ValidationError(f"line {line_no}: {exc.field}", str(exc).split(": ", 1)[-1]) from exc
            if sample.id in seen:
                raise ValidationError(f"line {line_no}: id", f"duplicate id {sample.id!r}")
            seen.add(sample.id)
            samples.append(sample)
    return samples


def sample_to_dict(sample: BenchSample) -> dict[str, Any]:
    out: dict[str, Any] = {
        "id": sample.id,
        "query": {"text": sample.query.text, "image": sample.query.image.locator if sample.query.image else None},
        "hop_count": sample.hop_count,
        "answer_type": sample.answer_type.value,
        "domain": sample.domain,
        "golden_answer": sample.golden_answer,
    }
    if sample.golden_trace is not None:
        out["golden_trace"] = sample.golden_trace
    return out


@dataclass(frozen=True)
class DatasetStats:
    n_queries: int
    n_domains: int
    mean_query_len: float
    mean_answer_len: float
    n_images: int
    hop_histogram: dict[str, float]
    answer_types: dict[str, float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_queries": self.n_queries,
            "n_domains": self.n_domains,
            "mean_query_len": self.mean_query_len,
            "mean_answer_len": self.mean_answer_len,
            "n_images": self.n_images,
            "hop_histogram": dict(self.hop_histogram),
            "answer_types": dict(self.answer_types),
        }

    def render(self) -> str:
        rows = [
            ("# Queries", str(self.n_queries)),
            ("# Domains", str(self.n_domains)),
            ("# Images", str(self.n_images)),
            ("Avg. query length", f"{self.mean_query_len:.2f}"),
            ("Avg. answer length", f"{self.mean_answer_len:.2f}"),
        ]
        rows += [(f"{b} queries", f"{self.hop_histogram[b]:.2%}") for b in HOP_BUCKETS]
        rows += [(f"{t.value}", f"{self.answer_types[t.value]:.2%}") for t in AnswerType]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def _fractions(counts: Counter, keys: Iterable[str], total: int) -> dict[str, float]:
    return {k: counts.get(k, 0) / total for k in keys}


def dataset_stats(samples: Sequence[BenchSample]) -> DatasetStats:
    if not samples:
        raise ValidationError("samples", "empty dataset")
    n = len(samples)
    images = {s.query.image.locator for s in samples if s.query.image is not None}
    return DatasetStats(
        n_queries=n,
        n_domains=len({s.domain for s in samples}),
        mean_query_len=sum(count_tokens(s.query.text) for s in samples) / n,
        mean_answer_len=sum(count_tokens(s.golden_answer) for s in samples) / n,
        n_images=len(images),
        hop_histogram=_fractions(Counter(s.bucket for s in samples), HOP_BUCKETS, n),
        answer_types=_fractions(Counter(s.answer_type.value for s in samples), [t.value for t in AnswerType], n),
    )

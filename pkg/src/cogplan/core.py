"""Domain types and the planning state machine.

States are immutable values: :func:`apply_decision` returns a new
:class:`PlanState` and never touches its input.  The planner threads
states through the loop and records a :class:`PlanTrace`.
"""

from __future__ import annotations

import base64
import enum
import json
import os
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from cogplan.errors import ContractError, IterationCapError, ValidationError

DEFAULT_T_MAX = 3
MAX_SUB_QUERIES = 5
TEXT_TOKEN_CAP = 800


def count_tokens(text: str) -> int:
    """Whitespace-delimited token count used for every budget and cap."""
    return len(text.split())


class MediaKind(str, enum.Enum):
    PATH = "path"
    URL = "url"
    INLINE = "inline-bytes"


@dataclass(frozen=True)
class ImageRef:
    """Opaque image handle passed to expert and search backends."""

    locator: str
    media_kind: MediaKind = MediaKind.PATH
    data: bytes | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.locator or not self.locator.strip():
            raise ValidationError("image.locator", "empty locator")
        object.__setattr__(self, "media_kind", MediaKind(self.media_kind))
        if self.media_kind is MediaKind.INLINE and not self.data:
            raise ValidationError("image.data", "inline image carries no bytes")

    @classmethod
    def from_locator(cls, locator: str) -> ImageRef:
        if locator.startswith(("http://", "https://")):
            return cls(locator, MediaKind.URL)
        return cls(locator, MediaKind.PATH)

    def is_readable(self) -> bool:
        if self.media_kind is MediaKind.PATH:
            return os.path.isfile(self.locator) and os.access(self.locator, os.R_OK)
        if self.media_kind is MediaKind.URL:
            return "://" in self.locator
        return bool(self.data)

    def read_bytes(self) -> bytes:
        if self.media_kind is MediaKind.INLINE:
            return self.data or b""
        if self.media_kind is MediaKind.PATH:
            with open(self.locator, "rb") as fh:
                return fh.read()
        raise ValueError("URL images are not fetched locally")

    def as_data_uri(self, mime: str = "image/png") -> str:
        if self.media_kind is MediaKind.URL:
            return self.locator
        payload = base64.b64encode(self.read_bytes()).decode("ascii")
        return f"data:{mime};base64,{payload}"


@dataclass(frozen=True)
class MultimodalQuery:
    """A question ``text`` with an optional ``image``."""

    text: str
    image: ImageRef | None = None
    id: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValidationError("text", "empty text")


class RetrievalAction(str, enum.Enum):
    TEXT_SEARCH = "TEXT_SEARCH"
    IMAGE_SEARCH = "IMAGE_SEARCH"
    NO_SEARCH = "NO_SEARCH"

    @property
    def is_search(self) -> bool:
        return self is not RetrievalAction.NO_SEARCH


@dataclass(frozen=True)
class QuerySet:
    """Ordered, duplicate-free set of 1..5 sub-queries."""

    queries: tuple[str, ...]

    def __post_init__(self) -> None:
        queries = tuple(self.queries)
        if not 1 <= len(queries) <= MAX_SUB_QUERIES:
            raise ValidationError(
                "queries", f"expected 1..{MAX_SUB_QUERIES} sub-queries, got {len(queries)}"
            )
        cleaned = []
        for q in queries:
            if not isinstance(q, str) or not q.strip():
                raise ValidationError("queries", "empty sub-query")
            cleaned.append(q.strip())
        if len(set(cleaned)) != len(cleaned):
            raise ValidationError("queries", "duplicate sub-query")
        object.__setattr__(self, "queries", tuple(cleaned))

    @classmethod
    def of(cls, *queries: str) -> QuerySet:
        return cls(tuple(queries))

    def __iter__(self):
        return iter(self.queries)

    def __len__(self) -> int:
        return len(self.queries)

    def __getitem__(self, i: int) -> str:
        return self.queries[i]


class DocKind(str, enum.Enum):
    TEXT = "text"
    IMAGE = "image"


@dataclass(frozen=True)
class RetrievedDoc:
    kind: DocKind
    content: str
    source_id: str
    iteration: int
    query: str
    token_count: int
    image: ImageRef | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", DocKind(self.kind))
        if self.kind is DocKind.IMAGE and self.image is None:
            raise ValidationError("image", "image doc without image reference")
        if self.kind is DocKind.TEXT and self.image is not None:
            raise ValidationError("image", "text doc carries an image reference")
        if self.iteration < 0 or self.token_count < 0:
            raise ValidationError("iteration", "negative counter")
        if not self.source_id:
            raise ValidationError("source_id", "empty source id")

    @property
    def key(self) -> tuple[DocKind, str]:
        return (self.kind, self.source_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "source_id": self.source_id,
            "content": self.content,
            "iteration": self.iteration,
            "query": self.query,
            "token_count": self.token_count,
            "image": self.image.locator if self.image else None,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RetrievedDoc:
        image = d.get("image")
        return cls(
            kind=DocKind(d["kind"]),
            content=d["content"],
            source_id=d["source_id"],
            iteration=int(d["iteration"]),
            query=d["query"],
            token_count=int(d["token_count"]),
            image=ImageRef.from_locator(image) if image else None,
        )


@dataclass(frozen=True)
class PlanDecision:
    action: RetrievalAction
    query_set: QuerySet


@dataclass(frozen=True)
class PlanState:
    iteration: int
    current_queries: QuerySet
    evidence: tuple[RetrievedDoc, ...]
    history: tuple[PlanDecision, ...]
    origin: MultimodalQuery

    @property
    def last_action(self) -> RetrievalAction | None:
        return self.history[-1].action if self.history else None

    def has_image_evidence(self) -> bool:
        return any(d.kind is DocKind.IMAGE for d in self.evidence)


class Termination(str, enum.Enum):
    NO_SEARCH = "no-search"
    ITERATION_CAP = "iteration-cap"


@dataclass(frozen=True)
class PlanStep:
    decision: PlanDecision
    retrieved: tuple[RetrievedDoc, ...] = ()
    expert_latency_ms: float = 0.0
    expert_tokens: int = 0
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "action": self.decision.action.value,
            "queries": list(self.decision.query_set),
            "retrieved": [d.to_dict() for d in self.retrieved],
            "expert_tokens": self.expert_tokens,
            "expert_latency_ms": self.expert_latency_ms,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> PlanStep:
        return cls(
            decision=PlanDecision(RetrievalAction(d["action"]), QuerySet(tuple(d["queries"]))),
            retrieved=tuple(RetrievedDoc.from_dict(r) for r in d.get("retrieved", [])),
            expert_latency_ms=float(d.get("expert_latency_ms", 0.0)),
            expert_tokens=int(d.get("expert_tokens", 0)),
            flags=tuple(d.get("flags", ())),
        )


@dataclass(frozen=True)
class PlanTrace:
    """Everything one query did: decisions, retrievals and the answer.

    ``terminated_by`` is ``None`` only for failed traces.
    """

    sample_id: str
    steps: tuple[PlanStep, ...]
    final_answer: str
    terminated_by: Termination | None
    mode: str = "cogplanner-sequential"
    flags: tuple[str, ...] = ()
    failed: bool = False
    error: str | None = None

    @property
    def actions(self) -> list[RetrievalAction]:
        return [s.decision.action for s in self.steps]

    @property
    def retrieval_steps(self) -> int:
        return sum(1 for a in self.actions if a.is_search)

    @property
    def expert_tokens(self) -> int:
        return sum(s.expert_tokens for s in self.steps)

    @property
    def expert_latency_ms(self) -> float:
        return sum(s.expert_latency_ms for s in self.steps)

    def to_dict(self) -> dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "mode": self.mode,
            "steps": [s.to_dict() for s in self.steps],
            "final_answer": self.final_answer,
            "terminated_by": self.terminated_by.value if self.terminated_by else None,
            "flags": list(self.flags),
            "failed": self.failed,
            "error": self.error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=False)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> PlanTrace:
        term = d.get("terminated_by")
        return cls(
            sample_id=d["sample_id"],
            steps=tuple(PlanStep.from_dict(s) for s in d.get("steps", [])),
            final_answer=d.get("final_answer", ""),
            terminated_by=Termination(term) if term else None,
            mode=d.get("mode", "cogplanner-sequential"),
            flags=tuple(d.get("flags", ())),
            failed=bool(d.get("failed", False)),
            error=d.get("error"),
        )


def write_traces(traces: Iterable[PlanTrace], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            fh.write(trace.to_json() + "\n")


def read_traces(path: str | os.PathLike) -> list[PlanTrace]:
    traces = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                traces.append(PlanTrace.from_dict(json.loads(line)))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValidationError(f"line {line_no}", str(exc)) from exc
    return traces


def init_state(query: MultimodalQuery) -> PlanState:
    """Initial state: the query itself, no evidence, no history."""
    if not query.text.strip():
        raise ValidationError("text", "empty text")
    if query.image is not None and not query.image.is_readable():
        raise ValidationError("image", f"unreadable image {query.image.locator!r}")
    return PlanState(
        iteration=0,
        current_queries=QuerySet.of(query.text),
        evidence=(),
        history=(),
        origin=query,
    )


def apply_decision(
    state: PlanState,
    decision: PlanDecision,
    retrieved: Sequence[RetrievedDoc],
    *,
    t_max: int = DEFAULT_T_MAX,
) -> PlanState:
    """Advance ``state`` by one decision and merge its retrieved documents.

    Evidence is deduplicated on ``(kind, source_id)``; the earliest copy wins.
    A search action may legitimately retrieve nothing.
    """
    if decision.action is RetrievalAction.NO_SEARCH and retrieved:
        raise ContractError("NO_SEARCH decision cannot carry retrieved documents")
    if state.iteration + 1 > t_max:
        raise IterationCapError(f"iteration {state.iteration + 1} exceeds t_max={t_max}")
    next_iter = state.iteration + 1
    for doc in retrieved:
        if doc.iteration != next_iter:
            raise ContractError(
                f"document {doc.source_id!r} tagged iteration {doc.iteration}, expected {next_iter}"
            )

    seen = {d.key for d in state.evidence}
    merged = list(state.evidence)
    for doc in retrieved:
        if doc.key not in seen:
            seen.add(doc.key)
            merged.append(doc)

    return PlanState(
        iteration=next_iter,
        current_queries=decision.query_set,
        evidence=tuple(merged),
        history=state.history + (decision,),
        origin=state.origin,
    )


def is_terminal(state: PlanState, t_max: int = DEFAULT_T_MAX) -> bool:
    if state.last_action is RetrievalAction.NO_SEARCH:
        return True
    return state.iteration >= t_max


def termination_reason(state: PlanState) -> Termination:
    if state.last_action is RetrievalAction.NO_SEARCH:
        return Termination.NO_SEARCH
    return Termination.ITERATION_CAP

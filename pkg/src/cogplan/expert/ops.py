"""Planning-expert operations: query reformulation and retrieval-action selection."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Generic, Sequence, TypeVar

from cogplan.core import (
    MAX_SUB_QUERIES,
    DocKind,
    ImageRef,
    PlanState,
    QuerySet,
    RetrievalAction,
    RetrievedDoc,
    count_tokens,
)
from cogplan.errors import ParseError
from cogplan.expert.backends import ExpertBackend, ExpertRequest, ExpertResponse
from cogplan.expert.parsing import parse_expert_output
from cogplan.expert.prompts import DEFAULT_PROMPTS, PromptSet

log = logging.getLogger(__name__)

DEFAULT_EVIDENCE_BUDGET = 4000
IMAGE_MARKER = "[image]"

T = TypeVar("T")


@dataclass(frozen=True)
class ExpertResult(Generic[T]):
    """A parsed expert decision plus what it cost.

    ``degraded`` lists the fallbacks or coercions applied, empty when the
    expert answered cleanly.
    """

    value: T
    tokens: int = 0
    latency_ms: float = 0.0
    degraded: tuple[str, ...] = ()


def render_doc_block(doc: RetrievedDoc) -> str:
    if doc.kind is DocKind.IMAGE:
        return f"[{doc.source_id}] {IMAGE_MARKER} {doc.content}"
    return f"[{doc.source_id}] {doc.content}"


def render_evidence_digest(evidence: Sequence[RetrievedDoc], budget_tokens: int) -> str:
    """Render evidence newest-iteration-first, packing whole blocks into the budget.

    Packing stops at the first block that would overflow, so only the most
    recent blocks survive.  Within one iteration, retrieval order is kept.
    """
    if budget_tokens <= 0:
        raise ValueError("budget_tokens must be positive")
    ordered = sorted(enumerate(evidence), key=lambda p: (-p[1].iteration, p[0]))
    blocks: list[str] = []
    used = 0
    for _, doc in ordered:
        block = render_doc_block(doc)
        cost = count_tokens(block)
        if used + cost > budget_tokens:
            break
        blocks.append(block)
        used += cost
    return "\n\n".join(blocks)


def image_for_search(state: PlanState) -> ImageRef | None:
    """The image an IMAGE_SEARCH would use: the query's own, else the newest retrieved one."""
    if state.origin.image is not None:
        return state.origin.image
    for doc in reversed(state.evidence):
        if doc.kind is DocKind.IMAGE:
            return doc.image
    return None


def available_actions(state: PlanState) -> tuple[RetrievalAction, ...]:
    if image_for_search(state) is not None:
        return (RetrievalAction.TEXT_SEARCH, RetrievalAction.IMAGE_SEARCH, RetrievalAction.NO_SEARCH)
    return (RetrievalAction.TEXT_SEARCH, RetrievalAction.NO_SEARCH)


def coerce_action(action: RetrievalAction, state: PlanState) -> tuple[RetrievalAction, str | None]:
    """Make ``action`` executable in ``state``; IMAGE_SEARCH without an image becomes TEXT_SEARCH."""
    if action is RetrievalAction.IMAGE_SEARCH and image_for_search(state) is None:
        return RetrievalAction.TEXT_SEARCH, "image-search-coerced-to-text"
    return action, None


def _prompt_fields(state: PlanState, queries: QuerySet, budget: int) -> dict[str, str]:
    origin = state.origin
    digest = render_evidence_digest(state.evidence, budget)
    return {
        "origin": origin.text,
        "image_note": "An image is attached to the question." if origin.image else "No image is attached.",
        "queries": "\n".join(f"{i}. {q}" for i, q in enumerate(queries, 1)),
        "evidence": digest or "(nothing yet)",
        "max_queries": str(MAX_SUB_QUERIES),
    }


def _ask(backend: ExpertBackend, request: ExpertRequest, expected: str):
    """Call the backend, retrying once on unparseable output.

    Returns ``(parsed_or_None, tokens, latency_ms)``.  Transport errors propagate.
    """
    tokens = 0
    latency = 0.0
    for attempt in range(2):
        resp: ExpertResponse = backend.complete(request)
        tokens += resp.total_tokens
        latency += resp.latency_ms
        try:
            return parse_expert_output(resp.text, expected), tokens, latency
        except ParseError as exc:
            log.info("unparseable %s output (attempt %d): %s", expected, attempt + 1, exc)
    return None, tokens, latency


def _clean_query_list(items: list[str]) -> tuple[QuerySet, list[str]]:
    notes = []
    seen: list[str] = []
    for item in items:
        q = item.strip()
        if q and q not in seen:
            seen.append(q)
    if len(seen) > MAX_SUB_QUERIES:
        notes.append(f"query-set-truncated-{len(seen)}")
        seen = seen[:MAX_SUB_QUERIES]
    return QuerySet(tuple(seen)), notes


def reformulate(
    backend: ExpertBackend,
    state: PlanState,
    *,
    prompts: PromptSet = DEFAULT_PROMPTS,
    budget: int = DEFAULT_EVIDENCE_BUDGET,
) -> ExpertResult[QuerySet]:
    """Refine and decompose the current queries given the evidence so far."""
    system, user = prompts.get("reformulate").render(
        **_prompt_fields(state, state.current_queries, budget)
    )
    request = ExpertRequest(
        system,
        user,
        images=(state.origin.image,) if state.origin.image else (),
        meta={
            "role": "reformulate",
            "iteration": state.iteration,
            "sample_id": state.origin.id,
            "queries": tuple(state.current_queries),
        },
    )
    items, tokens, latency = _ask(backend, request, "query-set")
    if items is None:
        return ExpertResult(state.current_queries, tokens, latency, ("reformulation-fallback-identity",))
    queries, notes = _clean_query_list(items)
    return ExpertResult(queries, tokens, latency, tuple(notes))


def select_action(
    backend: ExpertBackend,
    state: PlanState,
    queries: QuerySet,
    *,
    prompts: PromptSet = DEFAULT_PROMPTS,
    budget: int = DEFAULT_EVIDENCE_BUDGET,
) -> ExpertResult[RetrievalAction]:
    """Choose one retrieval action for ``queries``; falls back to NO_SEARCH on garbage."""
    offered = available_actions(state)
    fields = _prompt_fields(state, queries, budget)
    fields["actions"] = ", ".join(a.value for a in offered)
    system, user = prompts.get("action").render(**fields)
    request = ExpertRequest(
        system,
        user,
        images=(state.origin.image,) if state.origin.image else (),
        max_output_tokens=32,
        meta={
            "role": "action",
            "iteration": state.iteration,
            "sample_id": state.origin.id,
            "queries": tuple(queries),
        },
    )
    action, tokens, latency = _ask(backend, request, "action")
    if action is None:
        return ExpertResult(RetrievalAction.NO_SEARCH, tokens, latency, ("action-fallback-no-search",))
    action, note = coerce_action(action, state)
    return ExpertResult(action, tokens, latency, (note,) if note else ())

"""Final answer synthesis from the original query, the final queries and the evidence."""

from __future__ import annotations

import logging
from typing import Sequence

from cogplan.core import MultimodalQuery, QuerySet, RetrievedDoc
from cogplan.errors import BackendError, GenerationError, ParseError
from cogplan.expert.backends import ExpertBackend, ExpertRequest
from cogplan.expert.ops import DEFAULT_EVIDENCE_BUDGET, render_evidence_digest
from cogplan.expert.prompts import DEFAULT_PROMPTS, PromptSet

log = logging.getLogger(__name__)


def build_generation_request(
    origin: MultimodalQuery,
    final_queries: QuerySet,
    evidence: Sequence[RetrievedDoc],
    budget: int = DEFAULT_EVIDENCE_BUDGET,
    prompts: PromptSet = DEFAULT_PROMPTS,
    max_output_tokens: int = 1024,
) -> ExpertRequest:
    # Only the original query, the final query set and the evidence digest go in;
    # intermediate query sets are deliberately absent.
    digest = render_evidence_digest(evidence, budget)
    system, user = prompts.get("generate").render(
        origin=origin.text,
        image_note="An image is attached to the question." if origin.image else "",
        queries="\n".join(f"{i}. {q}" for i, q in enumerate(final_queries, 1)),
        evidence_section=f"\nReference material:\n{digest}\n" if digest else "",
    )
    return ExpertRequest(
        system,
        user,
        images=(origin.image,) if origin.image else (),
        max_output_tokens=max_output_tokens,
        meta={
            "role": "answer",
            "sample_id": origin.id,
            "queries": tuple(final_queries),
            "evidence_count": len(evidence),
        },
    )


def generate_answer(
    backend: ExpertBackend,
    origin: MultimodalQuery,
    final_queries: QuerySet,
    evidence: Sequence[RetrievedDoc],
    budget: int = DEFAULT_EVIDENCE_BUDGET,
    *,
    prompts: PromptSet = DEFAULT_PROMPTS,
) -> str:
    """Ask the generator once (plus one retry) and return its answer, trimmed."""
    request = build_generation_request(origin, final_queries, evidence, budget, prompts)
    last: Exception | None = None
    for attempt in range(2):
        try:
            text = backend.complete(request).text.strip()
            if not text:
                raise ParseError("empty answer")
            return text
        except (BackendError, ParseError) as exc:
            last = exc
            log.warning("generation attempt %d failed: %s", attempt + 1, exc)
    raise GenerationError(f"generator failed: {last}")

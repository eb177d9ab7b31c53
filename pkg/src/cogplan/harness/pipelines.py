"""Baseline and planner pipelines, all emitting the same trace format."""

from __future__ import annotations

import dataclasses
import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

from cogplan.core import (
    MultimodalQuery,
    PlanDecision,
    PlanStep,
    PlanTrace,
    QuerySet,
    RetrievalAction,
    Termination,
    apply_decision,
    init_state,
)
from cogplan.errors import BackendError, RetrievalError, ValidationError
from cogplan.generation import generate_answer
from cogplan.harness.dataset import BenchSample
from cogplan.planner import Backends, Paradigm, PlannerConfig, run_plan
from cogplan.retrieval.retrieve import image_retrieve, text_retrieve

log = logging.getLogger(__name__)

FIXED_IMAGE_FALLBACK = "fixed-image-fallback-origin"


class PipelineMode(str, enum.Enum):
    ORIGIN = "origin"
    FIXED_TEXT = "fixed-text"
    FIXED_IMAGE = "fixed-image"
    COGPLANNER_PARALLEL = "cogplanner-parallel"
    COGPLANNER_SEQUENTIAL = "cogplanner-sequential"


def _origin(query: MultimodalQuery, config: PlannerConfig, backends: Backends, flags=()) -> PlanTrace:
    state = init_state(query)
    answer = generate_answer(
        backends.answerer, query, state.current_queries, (), config.evidence_budget, prompts=backends.prompts
    )
    return PlanTrace(query.id, (), answer, Termination.NO_SEARCH, mode=PipelineMode.ORIGIN.value, flags=tuple(flags))


def _fixed(query: MultimodalQuery, action: RetrievalAction, config: PlannerConfig, backends: Backends) -> PlanTrace:
    """One retrieval round on the raw query, then generation."""
    mode = PipelineMode.FIXED_TEXT if action is RetrievalAction.TEXT_SEARCH else PipelineMode.FIXED_IMAGE
    state = init_state(query)
    decision = PlanDecision(action, QuerySet.of(query.text))
    flags: tuple[str, ...] = ()
    try:
        if action is RetrievalAction.TEXT_SEARCH:
            result = text_retrieve(backends.search, query.text, config, iteration=1)
        else:
            result = image_retrieve(
                backends.search, query.image, query.text, config, iteration=1, postprocess=backends.image_postprocess
            )
        docs, flags = result.docs, tuple(f"{f}: {query.text}" for f in result.flags)
    except RetrievalError as exc:
        log.warning("fixed retrieval failed for %s: %s", query.id, exc)
        docs, flags = (), (f"retrieval-failed: {query.text}",)
    state = apply_decision(state, decision, docs, t_max=1)
    answer = generate_answer(
        backends.answerer, query, state.current_queries, state.evidence, config.evidence_budget,
        prompts=backends.prompts,
    )
    step = PlanStep(decision, tuple(docs), flags=flags)
    return PlanTrace(query.id, (step,), answer, Termination.ITERATION_CAP, mode=mode.value)


def run_sample(sample: BenchSample | MultimodalQuery, mode: PipelineMode, config: PlannerConfig,
               backends: Backends) -> PlanTrace:
    """Run one sample; failures come back as a failed trace instead of raising."""
    query = sample.query if isinstance(sample, BenchSample) else sample
    mode = PipelineMode(mode)
    try:
        if mode is PipelineMode.ORIGIN:
            return _origin(query, config, backends)
        if mode is PipelineMode.FIXED_TEXT:
            return _fixed(query, RetrievalAction.TEXT_SEARCH, config, backends)
        if mode is PipelineMode.FIXED_IMAGE:
            if query.image is None:
                return _origin(query, config, backends, flags=(FIXED_IMAGE_FALLBACK,))
            return _fixed(query, RetrievalAction.IMAGE_SEARCH, config, backends)
        paradigm = Paradigm.PARALLEL if mode is PipelineMode.COGPLANNER_PARALLEL else Paradigm.SEQUENTIAL
        return run_plan(query, dataclasses.replace(config, paradigm=paradigm), backends, mode=mode.value)
    except (BackendError, ValidationError) as exc:
        log.error("sample %s failed in %s mode: %s", query.id, mode.value, exc)
        return PlanTrace(query.id, (), "", None, mode=mode.value, failed=True, error=str(exc))


def run_pipeline(
    samples: Sequence[BenchSample | MultimodalQuery],
    mode: PipelineMode | str,
    config: PlannerConfig,
    backends: Backends,
    *,
    workers: int = 1,
) -> list[PlanTrace]:
    """Traces for every sample, in input order."""
    mode = PipelineMode(mode)
    if workers <= 1:
        return [run_sample(s, mode, config, backends) for s in samples]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: run_sample(s, mode, config, backends), samples))

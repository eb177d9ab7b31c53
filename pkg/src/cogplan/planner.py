"""The iterative planning loop, in parallel and sequential paradigms."""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

from cogplan.core import (
    DEFAULT_T_MAX,
    TEXT_TOKEN_CAP,
    MultimodalQuery,
    PlanDecision,
    PlanState,
    PlanStep,
    PlanTrace,
    RetrievalAction,
    RetrievedDoc,
    apply_decision,
    init_state,
    is_terminal,
    termination_reason,
)
from cogplan.errors import BackendError, ContractError, RetrievalError, ValidationError
from cogplan.expert.backends import ExpertBackend
from cogplan.expert.ops import ExpertResult, image_for_search, reformulate, select_action
from cogplan.expert.prompts import DEFAULT_PROMPTS, PromptSet
from cogplan.generation import generate_answer
from cogplan.retrieval.backends import SearchBackend
from cogplan.retrieval.retrieve import ImageHook, RetrievalResult, image_retrieve, no_postprocess, text_retrieve

log = logging.getLogger(__name__)


class Paradigm(str, enum.Enum):
    PARALLEL = "parallel"
    SEQUENTIAL = "sequential"


@dataclass(frozen=True)
class PlannerConfig:
    paradigm: Paradigm = Paradigm.SEQUENTIAL
    t_max: int = DEFAULT_T_MAX
    text_top_k: int = 5
    text_token_cap: int = TEXT_TOKEN_CAP
    image_min: int = 3
    image_max: int = 6
    evidence_budget: int = 4000
    retrieval_workers: int = 4

    def __post_init__(self) -> None:
        object.__setattr__(self, "paradigm", Paradigm(self.paradigm))
        for name in ("t_max", "text_top_k", "text_token_cap", "image_min", "image_max",
                     "evidence_budget", "retrieval_workers"):
            if int(getattr(self, name)) <= 0:
                raise ValidationError(name, "must be positive")
        if self.image_min > self.image_max:
            raise ValidationError("image_min", "image_min exceeds image_max")


@dataclass
class Backends:
    """Expert, search and (optionally separate) generator backends for one run."""

    expert: ExpertBackend
    search: SearchBackend
    generator: ExpertBackend | None = None
    prompts: PromptSet = DEFAULT_PROMPTS
    image_postprocess: ImageHook = field(default=no_postprocess)

    @property
    def answerer(self) -> ExpertBackend:
        return self.generator if self.generator is not None else self.expert


def _require_open(state: PlanState, t_max: int) -> None:
    if is_terminal(state, t_max):
        raise ContractError("planning step requested on a terminal state")


def plan_step_parallel(
    state: PlanState, expert: ExpertBackend, config: PlannerConfig = PlannerConfig(),
    prompts: PromptSet = DEFAULT_PROMPTS,
) -> ExpertResult[PlanDecision]:
    """Reformulate and pick the action concurrently, both from the previous query set."""
    _require_open(state, config.t_max)
    budget = config.evidence_budget
    with ThreadPoolExecutor(max_workers=2) as pool:
        fut_q = pool.submit(reformulate, expert, state, prompts=prompts, budget=budget)
        fut_a = pool.submit(select_action, expert, state, state.current_queries, prompts=prompts, budget=budget)
        queries, action = fut_q.result(), fut_a.result()
    return ExpertResult(
        PlanDecision(action.value, queries.value),
        tokens=queries.tokens + action.tokens,
        latency_ms=max(queries.latency_ms, action.latency_ms),
        degraded=queries.degraded + action.degraded,
    )


def plan_step_sequential(
    state: PlanState, expert: ExpertBackend, config: PlannerConfig = PlannerConfig(),
    prompts: PromptSet = DEFAULT_PROMPTS,
) -> ExpertResult[PlanDecision]:
    """Reformulate first, then pick the action given the reformulated queries."""
    _require_open(state, config.t_max)
    budget = config.evidence_budget
    queries = reformulate(expert, state, prompts=prompts, budget=budget)
    action = select_action(expert, state, queries.value, prompts=prompts, budget=budget)
    return ExpertResult(
        PlanDecision(action.value, queries.value),
        tokens=queries.tokens + action.tokens,
        latency_ms=queries.latency_ms + action.latency_ms,
        degraded=queries.degraded + action.degraded,
    )


STEP_FUNCTIONS: dict[Paradigm, Callable[..., ExpertResult[PlanDecision]]] = {
    Paradigm.PARALLEL: plan_step_parallel,
    Paradigm.SEQUENTIAL: plan_step_sequential,
}


def execute_action(
    state: PlanState, decision: PlanDecision, config: PlannerConfig, backends: Backends
) -> tuple[list[RetrievedDoc], list[str]]:
    """Run the decision's single action for every sub-query; results keep sub-query order.

    A failing sub-query contributes nothing and is flagged.
    """
    if not decision.action.is_search:
        return [], []
    iteration = state.iteration + 1
    image = image_for_search(state)

    def run(query: str) -> RetrievalResult:
        if decision.action is RetrievalAction.TEXT_SEARCH:
            return text_retrieve(backends.search, query, config, iteration=iteration)
        return image_retrieve(
            backends.search, image, query, config, iteration=iteration, postprocess=backends.image_postprocess
        )

    def guarded(query: str) -> RetrievalResult | RetrievalError:
        try:
            return run(query)
        except RetrievalError as exc:
            log.warning("retrieval failed for %r: %s", query, exc)
            return exc

    queries = list(decision.query_set)
    if len(queries) > 1 and config.retrieval_workers > 1:
        with ThreadPoolExecutor(max_workers=min(config.retrieval_workers, len(queries))) as pool:
            outcomes = list(pool.map(guarded, queries))
    else:
        outcomes = [guarded(q) for q in queries]

    docs: list[RetrievedDoc] = []
    flags: list[str] = []
    for query, outcome in zip(queries, outcomes):
        if isinstance(outcome, RetrievalError):
            flags.append(f"retrieval-failed: {query}")
            continue
        docs.extend(outcome.docs)
        flags.extend(f"{flag}: {query}" for flag in outcome.flags)
    return docs, flags


def run_plan(
    query: MultimodalQuery, config: PlannerConfig, backends: Backends, *, mode: str | None = None
) -> PlanTrace:
    """Plan, retrieve and answer one query.

    Invalid queries raise :class:`ValidationError`.  Backend failures that
    survive retries end the run early with a partial trace marked failed.
    """
    state = init_state(query)
    step_fn = STEP_FUNCTIONS[config.paradigm]
    mode = mode or f"cogplanner-{config.paradigm.value}"
    steps: list[PlanStep] = []
    try:
        while not is_terminal(state, config.t_max):
            outcome = step_fn(state, backends.expert, config, backends.prompts)
            decision = outcome.value
            retrieved, flags = execute_action(state, decision, config, backends)
            state = apply_decision(state, decision, retrieved, t_max=config.t_max)
            steps.append(
                PlanStep(
                    decision=decision,
                    retrieved=tuple(retrieved),
                    expert_latency_ms=outcome.latency_ms,
                    expert_tokens=outcome.tokens,
                    flags=outcome.degraded + tuple(flags),
                )
            )
        answer = generate_answer(
            backends.answerer,
            state.origin,
            state.current_queries,
            state.evidence,
            config.evidence_budget,
            prompts=backends.prompts,
        )
    except BackendError as exc:
        log.error("plan for %r failed: %s", query.id, exc)
        return PlanTrace(query.id, tuple(steps), "", None, mode=mode, failed=True, error=str(exc))
    return PlanTrace(query.id, tuple(steps), answer, termination_reason(state), mode=mode)

"""Agentic planning for multimodal retrieval-augmented generation."""

from cogplan.core import (
    ImageRef,
    MultimodalQuery,
    PlanDecision,
    PlanState,
    PlanStep,
    PlanTrace,
    QuerySet,
    RetrievalAction,
    RetrievedDoc,
    apply_decision,
    init_state,
    is_terminal,
)
from cogplan.planner import Backends, Paradigm, PlannerConfig, run_plan

__version__ = "0.1.0"

__all__ = [
    "Backends",
    "ImageRef",
    "MultimodalQuery",
    "Paradigm",
    "PlanDecision",
    "PlanState",
    "PlanStep",
    "PlanTrace",
    "PlannerConfig",
    "QuerySet",
    "RetrievalAction",
    "RetrievedDoc",
    "apply_decision",
    "init_state",
    "is_terminal",
    "run_plan",
]

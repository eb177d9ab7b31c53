"""Run configuration: JSON file, environment and CLI flags, in increasing precedence.

Recognized keys (all optional)::

    paradigm          "parallel" | "sequential"
    t_max             planning iteration cap (3)
    text_top_k        text results kept per sub-query (5)
    text_token_cap    whitespace tokens kept per text result (800)
    image_min         image candidates below which a step is flagged (3)
    image_max         image candidates kept per sub-query (6)
    evidence_budget   token budget of the evidence digest in prompts (4000)
    retrieval_workers concurrent sub-query retrievals (4)
    expert            scripted-expert JSON path, "echo" or "remote"
    generator         same choices; defaults to the expert
    corpus            local corpus directory (simulated search); unset means remote search
    cache_dir         on-disk search cache directory
    cache_capacity    in-memory LRU capacity (1024)
    prompt_dir        directory overriding the bundled prompt templates
    workers           samples processed concurrently (1)

Remote endpoints come from COGPLAN_EXPERT_URL / COGPLAN_EXPERT_KEY /
COGPLAN_EXPERT_MODEL and COGPLAN_SEARCH_URL / COGPLAN_SEARCH_KEY.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from typing import Any

from cogplan.errors import ValidationError
from cogplan.expert.backends import load_backend
from cogplan.expert.prompts import DEFAULT_PROMPTS, PromptSet
from cogplan.planner import Backends, PlannerConfig
from cogplan.retrieval.backends import LocalCorpus, RemoteSearchBackend, SimulatorBackend
from cogplan.retrieval.cache import cached

PLANNER_KEYS = {f.name for f in fields(PlannerConfig)}


@dataclass
class RunConfig:
    planner: PlannerConfig
    expert: str | None = None
    generator: str | None = None
    corpus: str | None = None
    cache_dir: str | None = None
    cache_capacity: int = 1024
    prompt_dir: str | None = None
    workers: int = 1

    def build_backends(self) -> Backends:
        if self.corpus:
            search = SimulatorBackend(LocalCorpus.load(self.corpus))
        else:
            search = RemoteSearchBackend.from_env()
        expert = load_backend(self.expert)
        generator = load_backend(self.generator) if self.generator else None
        prompts = PromptSet(self.prompt_dir) if self.prompt_dir else DEFAULT_PROMPTS
        return Backends(
            expert=expert,
            search=cached(search, capacity=self.cache_capacity, cache_dir=self.cache_dir),
            generator=generator,
            prompts=prompts,
        )


def load_config_file(path: str | os.PathLike | None) -> dict[str, Any]:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ValidationError("config", f"cannot read {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("config", "top level must be an object")
    return data


def make_run_config(file_values: dict[str, Any], overrides: dict[str, Any]) -> RunConfig:
    merged = {**file_values, **{k: v for k, v in overrides.items() if v is not None}}
    known = PLANNER_KEYS | ({f.name for f in fields(RunConfig)} - {"planner"})
    unknown = sorted(set(merged) - known)
    if unknown:
        raise ValidationError("config", f"unknown keys {unknown}")
    try:
        planner = PlannerConfig(**{k: v for k, v in merged.items() if k in PLANNER_KEYS})
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError("config", str(exc)) from exc
    rest = {k: v for k, v in merged.items() if k not in PLANNER_KEYS}
    return RunConfig(planner=planner, **rest)

"""Per-sample scoring of plan traces and the aggregate report."""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from cogplan.core import PlanTrace, RetrievalAction
from cogplan.errors import MetricError, ValidationError
from cogplan.evalkit.claims import ClaimExtractor, Matcher, RuleClaimExtractor, claim_precision_recall, exact_match
from cogplan.evalkit.metrics import bleu, rouge_l, token_f1
from cogplan.harness.dataset import HOP_BUCKETS, BenchSample, hop_bucket

log = logging.getLogger(__name__)

ACTION_KEYS = {
    RetrievalAction.NO_SEARCH: "no",
    RetrievalAction.TEXT_SEARCH: "text",
    RetrievalAction.IMAGE_SEARCH: "image",
}
SCORE_KEYS = ("precision", "recall", "token_f1")


@dataclass
class MetricsConfig:
    extractor: ClaimExtractor = field(default_factory=RuleClaimExtractor)
    matcher: Matcher = exact_match


@dataclass(frozen=True)
class SampleScores:
    sample_id: str
    precision: float
    recall: float
    token_f1: float
    hop_bucket: str
    answer_type: str
    steps: int
    retrieval_steps: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "precision": self.precision,
            "recall": self.recall,
            "token_f1": self.token_f1,
            "hop_bucket": self.hop_bucket,
            "answer_type": self.answer_type,
            "steps": self.steps,
            "retrieval_steps": self.retrieval_steps,
        }


@dataclass
class MetricReport:
    per_sample: list[SampleScores]
    overall: dict[str, float | None]
    buckets: dict[str, dict[str, Any]]
    action_distribution: dict[str, float]
    efficiency: dict[str, float]
    excluded: int
    label: str = ""
    reformulation: dict[str, Any] | None = None

    def to_dict(self) -> dict[str, Any]:
        out = {
            "label": self.label,
            "overall": self.overall,
            "buckets": self.buckets,
            "action_distribution": self.action_distribution,
            "efficiency": self.efficiency,
            "excluded": self.excluded,
            "per_sample": [s.to_dict() for s in self.per_sample],
        }
        if self.reformulation is not None:
            out["reformulation"] = self.reformulation
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    def render(self) -> str:
        return render_report(self.to_dict())


def _mean(values: Sequence[float]) -> float | None:
    return sum(values) / len(values) if values else None


def score_sample(trace: PlanTrace, sample: BenchSample, config: MetricsConfig) -> SampleScores:
    pred = config.extractor.extract(trace.final_answer)
    gold = config.extractor.extract(sample.golden_answer)
    precision, recall = claim_precision_recall(pred, gold, config.matcher)
    return SampleScores(
        sample_id=sample.id,
        precision=precision,
        recall=recall,
        token_f1=token_f1(trace.final_answer, sample.golden_answer),
        hop_bucket=hop_bucket(sample.hop_count),
        answer_type=sample.answer_type.value,
        steps=len(trace.steps),
        retrieval_steps=trace.retrieval_steps,
    )


def action_distribution(traces: Sequence[PlanTrace]) -> dict[str, float]:
    """Share of each action over all recorded steps.

    Traces without steps never searched; when no trace has any step the
    distribution is all ``no``.
    """
    counts = Counter(ACTION_KEYS[a] for t in traces for a in t.actions)
    total = sum(counts.values())
    if total == 0:
        return {"no": 1.0, "text": 0.0, "image": 0.0}
    return {k: counts.get(k, 0) / total for k in ("no", "text", "image")}


def efficiency(traces: Sequence[PlanTrace]) -> dict[str, float]:
    """Mean planning cost per trace; answer generation is not counted."""
    if not traces:
        return {"mean_expert_tokens": 0.0, "mean_latency_ms": 0.0}
    return {
        "mean_expert_tokens": sum(t.expert_tokens for t in traces) / len(traces),
        "mean_latency_ms": sum(t.expert_latency_ms for t in traces) / len(traces),
    }


def _reformulation_scores(traces: Sequence[PlanTrace], index: Mapping[str, BenchSample]) -> dict[str, Any] | None:
    rows = []
    for trace in traces:
        gold = index[trace.sample_id].golden_queries()
        if not gold or not trace.steps:
            continue
        pred = " ".join(trace.steps[-1].decision.query_set)
        ref = " ".join(gold)
        rows.append((bleu(pred, [ref]), rouge_l(pred, ref), token_f1(pred, ref)))
    if not rows:
        return None
    return {
        "n": len(rows),
        "bleu": _mean([r[0] for r in rows]),
        "rouge_l": _mean([r[1] for r in rows]),
        "token_f1": _mean([r[2] for r in rows]),
    }


def build_report(
    traces: Sequence[PlanTrace],
    dataset: Sequence[BenchSample] | Mapping[str, BenchSample],
    config: MetricsConfig | None = None,
    *,
    label: str = "",
) -> MetricReport:
    """Score every trace against its golden answer and aggregate by hop bucket.

    Every trace must name a sample in ``dataset``.  Failed traces, empty
    answers and samples whose metric computation fails are excluded and counted.
    """
    config = config or MetricsConfig()
    index = dataset if isinstance(dataset, Mapping) else {s.id: s for s in dataset}
    unknown = sorted({t.sample_id for t in traces} - set(index))
    if unknown:
        raise ValidationError("sample_id", f"traces reference unknown samples: {', '.join(unknown)}")

    scores: list[SampleScores] = []
    excluded = 0
    for trace in traces:
        if trace.failed or not trace.final_answer.strip():
            excluded += 1
            continue
        try:
            scores.append(score_sample(trace, index[trace.sample_id], config))
        except MetricError as exc:
            log.warning("excluding %s: %s", trace.sample_id, exc)
            excluded += 1

    overall = {k: _mean([getattr(s, k) for s in scores]) for k in SCORE_KEYS}
    buckets: dict[str, dict[str, Any]] = {}
    for bucket in HOP_BUCKETS:
        members = [s for s in scores if s.hop_bucket == bucket]
        entry: dict[str, Any] = {k: _mean([getattr(s, k) for s in members]) for k in SCORE_KEYS}
        entry["n"] = len(members)
        entry["weight"] = len(members) / len(scores) if scores else 0.0
        entry["mean_chain_length"] = _mean([s.retrieval_steps for s in members])
        buckets[bucket] = entry

    return MetricReport(
        per_sample=scores,
        overall=overall,
        buckets=buckets,
        action_distribution=action_distribution(traces),
        efficiency=efficiency(traces),
        excluded=excluded,
        label=label,
        reformulation=_reformulation_scores(traces, index),
    )


def _fmt(value: Any) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return f"{value:.4f}"


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)


def render_report(report: Mapping[str, Any]) -> str:
    header = ["Bucket", "n", "Precision", "Recall", "Token-F1", "Chain"]
    rows = []
    for bucket in HOP_BUCKETS:
        b = report["buckets"][bucket]
        rows.append([bucket, str(b["n"]), _fmt(b["precision"]), _fmt(b["recall"]), _fmt(b["token_f1"]),
                     _fmt(b.get("mean_chain_length"))])
    o = report["overall"]
    rows.append(["Overall", str(sum(report["buckets"][b]["n"] for b in HOP_BUCKETS)),
                 _fmt(o["precision"]), _fmt(o["recall"]), _fmt(o["token_f1"]), "-"])
    ad = report["action_distribution"]
    eff = report["efficiency"]
    parts = [
        _table(header, rows),
        "",
        _table(["# No", "# Text", "# Image"], [[f"{ad['no']:.2%}", f"{ad['text']:.2%}", f"{ad['image']:.2%}"]]),
        "",
        f"mean expert tokens: {eff['mean_expert_tokens']:.1f}   mean latency (ms): {eff['mean_latency_ms']:.1f}"
        f"   excluded: {report['excluded']}",
    ]
    return "\n".join(parts)


def compare_reports(reports: Sequence[Mapping[str, Any]], labels: Sequence[str] | None = None) -> str:
    """Side-by-side precision / recall / token-F1 per hop bucket, one row per report."""
    labels = list(labels) if labels else [r.get("label") or f"run{i}" for i, r in enumerate(reports)]
    header = ["Method"]
    for group in HOP_BUCKETS + ("Overall",):
        header += [f"{group} P", f"{group} R", f"{group} F1"]
    header += ["# No", "# Text", "# Image"]
    rows = []
    for label, rep in zip(labels, reports):
        row = [label]
        for bucket in HOP_BUCKETS:
            b = rep["buckets"][bucket]
            row += [_fmt(b["precision"]), _fmt(b["recall"]), _fmt(b["token_f1"])]
        o = rep["overall"]
        row += [_fmt(o["precision"]), _fmt(o["recall"]), _fmt(o["token_f1"])]
        ad = rep.get("action_distribution") or {}
        row += [f"{ad[k]:.2%}" if k in ad else "-" for k in ("no", "text", "image")]
        rows.append(row)
    return _table(header, rows)

from __future__ import annotations

import json

import pytest

from cogplan.core import MultimodalQuery, PlanDecision, PlanStep, PlanTrace, QuerySet, RetrievalAction, Termination
from cogplan.errors import MetricError, ValidationError
from cogplan.evalkit import MetricsConfig, action_distribution, build_report, compare_reports, render_report
from cogplan.evalkit.claims import RuleClaimExtractor
from cogplan.harness.dataset import AnswerType, BenchSample

TS, IS, NS = RetrievalAction.TEXT_SEARCH, RetrievalAction.IMAGE_SEARCH, RetrievalAction.NO_SEARCH


def sample(i, hops=1, answer="Team Asobi made Astro Bot.", trace=None):
    return BenchSample(f"s{i}", MultimodalQuery("q", id=f"s{i}"), hops, AnswerType.CLOSE, "games", answer, trace)


def step(action, queries=("q",), tokens=10, latency=5.0):
    return PlanStep(PlanDecision(action, QuerySet.of(*queries)), (), expert_latency_ms=latency, expert_tokens=tokens)


def trace(i, answer="Team Asobi made Astro Bot.", actions=(NS,), **kw):
    return PlanTrace(f"s{i}", tuple(step(a) for a in actions), answer, Termination.NO_SEARCH, **kw)


def test_action_distribution():
    traces = [trace(0, actions=(TS, TS)), trace(1, actions=(IS, NS))]
    assert action_distribution(traces) == {"no": 0.25, "text": 0.5, "image": 0.25}


def test_action_distribution_without_steps():
    assert action_distribution([trace(0, actions=())]) == {"no": 1.0, "text": 0.0, "image": 0.0}


def test_hop_weights_and_perfect_scores():
    hops = [1] * 2 + [2] * 3 + [3, 4, 5, 6, 7]
    samples = [sample(i, h) for i, h in enumerate(hops)]
    report = build_report([trace(i) for i in range(10)], samples)
    weights = {b: report.buckets[b]["weight"] for b in report.buckets}
    assert weights == pytest.approx({"1-hop": 0.2, "2-hop": 0.3, ">2-hop": 0.5})
    assert [report.buckets[b]["n"] for b in ("1-hop", "2-hop", ">2-hop")] == [2, 3, 5]
    assert report.overall == {"precision": 1.0, "recall": 1.0, "token_f1": 1.0}
    assert report.excluded == 0


def test_chain_length_and_efficiency():
    samples = [sample(0, 1), sample(1, 3)]
    traces = [trace(0, actions=(TS, NS)), trace(1, actions=(IS, TS, TS))]
    report = build_report(traces, samples)
    assert report.buckets["1-hop"]["mean_chain_length"] == 1
    assert report.buckets[">2-hop"]["mean_chain_length"] == 3
    assert report.efficiency == {"mean_expert_tokens": 25.0, "mean_latency_ms": 12.5}


def test_unknown_sample_ids():
    with pytest.raises(ValidationError, match="s7"):
        build_report([trace(7)], [sample(0)])


def test_failed_and_empty_excluded():
    samples = [sample(0), sample(1), sample(2)]
    traces = [trace(0), trace(1, answer="", failed=True, error="down"), trace(2, answer="  ")]
    report = build_report(traces, samples)
    assert report.excluded == 2 and len(report.per_sample) == 1


def test_metric_failure_excluded():
    class Broken(RuleClaimExtractor):
        def extract(self, answer):
            if "boom" in answer:
                raise MetricError("judge unavailable")
            return super().extract(answer)

    report = build_report([trace(0), trace(1, answer="boom")], [sample(0), sample(1)], MetricsConfig(extractor=Broken()))
    assert report.excluded == 1


def test_partial_answer_scores():
    s = sample(0, answer="Astro Bot sold 1.5 million copies. Wukong sold 20 million copies.")
    report = build_report([trace(0, answer="Astro Bot sold 1.5 million copies. It was a hit.")], [s])
    assert report.overall["precision"] == 0.5 and report.overall["recall"] == 0.5


def test_reformulation_scores():
    gold = {"steps": [{"action": "TEXT_SEARCH", "queries": ["Who made Astro Bot?"]}]}
    t = PlanTrace("s0", (step(TS, ("Who made Astro Bot?",)), step(NS, ("Who made Astro Bot?",))), "x",
                  Termination.NO_SEARCH)
    report = build_report([t], [sample(0, trace=gold)])
    assert report.reformulation == {"n": 1, "bleu": 1.0, "rouge_l": 1.0, "token_f1": 1.0}
    assert build_report([trace(0)], [sample(0)]).reformulation is None


def test_serialization_and_rendering():
    report = build_report([trace(0, actions=(TS, NS))], [sample(0)], label="demo")
    data = json.loads(report.to_json())
    assert set(data) >= {"overall", "buckets", "action_distribution", "efficiency", "excluded", "per_sample"}
    text = render_report(data)
    assert "1-hop" in text and "# Text" in text
    table = compare_reports([data, data], ["A", "B"])
    lines = table.splitlines()
    assert lines[0].startswith("Method") and "Overall F1" in lines[0] and "# Image" in lines[0]
    assert lines[2].startswith("A") and lines[3].startswith("B")

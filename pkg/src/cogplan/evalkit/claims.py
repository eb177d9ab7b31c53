"""Claim extraction and claim-level precision/recall."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

from cogplan.errors import BackendError, MetricError, ParseError, ValidationError
from cogplan.expert.backends import ExpertBackend, ExpertRequest
from cogplan.expert.parsing import parse_query_list
from cogplan.expert.prompts import DEFAULT_PROMPTS, PromptSet

_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")
_TERMINAL_PUNCT = re.compile(r"[\s.!?;:,]+$")


def normalize_claim(text: str) -> str:
    return _TERMINAL_PUNCT.sub("", " ".join(text.lower().split()))


@dataclass(frozen=True)
class Claim:
    text: str

    def __post_init__(self) -> None:
        normalized = normalize_claim(self.text)
        if not normalized:
            raise ValidationError("claim", "empty claim")
        object.__setattr__(self, "text", normalized)


Matcher = Callable[[Claim, Claim], bool]


class ClaimExtractor(Protocol):
    def extract(self, answer: str) -> list[Claim]: ...


class RuleClaimExtractor:
    """One claim per sentence; sentences end at ``.``, ``!`` or ``?`` followed by whitespace."""

    def extract(self, answer: str) -> list[Claim]:
        return [Claim(s) for s in _SENTENCE_END.split(answer.strip()) if normalize_claim(s)]


class ExpertClaimExtractor:
    def __init__(self, backend: ExpertBackend, prompts: PromptSet = DEFAULT_PROMPTS):
        self.backend = backend
        self.prompts = prompts

    def extract(self, answer: str) -> list[Claim]:
        if not answer.strip():
            return []
        system, user = self.prompts.get("claims").render(answer=answer)
        try:
            reply = self.backend.complete(ExpertRequest(system, user, meta={"role": "claims"}))
            return [Claim(c) for c in parse_query_list(reply.text) if normalize_claim(c)]
        except (BackendError, ParseError) as exc:
            raise MetricError(f"claim extraction failed: {exc}") from exc


def exact_match(pred: Claim, gold: Claim) -> bool:
    return pred.text == gold.text


class ExpertEntailmentMatcher:
    """Asks the expert whether two claims state the same fact (YES/NO)."""

    def __init__(self, backend: ExpertBackend, prompts: PromptSet = DEFAULT_PROMPTS):
        self.backend = backend
        self.prompts = prompts

    def __call__(self, pred: Claim, gold: Claim) -> bool:
        if pred.text == gold.text:
            return True
        system, user = self.prompts.get("entail").render(premise=pred.text, hypothesis=gold.text)
        try:
            reply = self.backend.complete(ExpertRequest(system, user, max_output_tokens=8, meta={"role": "entail"}))
        except BackendError as exc:
            raise MetricError(f"entailment check failed: {exc}") from exc
        verdict = reply.text.strip().upper()
        if verdict.startswith("YES"):
            return True
        if verdict.startswith("NO"):
            return False
        raise MetricError(f"unreadable entailment verdict {reply.text!r}")


def claim_precision_recall(
    pred_claims: Sequence[Claim], gold_claims: Sequence[Claim], matcher: Matcher = exact_match
) -> tuple[float, float]:
    """Fraction of predicted claims supported by gold, and of gold claims covered.

    Degenerate inputs: both empty gives (1, 1); an empty side scores 0 on
    the ratio it cannot support.
    """
    if not pred_claims and not gold_claims:
        return 1.0, 1.0
    if not pred_claims or not gold_claims:
        return 0.0, 0.0
    matched_pred = sum(1 for p in pred_claims if any(matcher(p, g) for g in gold_claims))
    matched_gold = sum(1 for g in gold_claims if any(matcher(p, g) for p in pred_claims))
    return matched_pred / len(pred_claims), matched_gold / len(gold_claims)

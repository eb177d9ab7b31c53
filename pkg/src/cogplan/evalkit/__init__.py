"""Answer metrics and evaluation reports."""

from cogplan.evalkit.claims import (
    Claim,
    ClaimExtractor,
    ExpertClaimExtractor,
    ExpertEntailmentMatcher,
    RuleClaimExtractor,
    claim_precision_recall,
    exact_match,
    normalize_claim,
)
from cogplan.evalkit.metrics import bleu, lcs_length, rouge_l, token_f1, tokenize
from cogplan.evalkit.report import (
    MetricReport,
    MetricsConfig,
    action_distribution,
    build_report,
    compare_reports,
    render_report,
)

__all__ = [
    "Claim",
    "ClaimExtractor",
    "ExpertClaimExtractor",
    "ExpertEntailmentMatcher",
    "MetricReport",
    "MetricsConfig",
    "RuleClaimExtractor",
    "action_distribution",
    "bleu",
    "build_report",
    "claim_precision_recall",
    "compare_reports",
    "exact_match",
    "lcs_length",
    "normalize_claim",
    "render_report",
    "rouge_l",
    "token_f1",
    "tokenize",
]

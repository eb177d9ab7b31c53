"""Answer-level text metrics: token F1, BLEU and ROUGE-L.

All three share one tokenizer: lowercase, split at whitespace and
punctuation, drop empty pieces.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

from cogplan.text import word_tokens

tokenize = word_tokens


def _f_measure(overlap: int, n_pred: int, n_gold: int) -> float:
    if n_pred == 0 and n_gold == 0:
        return 1.0
    if n_pred == 0 or n_gold == 0 or overlap == 0:
        return 0.0
    p = overlap / n_pred
    r = overlap / n_gold
    return 2 * p * r / (p + r)


def token_f1(prediction: str, gold: str) -> float:
    pred = tokenize(prediction)
    ref = tokenize(gold)
    overlap = sum((Counter(pred) & Counter(ref)).values())
    return _f_measure(overlap, len(pred), len(ref))


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(prediction: str, references: Sequence[str], max_n: int = 4) -> float:
    """Sentence BLEU with add-one smoothing on zero-match orders.

    The order is capped at the prediction length.  The brevity penalty uses
    the reference length closest to the prediction (shorter wins ties).
    """
    if not references:
        raise ValueError("bleu needs at least one reference")
    pred = tokenize(prediction)
    refs = [tokenize(r) for r in references]
    c = len(pred)
    if c == 0:
        return 0.0
    order = min(max_n, c)
    log_sum = 0.0
    for n in range(1, order + 1):
        counts = _ngrams(pred, n)
        max_ref: Counter = Counter()
        for ref in refs:
            max_ref |= _ngrams(ref, n)
        clipped = sum(min(cnt, max_ref[g]) for g, cnt in counts.items())
        total = c - n + 1
        p_n = clipped / total if clipped > 0 else 1.0 / (total + 1)
        log_sum += math.log(p_n)
    r = min((len(ref) for ref in refs), key=lambda length: (abs(length - c), length))
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum / order)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(prediction: str, reference: str) -> float:
    pred = tokenize(prediction)
    ref = tokenize(reference)
    return _f_measure(lcs_length(pred, ref), len(pred), len(ref))

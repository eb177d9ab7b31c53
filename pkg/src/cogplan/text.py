"""Word tokenization shared by the search simulator and the metrics."""

from __future__ import annotations

import re

_WORD = re.compile(r"[^\W_]+")


def word_tokens(text: str) -> list[str]:
    """Lowercased runs of letters/digits; whitespace, punctuation and symbols separate tokens."""
    return _WORD.findall(text.lower())


def normalize_query(text: str) -> str:
    """Lowercase, trim and collapse inner whitespace."""
    return " ".join(text.lower().split())

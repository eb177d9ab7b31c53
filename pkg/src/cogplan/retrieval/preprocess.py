"""Raw web content to plain text."""

from __future__ import annotations

import html
import re

_DROP_BLOCKS = re.compile(r"<(script|style|noscript)\b[^>]*>.*?</\1\s*>", re.IGNORECASE | re.DOTALL)
_COMMENT = re.compile(r"<!--.*?-->", re.DOTALL)
_INLINE_TAG = re.compile(
    r"</?(?:a|abbr|b|code|em|i|mark|small|span|strong|sub|sup|u)(?:\s[^<>]*)?/?>", re.IGNORECASE
)
_TAG = re.compile(r"</?[A-Za-z!?][^<>]*>")


def _once(text: str) -> str:
    text = _COMMENT.sub(" ", text)
    text = _DROP_BLOCKS.sub(" ", text)
    text = _INLINE_TAG.sub("", text)
    text = _TAG.sub(" ", text)
    text = html.unescape(text)
    return " ".join(text.split())


def preprocess_content(raw: str) -> str:
    """Strip markup and entities, then collapse every whitespace run to one space.

    Applied to a fixpoint, so entity-escaped markup is removed as well and the
    function is idempotent.
    """
    text = raw
    while True:
        cleaned = _once(text)
        if cleaned == text:
            return cleaned
        text = cleaned

"""Structured-output grammar for expert replies.

Action replies carry one of ``TEXT_SEARCH``, ``IMAGE_SEARCH`` or ``NO_SEARCH``
(any case, ``-`` accepted for ``_``), optionally as ``Action: <label>`` or a
JSON ``{"action": ...}`` block.  Query-set replies are a numbered or bulleted
list, preferably inside a ``` fence.  Anything after the list is ignored.
"""

from __future__ import annotations

import json
import re
from typing import Literal

from cogplan.core import RetrievalAction
from cogplan.errors import ParseError

Expected = Literal["action", "query-set", "answer"]

_LABEL = r"(text[_-]search|image[_-]search|no[_-]search)"
_KEYED_ACTION = re.compile(r"action\W{0,3}\s*[:=]\s*[\"']?" + _LABEL + r"\b", re.IGNORECASE)
_BARE_ACTION = re.compile(r"(?<![A-Za-z0-9])" + _LABEL + r"(?![A-Za-z0-9])", re.IGNORECASE)
_FENCE = re.compile(r"```[^\n]*\n(.*?)(?:```|\Z)", re.DOTALL)
_ITEM = re.compile(r"^\s*(?:\d{1,2}[.)]|[-*•])\s+(.*\S)\s*$")
_ANSWER_LABEL = re.compile(r"^\s*(?:final\s+)?answer\s*:\s*", re.IGNORECASE)


def _label_to_action(label: str) -> RetrievalAction:
    return RetrievalAction(label.upper().replace("-", "_"))


def parse_action(raw: str) -> RetrievalAction:
    m = _KEYED_ACTION.search(raw) or _BARE_ACTION.search(raw)
    if m is None:
        raise ParseError("no retrieval action label found")
    return _label_to_action(m.group(1))


def _json_list(block: str) -> list[str] | None:
    try:
        value = json.loads(block)
    except ValueError:
        return None
    if isinstance(value, dict):
        value = value.get("queries")
    if isinstance(value, list) and all(isinstance(v, str) for v in value):
        return value
    return None


def parse_query_list(raw: str) -> list[str]:
    fence = _FENCE.search(raw)
    body = fence.group(1) if fence else raw
    as_json = _json_list(body.strip())
    if as_json is not None:
        items = [q.strip() for q in as_json if q.strip()]
    else:
        items = []
        for line in body.splitlines():
            m = _ITEM.match(line)
            if m:
                items.append(m.group(1).strip())
            elif items and line.strip():
                break
    if not items:
        raise ParseError("no query list found")
    return items


def parse_answer(raw: str) -> str:
    text = _ANSWER_LABEL.sub("", raw.strip(), count=1).strip()
    if not text:
        raise ParseError("empty answer")
    return text


def parse_expert_output(raw: str, expected: Expected):
    """Parse ``raw`` as an action, a query list or an answer.

    Raises :class:`ParseError` when nothing recognizable is present.
    """
    if not isinstance(raw, str):
        raise ParseError(f"expected text, got {type(raw).__name__}")
    if expected == "action":
        return parse_action(raw)
    if expected == "query-set":
        return parse_query_list(raw)
    if expected == "answer":
        return parse_answer(raw)
    raise ValueError(f"unknown expected kind {expected!r}")

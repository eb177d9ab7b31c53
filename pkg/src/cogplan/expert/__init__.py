"""The planning expert: backends, prompts, output grammar and decision operations."""

from cogplan.expert.backends import (
    EchoExpert,
    ExpertBackend,
    ExpertRequest,
    ExpertResponse,
    RecordingExpert,
    RemoteChatExpert,
    ScriptedExpert,
    load_backend,
    script_from_trace,
)
from cogplan.expert.ops import (
    ExpertResult,
    available_actions,
    coerce_action,
    image_for_search,
    reformulate,
    render_evidence_digest,
    select_action,
)
from cogplan.expert.parsing import parse_expert_output
from cogplan.expert.prompts import PromptSet

__all__ = [
    "EchoExpert",
    "ExpertBackend",
    "ExpertRequest",
    "ExpertResponse",
    "ExpertResult",
    "PromptSet",
    "RecordingExpert",
    "RemoteChatExpert",
    "ScriptedExpert",
    "available_actions",
    "coerce_action",
    "image_for_search",
    "load_backend",
    "parse_expert_output",
    "reformulate",
    "render_evidence_digest",
    "script_from_trace",
    "select_action",
]

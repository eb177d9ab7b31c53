"""Expert backends: remote chat-completion client, scripted replay, echo."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Protocol, runtime_checkable

import httpx

from cogplan.core import ImageRef, PlanTrace, count_tokens
from cogplan.errors import BackendError, ValidationError

log = logging.getLogger(__name__)

MAX_IMAGES = 8


@dataclass(frozen=True)
class ExpertRequest:
    """One chat call.

    ``meta`` carries routing hints (role, iteration, sample id, queries) that
    scripted backends key on; remote backends ignore it.
    """

    system_prompt: str
    user_text: str
    images: tuple[ImageRef, ...] = ()
    max_output_tokens: int = 512
    meta: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.user_text.strip():
            raise ValidationError("user_text", "empty prompt")
        if len(self.images) > MAX_IMAGES:
            raise ValidationError("images", f"at most {MAX_IMAGES} images per request")
        if self.max_output_tokens <= 0:
            raise ValidationError("max_output_tokens", "must be positive")

    @property
    def role(self) -> str | None:
        return self.meta.get("role")


@dataclass(frozen=True)
class ExpertResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: float = 0.0

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@runtime_checkable
class ExpertBackend(Protocol):
    def complete(self, request: ExpertRequest) -> ExpertResponse: ...


def _format_queries(queries: list[str]) -> str:
    lines = "\n".join(f"{i}. {q}" for i, q in enumerate(queries, 1))
    return f"```\n{lines}\n```"


class ScriptedExpert:
    """Replays a fixed decision script.

    Script layout (JSON)::

        {"steps": [{"iteration": 0, "reformulation": [...], "action": "IMAGE_SEARCH"}],
         "answer": "..."}

    A multi-sample script wraps per-sample scripts as
    ``{"samples": {"<id>": {...}}, "default": {...}}``.  Replies are keyed on
    ``(sample_id, iteration, role)`` taken from ``request.meta``, never on
    call order, so concurrent calls get stable answers.  A missing step means
    identity reformulation and ``NO_SEARCH``.  An optional
    ``closed_book_answer`` is given instead of ``answer`` when the generator
    sees no evidence.
    """

    def __init__(self, script: Mapping[str, Any], default_answer: str = "unknown"):
        if "samples" in script:
            self._samples = {str(k): v for k, v in script["samples"].items()}
            self._default = script.get("default", {})
        else:
            self._samples = {}
            self._default = script
        self.default_answer = default_answer

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> ScriptedExpert:
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    @classmethod
    def from_traces(cls, traces: list[PlanTrace]) -> ScriptedExpert:
        """Script that replays the decisions recorded in ``traces``."""
        return cls({"samples": {t.sample_id: script_from_trace(t) for t in traces}})

    def script_for(self, sample_id: str | None) -> Mapping[str, Any]:
        if sample_id is not None and sample_id in self._samples:
            return self._samples[sample_id]
        return self._default

    def _step(self, script: Mapping[str, Any], iteration: int) -> Mapping[str, Any]:
        for step in script.get("steps", ()):
            if int(step.get("iteration", -1)) == iteration:
                return step
        return {}

    def reply_text(self, request: ExpertRequest) -> tuple[str, float]:
        meta = request.meta
        script = self.script_for(meta.get("sample_id"))
        role = meta.get("role")
        if role == "answer":
            if not meta.get("evidence_count") and "closed_book_answer" in script:
                return str(script["closed_book_answer"]), 0.0
            return str(script.get("answer", self.default_answer)), 0.0
        step = self._step(script, int(meta.get("iteration", 0)))
        if role == "reformulate":
            queries = step.get("reformulation") or list(meta.get("queries", ()))
            return _format_queries(list(queries)), float(step.get("latency_ms", 0.0))
        if role == "action":
            action = step.get("action", "NO_SEARCH")
            return f"Action: {action}", float(step.get("action_latency_ms", 0.0))
        raise BackendError(f"scripted expert has no reply for role {role!r}")

    def complete(self, request: ExpertRequest) -> ExpertResponse:
        text, latency = self.reply_text(request)
        return ExpertResponse(
            text=text,
            prompt_tokens=count_tokens(request.system_prompt) + count_tokens(request.user_text),
            completion_tokens=count_tokens(text),
            latency_ms=latency,
        )


def script_from_trace(trace: PlanTrace) -> dict[str, Any]:
    return {
        "steps": [
            {
                "iteration": i,
                "reformulation": list(step.decision.query_set),
                "action": step.decision.action.value,
                "latency_ms": step.expert_latency_ms,
            }
            for i, step in enumerate(trace.steps)
        ],
        "answer": trace.final_answer,
    }


class EchoExpert:
    """Returns the user prompt verbatim; useful for exercising metric plumbing."""

    def complete(self, request: ExpertRequest) -> ExpertResponse:
        n = count_tokens(request.user_text)
        return ExpertResponse(request.user_text, prompt_tokens=n, completion_tokens=n)


class RecordingExpert:
    """Wraps a backend and keeps every request it forwards."""

    def __init__(self, inner: ExpertBackend):
        self.inner = inner
        self.requests: list[ExpertRequest] = []
        self._lock = threading.Lock()

    def complete(self, request: ExpertRequest) -> ExpertResponse:
        with self._lock:
            self.requests.append(request)
        return self.inner.complete(request)

    def by_role(self, role: str) -> list[ExpertRequest]:
        return [r for r in self.requests if r.role == role]


class RemoteChatExpert:
    """OpenAI-compatible ``/chat/completions`` client with bounded retries."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        *,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff_s: float = 1.0,
        temperature: float = 0.0,
        client: httpx.Client | None = None,
    ):
        if not base_url:
            raise ValidationError("base_url", "expert endpoint not configured")
        if not model:
            raise ValidationError("model", "expert model not configured")
        self.url = base_url.rstrip("/")
        if not self.url.endswith("/chat/completions"):
            self.url += "/chat/completions"
        self.model = model
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self.temperature = temperature
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=timeout)
        self._headers = headers

    @classmethod
    def from_env(cls, **kwargs: Any) -> RemoteChatExpert:
        return cls(
            os.getenv("COGPLAN_EXPERT_URL", ""),
            os.getenv("COGPLAN_EXPERT_MODEL", ""),
            os.getenv("COGPLAN_EXPERT_KEY") or None,
            **kwargs,
        )

    def build_payload(self, request: ExpertRequest) -> dict[str, Any]:
        content: list[dict[str, Any]] = [{"type": "text", "text": request.user_text}]
        for image in request.images:
            content.append({"type": "image_url", "image_url": {"url": image.as_data_uri()}})
        messages = []
        if request.system_prompt:
            messages.append({"role": "system", "content": request.system_prompt})
        messages.append({"role": "user", "content": content})
        return {
            "model": self.model,
            "messages": messages,
            "max_tokens": request.max_output_tokens,
            "temperature": self.temperature,
        }

    def complete(self, request: ExpertRequest) -> ExpertResponse:
        payload = self.build_payload(request)
        last_err: Exception | None = None
        for attempt in range(self.max_retries):
            start = time.perf_counter()
            try:
                resp = self._client.post(self.url, json=payload, headers=self._headers)
                if resp.status_code == 429 or resp.status_code >= 500:
                    raise BackendError(f"HTTP {resp.status_code}")
                resp.raise_for_status()
                data = resp.json()
                text = data["choices"][0]["message"]["content"] or ""
                usage = data.get("usage") or {}
                latency = (time.perf_counter() - start) * 1000.0
                return ExpertResponse(
                    text=text,
                    prompt_tokens=int(usage.get("prompt_tokens", 0)),
                    completion_tokens=int(usage.get("completion_tokens", 0)),
                    latency_ms=latency,
                )
            except httpx.HTTPStatusError as exc:
                raise BackendError(f"expert request rejected: {exc}") from exc
            except (httpx.TransportError, BackendError, KeyError, IndexError, ValueError) as exc:
                last_err = exc
                log.warning("expert call attempt %d/%d failed: %r", attempt + 1, self.max_retries, exc)
                if attempt + 1 < self.max_retries:
                    time.sleep(self.backoff_s * (attempt + 1))
        raise BackendError(f"expert backend failed after {self.max_retries} attempts: {last_err}")


def load_backend(choice: str | None) -> ExpertBackend:
    """Resolve a CLI/config backend choice: a script path, ``echo`` or ``remote``."""
    if choice in (None, "", "remote"):
        return RemoteChatExpert.from_env()
    if choice == "echo":
        return EchoExpert()
    path = Path(choice)
    if not path.is_file():
        raise ValidationError("expert_script", f"no such script {choice!r}")
    return ScriptedExpert.from_file(path)

"""Versioned prompt templates, shipped as package data and overridable per directory."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

ROLES = ("reformulate", "action", "generate", "claims", "entail")


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    version: str
    system: str
    user: str

    @classmethod
    def parse(cls, name: str, text: str) -> PromptTemplate:
        version = "0"
        lines = text.splitlines()
        if lines and lines[0].startswith("# version:"):
            version = lines[0].split(":", 1)[1].strip()
            lines = lines[1:]
        body = "\n".join(lines)
        if "\n---\n" not in body:
            raise ValueError(f"prompt {name!r} lacks the '---' system/user separator")
        system, user = body.split("\n---\n", 1)
        return cls(name, version, system.strip(), user.strip())

    def render(self, **values: object) -> tuple[str, str]:
        return self.system.format(**values), self.user.format(**values)


class PromptSet:
    """Loads each role's template, preferring files in ``override_dir``."""

    def __init__(self, override_dir: str | Path | None = None):
        self.override_dir = Path(override_dir) if override_dir else None
        self._cache: dict[str, PromptTemplate] = {}

    def get(self, role: str) -> PromptTemplate:
        if role not in self._cache:
            self._cache[role] = PromptTemplate.parse(role, self._read(role))
        return self._cache[role]

    def _read(self, role: str) -> str:
        if role not in ROLES:
            raise KeyError(role)
        if self.override_dir is not None:
            candidate = self.override_dir / f"{role}.txt"
            if candidate.is_file():
                return candidate.read_text(encoding="utf-8")
        return resources.files("cogplan.expert").joinpath("prompts", f"{role}.txt").read_text(
            encoding="utf-8"
        )


DEFAULT_PROMPTS = PromptSet()

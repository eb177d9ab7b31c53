"""Exception hierarchy shared by every cogplan module."""

from __future__ import annotations


class CogplanError(Exception):
    """Base class for all errors raised by cogplan."""


class ValidationError(CogplanError, ValueError):
    """Input failed a type invariant. ``field`` names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ContractError(CogplanError):
    """An operation was called outside its precondition."""


class IterationCapError(ContractError):
    """Applying a decision would push the plan past ``t_max``."""


class ParseError(CogplanError):
    """Expert output did not match the structured-output grammar."""


class BackendError(CogplanError):
    """A remote or scripted backend failed to produce a response."""


class RetrievalError(BackendError):
    """A search backend failed for one query."""


class GenerationError(BackendError):
    """The generator failed to produce an answer after retrying."""


class MetricError(CogplanError):
    """A metric could not be computed for one sample."""

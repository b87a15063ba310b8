"""Exception hierarchy."""

from __future__ import annotations


class StartrackError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(StartrackError, ValueError):
    """An input violates a documented precondition or invariant."""


class SnapshotFormatError(StartrackError):
    """A snapshot file is missing or cannot be parsed."""

    def __init__(self, message: str, field: str | None = None) -> None:
        super().__init__(message)
        self.field = field


class SnapshotIntegrityError(StartrackError):
    """Snapshot files parse but disagree with each other."""


class NotFoundError(StartrackError):
    """The remote service reports that a resource does not exist."""


class TransportError(StartrackError):
    """A request failed permanently (after retries)."""

    def __init__(self, message: str, status: int | None = None) -> None:
        super().__init__(message)
        self.status = status


class UndefinedCorrelationError(StartrackError, ValueError):
    """A rank vector has zero variance, so the coefficient is undefined."""


class MappingParseError(ValidationError):
    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line

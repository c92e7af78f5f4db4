"""Exception types shared across the toolkit."""

from __future__ import annotations


class CablewatchError(Exception):
    """Base class for all toolkit errors."""


class SequenceError(CablewatchError):
    """A frame source is missing, inconsistent, or truncated."""


class ConfigError(CablewatchError):
    """A detector or ROI configuration violates its invariants.

    ``field_errors`` maps field names to human-readable messages so callers
    (CLI, HTTP gateway) can report every offending field at once.
    """

    def __init__(self, message: str, field_errors: dict[str, str] | None = None):
        super().__init__(message)
        self.field_errors = dict(field_errors or {})

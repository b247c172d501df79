"""Shared error types with machine-readable codes.

Every failure surfaced through the HTTP API or CLI maps to exactly one code;
violations found by validation are data (ValidationReport), not exceptions.
"""

from __future__ import annotations


class SnapError(Exception):
    """Base class for engine errors."""

    code = "ERROR"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code

    @property
    def message(self) -> str:
        return str(self)


class UnknownIdError(SnapError):
    """A referenced entity (channel, snapshot, panel, ...) does not exist."""

    code = "UNKNOWN_ID"


class DataError(SnapError):
    """Bad tabular data or an unsatisfiable query against it."""

    code = "DATA_ERROR"


class TemplateError(SnapError):
    """Template inapplicable or misconfigured."""

    code = "TEMPLATE_ERROR"


class LifecycleError(SnapError):
    """Snapshot creation/update precondition failed."""

    code = "LIFECYCLE_ERROR"


class ConflictError(SnapError):
    """State conflict, e.g. updating past the recurrence horizon."""

    code = "CONFLICT"


class StoreError(SnapError):
    """Persistence failure: corrupt file or version mismatch."""

    code = "STORE_ERROR"

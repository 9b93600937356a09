"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
1 for I/O, 2 for validation, 3 for model-domain failures.
"""

from __future__ import annotations

from typing import Any, Optional


class MigrationError(ValueError):
    """Base class for all errors raised by livemig."""

    exit_code = 3

    @property
    def code(self) -> str:
        return type(self).__name__

    def details(self) -> dict[str, Any]:
        """Machine-readable description, used for the CLI error object."""
        out: dict[str, Any] = {"error": self.code, "message": str(self)}
        container_id = getattr(self, "container_id", None)
        if container_id is not None:
            out["container_id"] = container_id
        return out


class ValidationError(MigrationError):
    exit_code = 2


class NonPositiveMemory(ValidationError):
    pass


class NonPositiveRate(ValidationError):
    pass


class InvalidParameter(ValidationError):
    """Negative or non-finite values, or a malformed parameter mode."""


class EmptyTrace(ValidationError):
    pass


class EmptySeries(ValidationError):
    pass


class InvalidSpec(ValidationError):
    pass


class ZeroContainers(ValidationError):
    pass


class LambdaNotLessThanOne(MigrationError):
    """Dirtying/transfer ratio reached 1, so the iterative copy cannot converge."""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step

    def details(self) -> dict[str, Any]:
        out = super().details()
        if self.step is not None:
            out["step"] = self.step
        return out


class TraceTooShort(MigrationError):
    pass


class SchemaViolation(ValidationError):
    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message)
        self.field = field
        self.line = line

    def details(self) -> dict[str, Any]:
        out = super().details()
        if self.field is not None:
            out["field"] = self.field
        if self.line is not None:
            out["line"] = self.line
        return out


class ValidationFailed(ValidationError):
    """A manifest container failed profile validation."""

    def __init__(self, container_id: str, cause: MigrationError):
        super().__init__(f"container {container_id!r}: {cause}")
        self.container_id = container_id
        self.cause = cause

    def details(self) -> dict[str, Any]:
        out = super().details()
        out["cause"] = self.cause.details()
        return out

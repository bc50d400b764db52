"""Exception types shared across the package."""

from __future__ import annotations


class BodySchemaError(Exception):
    """Base class for all package errors."""


class SchemaError(BodySchemaError):
    """A JSON document does not match the expected file schema."""


class NotATreeError(BodySchemaError):
    """A labelled binary matrix has no corresponding out-tree.

    Carries the condition report describing which validity conditions failed.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NotCompletableError(BodySchemaError):
    """A partial matrix cannot be filled to a valid full matrix."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DegenerateSensorError(BodySchemaError):
    """A sensor produced no observable movement (all-zero dependency signal)."""


class TrainingDivergedError(BodySchemaError):
    """Training produced a non-finite loss."""

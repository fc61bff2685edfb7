"""Exception types shared across the package."""

from __future__ import annotations


class ScoreAgentsError(Exception):
    """Base class for all package-specific errors."""


class ParseError(ScoreAgentsError):
    """Malformed input file. Carries a location when one is known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}" + (f", col {column}" if column is not None else "")
            message = f"{message} ({where})"
        super().__init__(message)


class UnsupportedFormatError(ScoreAgentsError):
    """Input bytes are not one of the supported score formats."""


class EmptyInputError(ScoreAgentsError):
    """An analysis was asked for on a score with nothing to analyze."""


class SchemaError(ScoreAgentsError):
    """A structured document violates its schema. ``field_path`` names the offender."""

    def __init__(self, message: str, field_path: str = ""):
        self.field_path = field_path
        if field_path:
            message = f"{message} (at {field_path})"
        super().__init__(message)


class PlanError(ScoreAgentsError):
    """The agent dependency configuration cannot be ordered."""


class AnalysisError(ScoreAgentsError):
    """Every agent failed; ``envelopes`` holds the per-agent failure records."""

    def __init__(self, message: str, envelopes=None):
        self.envelopes = envelopes or []
        super().__init__(message)


class ConsistencyError(ScoreAgentsError):
    """A report does not belong to the score it is being applied to."""


class WorkMismatchError(ScoreAgentsError):
    """Report and reference annotation describe different works."""


class MetricError(ValueError, ScoreAgentsError):
    """A metric is undefined for the given input (too few events, etc.)."""

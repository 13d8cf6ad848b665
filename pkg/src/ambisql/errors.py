"""Exception hierarchy shared across the package.

Grouped by subsystem: SQL parsing/execution, LLM gateway, conformal
selection, personalization, and workload ingestion. Callers that absorb
failures (e.g. execution-match over possibly-invalid candidates) catch
``SqlError``; everything else propagates.
"""

from __future__ import annotations


class AmbisqlError(Exception):
    """Base class for all package errors."""


# --- SQL subset -------------------------------------------------------------

class SqlError(AmbisqlError):
    """Base for parse/resolution/execution failures of the SQL subset."""


class SqlSyntaxError(SqlError):
    """Malformed SQL text."""


class UnsupportedFeature(SqlError):
    """Syntactically valid SQL using a construct outside the subset."""


class UnresolvedIdentifier(SqlError):
    """A table or column reference that does not resolve in scope."""


class TypeMismatch(SqlError):
    """Operation applied to incompatible value types (e.g. SUM over text)."""


class DivisionByZero(SqlError):
    """Division with a zero denominator during evaluation."""


class GoldQueryInvalid(AmbisqlError):
    """The reference (gold) query itself failed to parse or execute."""


# --- LLM gateway ------------------------------------------------------------

class BackendUnavailable(AmbisqlError):
    """The language-model backend could not be reached or kept failing."""


class GenerationRefused(AmbisqlError):
    """The backend declined to produce a query for this input."""


class LogitsUnavailable(AmbisqlError):
    """The backend exposes no token probabilities; LLM scoring impossible."""


# --- Domain/model -----------------------------------------------------------

class ColumnNotVisible(AmbisqlError):
    """Attempt to mask a column that is already hidden or absent."""


class NoColumnsUsed(AmbisqlError):
    """Schema mapping requested for a query that references no columns."""


# --- Selector ---------------------------------------------------------------

class EmptyCalibration(AmbisqlError):
    """No calibration record contains a correct candidate."""


class CalibrationMissing(AmbisqlError):
    """Selection requested but no calibration artifact is available."""


# --- Personalizer / service --------------------------------------------------

class SessionUnknown(AmbisqlError):
    """Feedback referenced a session id that was never opened."""


# --- Harness ----------------------------------------------------------------

class FormatError(AmbisqlError):
    """A workload or fixture file does not match the documented format."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class MissingFixture(AmbisqlError):
    """A workload item references a database fixture that cannot be found."""


class InsufficientAlternatives(AmbisqlError):
    """Either/both metrics need at least two alternative gold queries."""

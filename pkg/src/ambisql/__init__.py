"""ambisql: an NL2SQL disambiguation engine.

Given a natural-language question over a relational schema, the pipeline
generates a diverse set of candidate SQL queries by tree search over masked
schemas, prunes it with a conformal-prediction selector that guarantees the
correct candidate is retained with probability >= 1 - alpha, and learns
schema-linking preferences from user feedback to personalize future output.
"""

from .model import (
    CandidateSet,
    Column,
    ColumnRef,
    Entity,
    Hint,
    MaskedSchema,
    PipelineConfig,
    Question,
    Schema,
    SqlCandidate,
    Table,
    canonical_key,
    visible_columns,
)

__version__ = "0.1.0"

__all__ = [
    "CandidateSet",
    "Column",
    "ColumnRef",
    "Entity",
    "Hint",
    "MaskedSchema",
    "PipelineConfig",
    "Question",
    "Schema",
    "SqlCandidate",
    "Table",
    "canonical_key",
    "visible_columns",
]

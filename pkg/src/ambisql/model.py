"""Shared domain types: schemas, masked schemas, questions, and candidates.

All types are immutable values after construction, so they can be shared
freely across concurrent pipeline runs. Identifier comparison is
case-insensitive but case-preserving in output (SQL identifier convention).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Iterable

from .errors import FormatError

if TYPE_CHECKING:
    from .sql.nodes import SelectStmt

STRATEGIES = ("odin", "sampling", "forced_diversity")
SCORING_KINDS = ("llm", "embedding")


@dataclass(frozen=True)
class ColumnRef:
    """A (table, column) pair. Equality and hashing are case-insensitive."""

    table: str
    column: str

    def __post_init__(self):
        if not self.table or not self.column:
            raise ValueError("table and column must be non-empty")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ColumnRef):
            return NotImplemented
        return (self.table.lower(), self.column.lower()) == (
            other.table.lower(), other.column.lower())

    def __hash__(self) -> int:
        return hash((self.table.lower(), self.column.lower()))

    def __str__(self) -> str:
        return f"{self.table}.{self.column}"


@dataclass(frozen=True)
class Column:
    name: str
    sql_type: str = "text"
    description: str | None = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("column name must be non-empty")


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[Column, ...]

    def __post_init__(self):
        if not self.name:
            raise ValueError("table name must be non-empty")
        seen = set()
        for col in self.columns:
            key = col.name.lower()
            if key in seen:
                raise ValueError(f"duplicate column {col.name!r} in table {self.name!r}")
            seen.add(key)

    def column(self, name: str) -> Column | None:
        low = name.lower()
        for col in self.columns:
            if col.name.lower() == low:
                return col
        return None


@dataclass(frozen=True)
class Schema:
    """A database schema: uniquely named tables, each with uniquely named columns."""

    db_id: str
    tables: tuple[Table, ...]

    def __post_init__(self):
        if not self.db_id:
            raise ValueError("db_id must be non-empty")
        seen = set()
        for table in self.tables:
            key = table.name.lower()
            if key in seen:
                raise ValueError(f"duplicate table {table.name!r} in schema {self.db_id!r}")
            seen.add(key)

    def table(self, name: str) -> Table | None:
        low = name.lower()
        for table in self.tables:
            if table.name.lower() == low:
                return table
        return None

    def all_columns(self) -> list[ColumnRef]:
        """Every column as a ColumnRef, in declaration order."""
        return [ColumnRef(t.name, c.name) for t in self.tables for c in t.columns]

    def has_column(self, ref: ColumnRef) -> bool:
        table = self.table(ref.table)
        return table is not None and table.column(ref.column) is not None

    def resolve(self, ref: ColumnRef) -> ColumnRef:
        """Return the ref with the schema's declared casing."""
        table = self.table(ref.table)
        if table is None:
            raise KeyError(f"no table {ref.table!r} in schema {self.db_id!r}")
        col = table.column(ref.column)
        if col is None:
            raise KeyError(f"no column {ref.column!r} in table {table.name!r}")
        return ColumnRef(table.name, col.name)

    # Serialized form: {db_id, tables: [{name, columns: [{name, type, description?}]}]}

    def to_json(self) -> dict[str, Any]:
        return {
            "db_id": self.db_id,
            "tables": [
                {
                    "name": t.name,
                    "columns": [
                        {"name": c.name, "type": c.sql_type}
                        | ({"description": c.description} if c.description else {})
                        for c in t.columns
                    ],
                }
                for t in self.tables
            ],
        }

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "Schema":
        try:
            tables = tuple(
                Table(
                    name=t["name"],
                    columns=tuple(
                        Column(c["name"], c.get("type", "text"), c.get("description"))
                        for c in t["columns"]
                    ),
                )
                for t in doc["tables"]
            )
            return cls(db_id=doc["db_id"], tables=tables)
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad schema document: {exc}") from exc


@dataclass(frozen=True)
class MaskedSchema:
    """A schema with a set of columns hidden from the generator.

    The masked schema is "empty" when no column remains visible. Two masked
    schemas are interchangeable iff their visible column sets are equal,
    which is what :func:`canonical_key` captures.
    """

    base: Schema
    removed: frozenset[ColumnRef] = frozenset()

    def __post_init__(self):
        for ref in self.removed:
            if not self.base.has_column(ref):
                raise ValueError(f"removed column {ref} does not exist in schema")

    @classmethod
    def full(cls, schema: Schema) -> "MaskedSchema":
        return cls(base=schema, removed=frozenset())

    def is_empty(self) -> bool:
        return not visible_columns(self)


@dataclass(frozen=True)
class Entity:
    """A phrase from the user's question that must map to a schema column."""

    phrase: str

    def __post_init__(self):
        if not self.phrase:
            raise ValueError("entity phrase must be non-empty")


@dataclass(frozen=True)
class Question:
    text: str
    user_id: str = "anonymous"
    db_id: str = ""
    # One-shot entity cache, filled by the gateway; excluded from equality.
    entities: tuple[Entity, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.text:
            raise ValueError("question text must be non-empty")
        if self.entities is not None:
            phrases = [e.phrase.lower() for e in self.entities]
            if len(phrases) != len(set(phrases)):
                raise ValueError("entity phrases must be unique")

    def cache_entities(self, entities: Iterable[Entity]) -> tuple[Entity, ...]:
        ents = tuple(entities)
        object.__setattr__(self, "entities", ents)
        return ents


@dataclass(frozen=True)
class SqlCandidate:
    """One generated SQL query with its provenance and nonconformity score."""

    sql_text: str
    strategy: str
    source_schema_key: str = ""
    score: float | None = None
    id: str = ""
    # One-shot AST cache, filled on first parse; excluded from equality.
    parsed: "SelectStmt | None" = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.sql_text:
            raise ValueError("sql_text must be non-empty")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.score is not None and not (float("-inf") < self.score < float("inf")):
            raise ValueError("score must be finite when present")

    def cache_parsed(self, ast: "SelectStmt") -> "SelectStmt":
        object.__setattr__(self, "parsed", ast)
        return ast


@dataclass(frozen=True)
class CandidateSet:
    """The generated candidates for a question and the selected subset."""

    question: Question
    generated: tuple[SqlCandidate, ...]
    selected: tuple[str, ...] | None = None

    def __post_init__(self):
        texts = [c.sql_text for c in self.generated]
        if len(texts) != len(set(texts)):
            raise ValueError("generated candidates must be pairwise distinct by sql_text")
        if self.selected is not None:
            ids = {c.id for c in self.generated}
            missing = [s for s in self.selected if s not in ids]
            if missing:
                raise ValueError(f"selected ids not among generated: {missing}")

    def shown(self) -> tuple[SqlCandidate, ...]:
        """Candidates presented to the user: the selection if one was made."""
        if self.selected is None:
            return self.generated
        keep = set(self.selected)
        return tuple(c for c in self.generated if c.id in keep)


@dataclass(frozen=True)
class Hint:
    """A learned schema-linking preference: entity phrase -> preferred column.

    The rendered ``text`` is what generation and scoring prompts consume;
    the structured fields drive similarity overrides and supersession in
    the hint store.
    """

    user_id: str
    entity: str
    preferred: ColumnRef
    rejected: tuple[ColumnRef, ...] = ()
    text: str = ""
    created_at: str = ""
    session_id: str = ""
    hint_id: str = ""

    def __post_init__(self):
        if self.preferred in self.rejected:
            raise ValueError("preferred column cannot also be rejected")


@dataclass(frozen=True)
class PipelineConfig:
    max_calls: int = 10
    alpha: float = 0.05
    scoring: str = "embedding"
    personalization_enabled: bool = True

    def __post_init__(self):
        if self.max_calls < 1:
            raise ValueError("max_calls must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.scoring not in SCORING_KINDS:
            raise ValueError(f"unknown scoring kind {self.scoring!r}")


def visible_columns(masked: MaskedSchema) -> list[ColumnRef]:
    """All base columns minus the removed set, in schema declaration order."""
    return [ref for ref in masked.base.all_columns() if ref not in masked.removed]


def canonical_key(masked: MaskedSchema) -> str:
    """Deterministic key equal iff the visible column sets are equal.

    Case- and order-insensitive: the sorted lowercase "table.column" list is
    joined and hashed, so keys are cheap to store in seen-sets.
    """
    parts = sorted(f"{ref.table.lower()}.{ref.column.lower()}"
                   for ref in visible_columns(masked))
    digest = hashlib.sha256("|".join(parts).encode("utf-8")).hexdigest()
    return digest[:16]


def load_schema_file(path: str) -> Schema:
    with open(path, "r", encoding="utf-8") as fh:
        return Schema.from_json(json.load(fh))

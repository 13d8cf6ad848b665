"""Entity-to-column similarity providers.

Two interchangeable modes:

  * ``lexicon`` — similarities come from an explicit table of
    (entity phrase, column) -> weight entries, with a configurable default
    for unlisted pairs. This is the fully deterministic mode used by tests
    and the mock pipeline.
  * ``embedding`` — a self-contained character-trigram cosine similarity
    over the column rendered in its table context
    ("<table name> <column name> <description>"). No model download, still
    deterministic, and good enough to prefer students.address over
    teachers.address for the phrase "student address".

Both modes honor override entries, which always win; overrides are how
learned user preferences are injected (preferred column -> 1.0, rejected
columns -> 0.0).
"""

from __future__ import annotations

import math
import re
from collections import Counter
from typing import Mapping

from .model import ColumnRef, Schema

OverrideMap = Mapping[tuple[str, ColumnRef], float]

_WORD_RE = re.compile(r"[a-z0-9]+")


def _normalize(text: str) -> str:
    """Lowercase, split identifier punctuation, collapse whitespace."""
    return " ".join(_WORD_RE.findall(text.lower().replace("_", " ")))


def _trigrams(text: str) -> Counter:
    padded = f"  {text}  "
    return Counter(padded[i:i + 3] for i in range(len(padded) - 2))


def _cosine(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    dot = sum(count * b[gram] for gram, count in a.items())
    norm = math.sqrt(sum(c * c for c in a.values())) * math.sqrt(
        sum(c * c for c in b.values()))
    return dot / norm if norm else 0.0


def column_context(col: ColumnRef, schema: Schema | None) -> str:
    """The text a column is compared as: table, column, and description."""
    description = ""
    if schema is not None:
        table = schema.table(col.table)
        if table is not None:
            column = table.column(col.column)
            if column is not None and column.description:
                description = column.description
    return " ".join(part for part in (col.table, col.column, description) if part)


class SimilarityProvider:
    """Base provider: override handling plus the mode tag."""

    mode = "embedding"

    def __init__(self, overrides: OverrideMap | None = None):
        self.overrides: dict[tuple[str, ColumnRef], float] = {
            (phrase.lower(), col): weight
            for (phrase, col), weight in (overrides or {}).items()
        }

    def base_similarity(self, phrase: str, col: ColumnRef,
                        schema: Schema | None = None) -> float:
        raise NotImplementedError

    def similarity(self, phrase: str, col: ColumnRef,
                   schema: Schema | None = None) -> float:
        override = self.overrides.get((phrase.lower(), col))
        if override is not None:
            return override
        return self.base_similarity(phrase, col, schema)

    def phrase_similarity(self, a: str, b: str) -> float:
        """Similarity between two entity phrases (hint matching)."""
        raise NotImplementedError

    def with_overrides(self, overrides: OverrideMap) -> "SimilarityProvider":
        """A copy of this provider with the given overrides layered on top."""
        raise NotImplementedError


class NgramEmbeddingProvider(SimilarityProvider):
    """Deterministic character-trigram cosine similarity."""

    mode = "embedding"

    def base_similarity(self, phrase: str, col: ColumnRef,
                        schema: Schema | None = None) -> float:
        return _cosine(_trigrams(_normalize(phrase)),
                       _trigrams(_normalize(column_context(col, schema))))

    def phrase_similarity(self, a: str, b: str) -> float:
        return _cosine(_trigrams(_normalize(a)), _trigrams(_normalize(b)))

    def with_overrides(self, overrides: OverrideMap) -> "NgramEmbeddingProvider":
        merged = dict(self.overrides)
        merged.update({(p.lower(), c): w for (p, c), w in overrides.items()})
        return NgramEmbeddingProvider(overrides=merged)


class LexiconProvider(SimilarityProvider):
    """Similarities from an explicit (phrase, column) -> weight table."""

    mode = "lexicon"

    def __init__(self, entries: OverrideMap, default: float = 0.0,
                 overrides: OverrideMap | None = None):
        super().__init__(overrides)
        self.entries = {(p.lower(), c): w for (p, c), w in entries.items()}
        self.default = default

    def base_similarity(self, phrase: str, col: ColumnRef,
                        schema: Schema | None = None) -> float:
        return self.entries.get((phrase.lower(), col), self.default)

    def phrase_similarity(self, a: str, b: str) -> float:
        return 1.0 if a.lower().strip() == b.lower().strip() else 0.0

    def with_overrides(self, overrides: OverrideMap) -> "LexiconProvider":
        merged = dict(self.overrides)
        merged.update({(p.lower(), c): w for (p, c), w in overrides.items()})
        return LexiconProvider(entries=self.entries, default=self.default,
                               overrides=merged)

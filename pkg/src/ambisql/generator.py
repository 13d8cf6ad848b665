"""Diverse candidate generation via greedy tree search over masked schemas.

The search explores the lattice of masked schemas: the root is the full
schema (priority 1.0); popping a node costs one LLM generation call;
children are formed by removing, one at a time, each column the node's
query used, and are prioritized by how well the remaining schema still
covers the question's entities (min over entities of the best column
similarity). Empty and already-seen schemas are skipped, so no LLM call is
ever spent on a duplicate; the budget caps total generation calls.
"""

from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass
from typing import Sequence

from .errors import ColumnNotVisible, GenerationRefused, SqlError
from .gateway import LlmBackend, extract_entities
from .gateway import generate_sql as gateway_generate_sql
from .model import (
    ColumnRef,
    Entity,
    Hint,
    MaskedSchema,
    Question,
    Schema,
    canonical_key,
    visible_columns,
)
from .similarity import SimilarityProvider
from .sql import columns_used, parse_sql

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchNode:
    schema: MaskedSchema
    score: float
    insertion_index: int

    def __post_init__(self):
        if not (float("-inf") < self.score < float("inf")):
            raise ValueError("node score must be finite")


@dataclass(frozen=True)
class TraceEntry:
    schema_key: str
    score: float
    sql: str
    call_index: int
    parsed_ok: bool


@dataclass(frozen=True)
class GenerationTrace:
    """Audit record of one search: explored nodes and the final query list.

    ``llm_calls`` counts every generation attempt, including refused ones
    that produced no trace entry; it never exceeds ``max_calls``.
    """

    entries: tuple[TraceEntry, ...]
    schemas_seen: frozenset[str]
    max_calls: int
    llm_calls: int = 0

    def final_queries(self) -> list[str]:
        """Generated queries in generation order, deduplicated by text."""
        return list(dict.fromkeys(entry.sql for entry in self.entries))

    def to_json_lines(self) -> str:
        return "\n".join(
            json.dumps({
                "schema_key": e.schema_key,
                "score": e.score,
                "sql": e.sql,
                "call_index": e.call_index,
                "parsed_ok": e.parsed_ok,
            })
            for e in self.entries)


def cal_sim(provider: SimilarityProvider, entity: Entity, col: ColumnRef,
            schema: Schema) -> float:
    """Similarity of an entity phrase to a column in its table context."""
    return provider.similarity(entity.phrase, col, schema)


def cal_score(provider: SimilarityProvider, masked: MaskedSchema,
              entities: Sequence[Entity]) -> float:
    """How well the visible schema covers the question.

    The weakest entity dominates: the score is the minimum over entities of
    the best column similarity. An empty schema scores 0.
    """
    if not entities:
        raise ValueError("entities must be non-empty")
    visible = visible_columns(masked)
    if not visible:
        return 0.0
    score = 1.0
    for entity in entities:
        best = max(cal_sim(provider, entity, col, masked.base) for col in visible)
        score = min(score, best)
    return score


def remove_col(masked: MaskedSchema, col: ColumnRef) -> MaskedSchema:
    """A new masked schema with one more column hidden; the input is unchanged."""
    if col in masked.removed or not masked.base.has_column(col):
        raise ColumnNotVisible(f"column {col} is not visible")
    return MaskedSchema(base=masked.base, removed=masked.removed | {col})


class _PriorityQueue:
    """Max-heap by score; ties pop in insertion (FIFO) order."""

    def __init__(self):
        self._heap: list[tuple[float, int, SearchNode]] = []

    def push(self, node: SearchNode) -> None:
        heapq.heappush(self._heap, (-node.score, node.insertion_index, node))

    def pop(self) -> SearchNode:
        return heapq.heappop(self._heap)[2]

    def __len__(self) -> int:
        return len(self._heap)


def gen_sql_queries(backend: LlmBackend, provider: SimilarityProvider,
                    schema: Schema, question: Question, max_calls: int,
                    hints: Sequence[Hint] = ()) -> GenerationTrace:
    """Greedy budgeted tree search over masked schemas.

    Stops when the queue empties or the generation budget is spent. A query
    that fails to parse still consumes its call but produces no children; a
    refused generation consumes its call (it was an attempt) and the search
    moves on to the next node.
    """
    if max_calls < 1:
        raise ValueError("max_calls must be >= 1")
    if not schema.tables:
        raise ValueError("schema must be non-empty")

    entities = extract_entities(backend, question)
    root = MaskedSchema.full(schema)
    root_key = canonical_key(root)

    queue = _PriorityQueue()
    queue.push(SearchNode(schema=root, score=1.0, insertion_index=0))
    seen = {root_key}
    next_index = 1

    entries: list[TraceEntry] = []
    llm_calls = 0

    while len(queue) and llm_calls < max_calls:
        node = queue.pop()
        key = canonical_key(node.schema)
        try:
            sql = gateway_generate_sql(backend, node.schema, question, hints)
        except GenerationRefused as exc:
            llm_calls += 1
            log.info("generation refused for schema %s: %s", key, exc)
            continue
        llm_calls += 1

        try:
            ast = parse_sql(sql)
            used = columns_used(ast, schema)
            parsed_ok = True
        except SqlError:
            used = set()
            parsed_ok = False
        entries.append(TraceEntry(schema_key=key, score=node.score, sql=sql,
                                  call_index=llm_calls, parsed_ok=parsed_ok))

        # Expand children in schema declaration order for determinism.
        for col in [c for c in schema.all_columns() if c in used]:
            child = remove_col(node.schema, col)
            if child.is_empty():
                continue
            child_key = canonical_key(child)
            if child_key in seen:
                continue
            score = cal_score(provider, child, entities)
            queue.push(SearchNode(schema=child, score=score,
                                  insertion_index=next_index))
            next_index += 1
            seen.add(child_key)

    return GenerationTrace(entries=tuple(entries), schemas_seen=frozenset(seen),
                           max_calls=max_calls, llm_calls=llm_calls)

"""Turning user feedback into schema-linking hints and storing them per user.

When the user picks the correct query out of the shown set, each question
entity is mapped to the column it most resembles in the chosen query
(schema linking); the same mapping over the rejected queries yields the
columns the user implicitly turned down. The result is rendered as a
textual hint — "When referring to X, the user prefers the t.c column over
t.d." — that generation and scoring consume, and as similarity overrides
for the embedding scorer.

Preference drift is handled by supersession: the newest hint for a
(user, entity) pair wins, a sliding window of size one.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Sequence

from .errors import NoColumnsUsed, SqlError
from .gateway import LlmBackend, extract_entities
from .generator import cal_sim
from .model import ColumnRef, Entity, Hint, Question, Schema, SqlCandidate
from .similarity import SimilarityProvider
from .sql import columns_used_ordered, parse_sql

DEFAULT_MATCH_THRESHOLD = 0.8


def format_hint(entity: str, preferred: ColumnRef,
                rejected: Sequence[ColumnRef]) -> str:
    """Render the hint sentence; the rejected clause is omitted when empty."""
    base = f"When referring to {entity}, the user prefers the {preferred} column"
    if rejected:
        return f"{base} over {', '.join(str(r) for r in rejected)}."
    return f"{base}."


def schema_map(provider: SimilarityProvider, entity: Entity, sql_text: str,
               schema: Schema) -> ColumnRef:
    """The referenced column most similar to the entity.

    Ties break toward the earliest reference in the query.
    """
    try:
        ast = parse_sql(sql_text)
        used = columns_used_ordered(ast, schema)
    except SqlError as exc:
        raise NoColumnsUsed(f"query does not parse: {exc}") from exc
    if not used:
        raise NoColumnsUsed("query references no columns")
    best = used[0]
    best_sim = cal_sim(provider, entity, best, schema)
    for col in used[1:]:
        sim = cal_sim(provider, entity, col, schema)
        if sim > best_sim:
            best, best_sim = col, sim
    return best


def generate_hints(provider: SimilarityProvider, question: Question,
                   sql_true: str, sqls_incorrect: Sequence[str], schema: Schema,
                   user_id: str | None = None, session_id: str = "",
                   match_threshold: float = DEFAULT_MATCH_THRESHOLD,
                   ) -> list[Hint]:
    """One hint per question entity, from the chosen query vs the rejected ones.

    A rejected query's mapping only counts when it differs from the correct
    mapping and the similarity clears the match threshold — a query that
    simply omits the entity would otherwise contribute a spurious "best"
    column. Entities whose rejected list ends up empty still yield a hint.
    """
    if question.entities is None:
        raise ValueError("question entities must be extracted before hint generation")
    user = user_id if user_id is not None else question.user_id
    now = datetime.now(timezone.utc).isoformat()
    hints = []
    for entity in question.entities:
        correct = schema_map(provider, entity, sql_true, schema)
        rejected: list[ColumnRef] = []
        for sql in sqls_incorrect:
            try:
                mapping = schema_map(provider, entity, sql, schema)
            except NoColumnsUsed:
                continue
            if mapping == correct or mapping in rejected:
                continue
            if cal_sim(provider, entity, mapping, schema) < match_threshold:
                continue
            rejected.append(mapping)
        hints.append(Hint(
            user_id=user,
            entity=entity.phrase,
            preferred=correct,
            rejected=tuple(rejected),
            text=format_hint(entity.phrase, correct, rejected),
            created_at=now,
            session_id=session_id,
            hint_id=uuid.uuid4().hex,
        ))
    return hints


def hint_overrides(hints: Sequence[Hint]) -> dict[tuple[str, ColumnRef], float]:
    """Similarity overrides implied by hints: preferred -> 1.0, rejected -> 0.0."""
    overrides: dict[tuple[str, ColumnRef], float] = {}
    for hint in hints:
        overrides[(hint.entity.lower(), hint.preferred)] = 1.0
        for col in hint.rejected:
            overrides[(hint.entity.lower(), col)] = 0.0
    return overrides


@dataclass(frozen=True)
class FeedbackEvent:
    session_id: str
    question: Question
    shown: tuple[SqlCandidate, ...]
    chosen_id: str | None

    def __post_init__(self):
        if self.chosen_id is not None:
            if self.chosen_id not in {c.id for c in self.shown}:
                raise ValueError(
                    f"chosen id {self.chosen_id!r} is not among the shown candidates")


class HintStore:
    """Per-user hints with newest-wins supersession and a replayable journal.

    The journal is append-only JSON lines; each upsert writes one record and
    each deletion writes a tombstone, so replaying the file reconstructs the
    exact active state (a deletion never resurrects an older hint). Reads
    are lock-free snapshots; writes are serialized.
    """

    def __init__(self, journal_path: str | None = None):
        self._active: dict[tuple[str, str], Hint] = {}
        self._order: int = 0
        self._recency: dict[tuple[str, str], int] = {}
        self._lock = threading.Lock()
        self.journal_path = journal_path
        if journal_path and os.path.exists(journal_path):
            self._replay(journal_path)

    # -- journal ----------------------------------------------------------------

    @staticmethod
    def _hint_to_record(hint: Hint) -> dict:
        return {
            "op": "upsert",
            "id": hint.hint_id,
            "user": hint.user_id,
            "entity": hint.entity,
            "preferred": {"table": hint.preferred.table, "column": hint.preferred.column},
            "rejected": [{"table": r.table, "column": r.column} for r in hint.rejected],
            "text": hint.text,
            "ts": hint.created_at,
            "session": hint.session_id,
        }

    @staticmethod
    def _hint_from_record(rec: dict) -> Hint:
        return Hint(
            user_id=rec["user"],
            entity=rec["entity"],
            preferred=ColumnRef(rec["preferred"]["table"], rec["preferred"]["column"]),
            rejected=tuple(ColumnRef(r["table"], r["column"]) for r in rec["rejected"]),
            text=rec["text"],
            created_at=rec["ts"],
            session_id=rec.get("session", ""),
            hint_id=rec.get("id", ""),
        )

    def _append(self, record: dict) -> None:
        if not self.journal_path:
            return
        with open(self.journal_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")

    def _replay(self, path: str) -> None:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if rec.get("op") == "delete":
                    self._drop_by_id(rec["id"])
                else:
                    self._apply(self._hint_from_record(rec))

    # -- state ------------------------------------------------------------------

    def _apply(self, hint: Hint) -> None:
        key = (hint.user_id, hint.entity.lower())
        self._order += 1
        self._active[key] = hint
        self._recency[key] = self._order

    def _drop_by_id(self, hint_id: str) -> None:
        for key, hint in list(self._active.items()):
            if hint.hint_id == hint_id:
                del self._active[key]
                self._recency.pop(key, None)

    def upsert(self, hint: Hint) -> None:
        with self._lock:
            self._apply(hint)
            self._append(self._hint_to_record(hint))

    def delete(self, hint_id: str) -> bool:
        with self._lock:
            existed = any(h.hint_id == hint_id for h in self._active.values())
            if existed:
                self._drop_by_id(hint_id)
                self._append({"op": "delete", "id": hint_id})
            return existed

    def active_hints(self, user_id: str) -> list[Hint]:
        """All active hints for a user, newest-first."""
        items = [(self._recency[key], hint)
                 for key, hint in self._active.items() if key[0] == user_id]
        return [hint for _, hint in sorted(items, reverse=True)]

    def get(self, hint_id: str) -> Hint | None:
        for hint in self._active.values():
            if hint.hint_id == hint_id:
                return hint
        return None


def apply_feedback(store: HintStore, event: FeedbackEvent,
                   provider: SimilarityProvider, schema: Schema,
                   backend: LlmBackend | None = None,
                   match_threshold: float = DEFAULT_MATCH_THRESHOLD,
                   ) -> list[Hint]:
    """Convert a feedback event into hints and upsert them into the store.

    A chosen candidate becomes sql_true; everything else shown becomes the
    rejected set. Choosing nothing changes no state. New hints supersede
    older hints for the same (user, entity).
    """
    if event.chosen_id is None:
        return []
    if event.question.entities is None:
        if backend is None:
            raise ValueError("question has no cached entities and no backend given")
        extract_entities(backend, event.question)
    chosen = next(c for c in event.shown if c.id == event.chosen_id)
    others = [c.sql_text for c in event.shown if c.id != event.chosen_id]
    hints = generate_hints(provider, event.question, chosen.sql_text, others,
                           schema, session_id=event.session_id,
                           match_threshold=match_threshold)
    for hint in hints:
        store.upsert(hint)
    return hints


def hints_for(store: HintStore, user_id: str, question: Question,
              provider: SimilarityProvider,
              match_threshold: float = DEFAULT_MATCH_THRESHOLD) -> list[Hint]:
    """Active hints whose entity matches one of the question's entities.

    Matching uses phrase similarity with the configured threshold, so a
    stored "total sales" hint fires for a question mentioning total sales
    but not for one about singers. Requires extracted entities; an
    un-extracted question matches by raw text containment as a fallback.
    """
    phrases = ([e.phrase for e in question.entities]
               if question.entities is not None else None)
    out = []
    for hint in store.active_hints(user_id):
        if phrases is None:
            if hint.entity.lower() in question.text.lower():
                out.append(hint)
        elif any(provider.phrase_similarity(hint.entity, p) >= match_threshold
                 for p in phrases):
            out.append(hint)
    return out

"""Uniform interface to language-model capabilities.

Three capabilities — SQL generation, entity extraction, yes/no candidate
scoring — behind two backends:

  * MockBackend: a deterministic oracle for offline runs and tests. Its
    randomness is per-call (the seed is derived from the inputs), so a fixed
    configuration produces bit-identical transcripts.
  * HttpBackend: one JSON POST per call against a provider-agnostic
    endpoint, with exponential-backoff retries.

The two generation baselines (high-temperature sampling and prior-aware
forced diversity) also live here, since both are pure prompting strategies.
"""

from __future__ import annotations

import hashlib
import json
import random
import time
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import requests

from . import prompts
from .errors import (
    BackendUnavailable,
    FormatError,
    GenerationRefused,
    LogitsUnavailable,
    SqlError,
)
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
from .sql import parse_sql
from .sql.nodes import AggregateExpr, ColumnExpr, SelectStmt

# Variants the mock emits under high-temperature sampling; all of them parse
# and execute identically to the plain rendering.
COSMETIC_VARIANTS = ("lower", "semicolon", "alias", "qualified")


def derive_rng(*parts: Any) -> random.Random:
    """A Random seeded from a stable hash of the inputs (platform-independent)."""
    blob = "\x1f".join(str(p) for p in parts).encode("utf-8")
    seed = int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")
    return random.Random(seed)


class LlmBackend:
    """Capability interface: generate_sql, extract_entities, score_yes_no."""

    backend_id = "abstract"
    capabilities = ("generate_sql", "extract_entities", "score_yes_no")

    def generate_sql_raw(self, masked: MaskedSchema, question: Question,
                         hints: Sequence[Hint]) -> str:
        raise NotImplementedError

    def extract_entities_raw(self, question: Question) -> list[str]:
        raise NotImplementedError

    def score_yes_no_raw(self, question: Question, sql: str,
                         hints: Sequence[Hint]) -> float:
        raise NotImplementedError

    def sample_sql(self, schema: Schema, question: Question, call_index: int,
                   temperature: float) -> str:
        raise NotImplementedError

    def forced_diversity_sql(self, schema: Schema, question: Question,
                             prior: Sequence[str]) -> str:
        raise NotImplementedError


# --- mock oracle --------------------------------------------------------------


@dataclass(frozen=True)
class TemplateRule:
    contains: str  # lowercase substring matched against the question
    kind: str      # "count" or "project"


@dataclass(frozen=True)
class MockOracle:
    """Deterministic linking knowledge standing in for a language model.

    linking maps an entity phrase to a ranked list of (column, weight).
    gold records which column each user actually means; it never influences
    generation, only fixture/gold construction. Weights at or below the
    floor are treated as "no plausible column" and produce a deliberately
    wrong query, which is the Selector's job to prune.
    """

    linking: Mapping[str, tuple[tuple[ColumnRef, float], ...]]
    gold: Mapping[tuple[str, str], ColumnRef] = field(default_factory=dict)
    noise_rate: float = 0.15
    floor: float = 0.1
    templates: tuple[TemplateRule, ...] = ()
    join_keys: tuple[tuple[ColumnRef, ColumnRef], ...] = ()

    def __post_init__(self):
        for phrase, candidates in self.linking.items():
            for _col, weight in candidates:
                if not 0.0 <= weight <= 1.0:
                    raise ValueError(f"weight out of range for entity {phrase!r}")
        for (user, phrase), col in self.gold.items():
            candidates = self.linking.get(phrase.lower())
            if candidates is None or col not in {c for c, _ in candidates}:
                raise ValueError(
                    f"gold preference ({user}, {phrase}) not in linking table")

    def entities_in(self, text: str) -> list[str]:
        """Known phrases occurring in the text, in order of appearance."""
        low = text.lower()
        found = []
        for phrase in self.linking:
            pos = low.find(phrase)
            if pos >= 0:
                found.append((pos, -len(phrase), phrase))
        return [phrase for _, _, phrase in sorted(found)]

    def weight(self, phrase: str, col: ColumnRef) -> float:
        for candidate, weight in self.linking.get(phrase.lower(), ()):
            if candidate == col:
                return weight
        return 0.0

    def ranked(self, phrase: str) -> tuple[tuple[ColumnRef, float], ...]:
        return self.linking.get(phrase.lower(), ())

    def gold_column(self, user_id: str, phrase: str) -> ColumnRef | None:
        return (self.gold.get((user_id, phrase.lower()))
                or self.gold.get(("*", phrase.lower())))

    def template_kind(self, question_text: str) -> str:
        low = question_text.lower()
        for rule in self.templates:
            if rule.contains in low:
                return rule.kind
        return "project"

    def join_key(self, left_table: str, right_table: str) -> tuple[ColumnRef, ColumnRef] | None:
        for a, b in self.join_keys:
            if a.table.lower() == left_table.lower() and b.table.lower() == right_table.lower():
                return a, b
            if b.table.lower() == left_table.lower() and a.table.lower() == right_table.lower():
                return b, a
        return None

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "MockOracle":
        try:
            linking = {
                entry["entity"].lower(): tuple(
                    (ColumnRef(c["table"], c["column"]), float(c["weight"]))
                    for c in entry["columns"])
                for entry in doc["linking"]
            }
            gold = {
                (g.get("user", "*"), g["entity"].lower()):
                    ColumnRef(g["table"], g["column"])
                for g in doc.get("gold", [])
            }
            templates = tuple(
                TemplateRule(t["contains"].lower(), t["kind"])
                for t in doc.get("templates", []))
            join_keys = tuple(
                (ColumnRef(j["left_table"], j["left_column"]),
                 ColumnRef(j["right_table"], j["right_column"]))
                for j in doc.get("join_keys", []))
            return cls(
                linking=linking,
                gold=gold,
                noise_rate=float(doc.get("noise_rate", 0.15)),
                floor=float(doc.get("floor", 0.1)),
                templates=templates,
                join_keys=join_keys,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad mock oracle document: {exc}") from exc

    @classmethod
    def load(cls, path: str) -> "MockOracle":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


# --- mock backend ---------------------------------------------------------------


class MockBackend(LlmBackend):
    """Deterministic stand-in for a language model, driven by a MockOracle."""

    backend_id = "mock"

    def __init__(self, oracle: MockOracle, seed: int = 0,
                 diversity_rate: float = 0.1):
        self.oracle = oracle
        self.seed = seed
        self.diversity_rate = diversity_rate
        self.call_count = 0

    # -- helpers ---------------------------------------------------------------

    def _hint_for(self, phrase: str, hints: Sequence[Hint]) -> Hint | None:
        for hint in hints:
            if hint.entity.lower() == phrase.lower():
                return hint
        return None

    def _effective_weight(self, phrase: str, col: ColumnRef,
                          hints: Sequence[Hint]) -> float:
        hint = self._hint_for(phrase, hints)
        if hint is not None:
            if col == hint.preferred:
                return 1.0
            if col in hint.rejected:
                return 0.0
        return self.oracle.weight(phrase, col)

    def _best_visible(self, phrase: str, visible: list[ColumnRef],
                      hints: Sequence[Hint]) -> tuple[ColumnRef, float]:
        """Highest effective weight; ties break by oracle rank then schema order."""
        rank = {col: i for i, (col, _) in enumerate(self.oracle.ranked(phrase))}
        best: tuple[float, int, int, ColumnRef] | None = None
        for order, col in enumerate(visible):
            weight = self._effective_weight(phrase, col, hints)
            key = (-weight, rank.get(col, len(rank)), order, col)
            if best is None or key < best:
                best = key
        assert best is not None
        return best[3], -best[0]

    def _render(self, question: Question, mapping: dict[str, ColumnRef],
                variant: str = "plain") -> str:
        kind = self.oracle.template_kind(question.text)
        columns = list(dict.fromkeys(mapping.values()))
        if kind == "count":
            table = columns[0].table
            text = f"SELECT COUNT(*) FROM {table}"
            return self._apply_variant(text, variant, table)
        tables = list(dict.fromkeys(col.table.lower() for col in columns))
        if len(tables) == 1:
            table = columns[0].table
            cols = ", ".join(col.column for col in columns)
            text = f"SELECT {cols} FROM {table}"
            return self._apply_variant(text, variant, table, columns)
        first = columns[0].table
        parts = [f"SELECT {', '.join(str(c) for c in columns)} FROM {first}"]
        joined = {first.lower()}
        for col in columns[1:]:
            if col.table.lower() in joined:
                continue
            key = self.oracle.join_key(first, col.table)
            if key is None:
                raise GenerationRefused(
                    f"no join path between {first} and {col.table}")
            left, right = key
            parts.append(f"JOIN {col.table} ON {left} = {right}")
            joined.add(col.table.lower())
        return " ".join(parts)

    @staticmethod
    def _apply_variant(text: str, variant: str, table: str,
                       columns: list[ColumnRef] | None = None) -> str:
        if variant == "lower":
            out = text
            for kw in ("SELECT", "FROM", "COUNT", "WHERE", "JOIN", "ON"):
                out = out.replace(kw, kw.lower())
            return out
        if variant == "semicolon":
            return text + ";"
        if variant == "alias" and columns is not None:
            cols = ", ".join(f"t0.{col.column}" for col in columns)
            return f"SELECT {cols} FROM {table} AS t0"
        if variant == "alias":
            return text.replace(f"FROM {table}", f"FROM {table} AS t0")
        if variant == "qualified" and columns is not None:
            cols = ", ".join(f"{table}.{col.column}" for col in columns)
            return f"SELECT {cols} FROM {table}"
        return text

    def _mapping_for(self, masked: MaskedSchema, question: Question,
                     hints: Sequence[Hint]) -> dict[str, ColumnRef]:
        phrases = self.oracle.entities_in(question.text)
        if not phrases:
            raise GenerationRefused(
                f"no recognizable entities in question {question.text!r}")
        visible = visible_columns(masked)
        mapping = {}
        for phrase in phrases:
            col, _weight = self._best_visible(phrase, visible, hints)
            mapping[phrase] = col
        return mapping

    # -- capability implementations --------------------------------------------

    def generate_sql_raw(self, masked: MaskedSchema, question: Question,
                         hints: Sequence[Hint]) -> str:
        self.call_count += 1
        key = canonical_key(masked)
        rng = derive_rng(self.seed, "generate", question.text, key,
                         tuple(h.text for h in hints))
        mapping = self._mapping_for(masked, question, hints)
        if rng.random() < self.oracle.noise_rate:
            # Deliberately invalid SQL: the Selector must see broken candidates.
            return f"SELECT FROM broken_{key[:8]}"
        return self._render(question, mapping)

    def extract_entities_raw(self, question: Question) -> list[str]:
        self.call_count += 1
        return self.oracle.entities_in(question.text)

    def score_yes_no_raw(self, question: Question, sql: str,
                         hints: Sequence[Hint]) -> float:
        self.call_count += 1
        phrases = self.oracle.entities_in(question.text)
        if not phrases:
            return 1.0
        try:
            stmt = parse_sql(sql)
        except SqlError:
            return 1.0
        referenced = self._referenced_columns(stmt)
        scope = {t.name.lower() for t in stmt.scope_tables()}
        covers_tables = self._counts_whole_tables(stmt)
        coverage = 1.0
        for phrase in phrases:
            best = 0.0
            for col, _weight in self.oracle.ranked(phrase):
                w = self._effective_weight(phrase, col, hints)
                if self._matches(col, referenced, scope, covers_tables):
                    best = max(best, w)
            coverage = min(coverage, best)
        return 1.0 - coverage

    @staticmethod
    def _referenced_columns(stmt: SelectStmt) -> set[tuple[str | None, str]]:
        # Alias qualifiers resolve to base table names so cosmetic alias
        # renames score exactly like the plain rendering.
        aliases = {ref.key(): ref.name.lower() for ref in stmt.scope_tables()}
        refs: set[tuple[str | None, str]] = set()

        def visit(node: Any) -> None:
            if isinstance(node, ColumnExpr):
                qualifier = None
                if node.table is not None:
                    qualifier = aliases.get(node.table.lower(), node.table.lower())
                refs.add((qualifier, node.name.lower()))
            elif isinstance(node, AggregateExpr):
                if node.arg is not None:
                    visit(node.arg)
            elif hasattr(node, "__dataclass_fields__"):
                for name in node.__dataclass_fields__:
                    value = getattr(node, name)
                    if isinstance(value, tuple):
                        for item in value:
                            visit(item)
                    else:
                        visit(value)

        visit(stmt)
        return refs

    @staticmethod
    def _counts_whole_tables(stmt: SelectStmt) -> bool:
        if stmt.star:
            return True
        return any(isinstance(i.expr, AggregateExpr) and i.expr.arg is None
                   for i in stmt.items)

    @staticmethod
    def _matches(col: ColumnRef, referenced: set[tuple[str | None, str]],
                 scope: set[str], covers_tables: bool) -> bool:
        if covers_tables and col.table.lower() in scope:
            return True
        if (col.table.lower(), col.column.lower()) in referenced:
            return True
        return ((None, col.column.lower()) in referenced
                and col.table.lower() in scope)

    def sample_sql(self, schema: Schema, question: Question, call_index: int,
                   temperature: float) -> str:
        self.call_count += 1
        masked = MaskedSchema.full(schema)
        mapping = self._mapping_for(masked, question, ())
        if call_index == 0 or temperature == 0.0:
            return self._render(question, mapping)
        rng = derive_rng(self.seed, "sample", question.text, call_index, temperature)
        if rng.random() < self.diversity_rate:
            alt = self._runner_up_mapping(mapping, masked)
            if alt is not None:
                return self._render(question, alt)
        variant = rng.choice(COSMETIC_VARIANTS)
        return self._render(question, mapping, variant)

    def _runner_up_mapping(self, mapping: dict[str, ColumnRef],
                           masked: MaskedSchema) -> dict[str, ColumnRef] | None:
        """Swap the single most ambiguous entity to its second-best column."""
        visible = set(visible_columns(masked))
        best_phrase, best_alt, best_weight = None, None, -1.0
        for phrase, chosen in mapping.items():
            for col, weight in self.oracle.ranked(phrase):
                if col == chosen or col not in visible or weight <= self.oracle.floor:
                    continue
                if weight > best_weight:
                    best_phrase, best_alt, best_weight = phrase, col, weight
                break
        if best_phrase is None or best_alt is None:
            return None
        alt = dict(mapping)
        alt[best_phrase] = best_alt
        return alt

    def forced_diversity_sql(self, schema: Schema, question: Question,
                             prior: Sequence[str]) -> str:
        self.call_count += 1
        masked = MaskedSchema.full(schema)
        base = self._mapping_for(masked, question, ())
        visible = set(visible_columns(masked))
        combos: list[dict[str, ColumnRef]] = [base]
        # Walk the ranking one entity at a time; compound substitutions are
        # exactly what this baseline fails to reach.
        for phrase in base:
            for col, weight in self.oracle.ranked(phrase):
                if col == base[phrase] or col not in visible:
                    continue
                if weight <= self.oracle.floor:
                    continue
                swapped = dict(base)
                swapped[phrase] = col
                combos.append(swapped)
        prior_norm = {self._normalize_text(p) for p in prior}
        for combo in combos:
            text = self._render(question, combo)
            if self._normalize_text(text) not in prior_norm:
                return text
        # Alternatives exhausted: start repeating earlier outcomes.
        repeat = combos[len(prior) % len(combos)]
        return self._render(question, repeat)

    @staticmethod
    def _normalize_text(sql: str) -> str:
        try:
            return parse_sql(sql).render()
        except SqlError:
            return sql.strip().rstrip(";").lower()


# --- HTTP backend -----------------------------------------------------------------


class HttpBackend(LlmBackend):
    """Provider-agnostic JSON-over-HTTP backend.

    Contract: one POST per call with body {prompt, max_tokens, temperature,
    logprobs?}; the response carries {text} and, when requested and
    supported, {logprobs: [{token, prob}]}. Transient failures retry three
    times with exponential backoff.
    """

    backend_id = "http"

    def __init__(self, endpoint: str, model: str = "default",
                 timeout: float = 30.0, temperature: float = 0.0,
                 max_tokens: int = 512, retries: int = 3,
                 backoff: float = 0.5, api_key: str | None = None):
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.retries = retries
        self.backoff = backoff
        self.api_key = api_key

    def _post(self, prompt: str, temperature: float | None = None,
              logprobs: bool = False) -> dict[str, Any]:
        body = {
            "model": self.model,
            "prompt": prompt,
            "max_tokens": self.max_tokens,
            "temperature": self.temperature if temperature is None else temperature,
        }
        if logprobs:
            body["logprobs"] = True
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                resp = requests.post(self.endpoint, json=body, headers=headers,
                                     timeout=self.timeout)
                if resp.status_code >= 500:
                    raise BackendUnavailable(f"server error {resp.status_code}")
                if resp.status_code != 200:
                    raise BackendUnavailable(
                        f"unexpected status {resp.status_code}: {resp.text[:200]}")
                return resp.json()
            except (requests.RequestException, BackendUnavailable, ValueError) as exc:
                last_error = exc
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff * (2 ** attempt))
        raise BackendUnavailable(f"backend unreachable: {last_error}")

    def generate_sql_raw(self, masked: MaskedSchema, question: Question,
                         hints: Sequence[Hint]) -> str:
        bundle = prompts.PromptBundle.build(
            masked, question.text, hint_texts=tuple(h.text for h in hints))
        return str(self._post(bundle.generation_prompt())["text"]).strip()

    def extract_entities_raw(self, question: Question) -> list[str]:
        bundle = prompts.PromptBundle(question=question.text, schema_text="")
        text = str(self._post(bundle.extraction_prompt())["text"])
        return [line.strip() for line in text.splitlines() if line.strip()]

    def score_yes_no_raw(self, question: Question, sql: str,
                         hints: Sequence[Hint]) -> float:
        bundle = prompts.PromptBundle(
            question=question.text, schema_text="", sql=sql,
            hint_texts=tuple(h.text for h in hints))
        payload = self._post(bundle.scoring_prompt(), logprobs=True)
        entries = payload.get("logprobs")
        if not entries:
            raise LogitsUnavailable("backend response carries no token probabilities")
        probs = {str(e.get("token", "")).strip().upper(): float(e.get("prob", 0.0))
                 for e in entries}
        p_yes, p_no = probs.get("A"), probs.get("B")
        if p_yes is None or p_no is None or p_yes + p_no <= 0:
            raise LogitsUnavailable("option tokens A/B missing from logprobs")
        # Renormalize over the two option tokens.
        return p_no / (p_yes + p_no)

    def sample_sql(self, schema: Schema, question: Question, call_index: int,
                   temperature: float) -> str:
        bundle = prompts.PromptBundle.build(MaskedSchema.full(schema),
                                            question.text)
        return str(self._post(bundle.generation_prompt(),
                              temperature=temperature)["text"]).strip()

    def forced_diversity_sql(self, schema: Schema, question: Question,
                             prior: Sequence[str]) -> str:
        bundle = prompts.PromptBundle.build(MaskedSchema.full(schema),
                                            question.text,
                                            prior_sqls=tuple(prior))
        return str(self._post(bundle.forced_diversity_prompt())["text"]).strip()


# --- capability wrappers -------------------------------------------------------------


def generate_sql(backend: LlmBackend, masked: MaskedSchema, question: Question,
                 hints: Sequence[Hint] = ()) -> str:
    """One SQL query for the question over the visible part of the schema."""
    if masked.is_empty():
        raise ValueError("cannot generate against an empty masked schema")
    return backend.generate_sql_raw(masked, question, hints)


def extract_entities(backend: LlmBackend, question: Question) -> list[Entity]:
    """Distinct entity phrases, cached on the question after the first call."""
    if question.entities is not None:
        return list(question.entities)
    phrases = list(dict.fromkeys(
        p.strip() for p in backend.extract_entities_raw(question) if p.strip()))
    if not phrases:
        raise GenerationRefused(
            f"backend found no entities in question {question.text!r}")
    entities = question.cache_entities(Entity(p) for p in phrases)
    return list(entities)


def score_yes_no(backend: LlmBackend, question: Question, sql: str,
                 hints: Sequence[Hint] = ()) -> float:
    """Probability that the candidate does NOT answer the question, in [0, 1]."""
    if not sql or not sql.strip():
        return 1.0
    score = backend.score_yes_no_raw(question, sql, hints)
    return min(1.0, max(0.0, score))


def sampling_generate(backend: LlmBackend, schema: Schema, question: Question,
                      k: int, temperature: float = 1.0) -> list[str]:
    """Baseline: k independent generations at the given temperature."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return [backend.sample_sql(schema, question, i, temperature) for i in range(k)]


def forced_diversity_generate(backend: LlmBackend, schema: Schema,
                              question: Question,
                              prior: Sequence[str]) -> str:
    """Baseline: ask for a query that differs in execution from all priors."""
    return backend.forced_diversity_sql(schema, question, prior)

"""Workload ingestion, end-to-end pipeline runs, and the evaluation metrics.

Metrics: AvgAcc (mean per-question execution-match flag over the shown
set), AvgResultSize (mean shown-set size), and — for workloads whose items
carry multiple alternative golds — EitherInTopK / BothInTopK over the
generated set. The runner supports the masked-schema search strategy plus
the two baselines, optional conformal selection, and a simulated user that
picks the first execution-matching candidate after every item, which is
what drives personalization during benchmarks.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .errors import (
    CalibrationMissing,
    FormatError,
    InsufficientAlternatives,
    MissingFixture,
    SqlError,
)
from .gateway import LlmBackend, extract_entities, forced_diversity_generate, sampling_generate
from .generator import GenerationTrace, gen_sql_queries
from .model import PipelineConfig, Question, SqlCandidate
from .personalizer import FeedbackEvent, HintStore, apply_feedback, hint_overrides, hints_for
from .selector import ConformalModel, make_scorer, score_candidates, select
from .similarity import SimilarityProvider
from .sql import Database, execute_sql, execution_match, results_equal

DEFAULT_K_SWEEP = (1, 2, 3, 5, 7, 10)


@dataclass(frozen=True)
class WorkloadItem:
    item_id: str
    question: Question
    gold_sql: str
    database: Database
    alt_gold_sqls: tuple[str, ...] = ()
    fixture_path: str = ""


def load_workload(path: str) -> list[WorkloadItem]:
    """Read a JSON-lines workload file and resolve its database fixtures.

    Line format: {question, db_id, gold_sql, alt_gold_sqls?, user_id?,
    fixture} where fixture is a path relative to the workload file. Gold
    queries must parse and execute on their fixture; alternative golds must
    be execution-distinct from each other.
    """
    if not os.path.exists(path):
        raise MissingFixture(f"workload file not found: {path}")
    base_dir = os.path.dirname(os.path.abspath(path))
    fixtures: dict[str, Database] = {}
    items: list[WorkloadItem] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc}", line=lineno) from exc
            for key in ("question", "db_id", "gold_sql", "fixture"):
                if key not in doc:
                    raise FormatError(f"missing field {key!r}", line=lineno)
            fixture_path = os.path.normpath(os.path.join(base_dir, doc["fixture"]))
            if fixture_path not in fixtures:
                if not os.path.exists(fixture_path):
                    raise MissingFixture(
                        f"line {lineno}: fixture not found: {doc['fixture']}")
                fixtures[fixture_path] = Database.load(fixture_path)
            db = fixtures[fixture_path]
            try:
                execute_sql(doc["gold_sql"], db)
            except SqlError as exc:
                raise FormatError(
                    f"gold query invalid for item {doc['question']!r}: {exc}",
                    line=lineno) from exc
            alts = tuple(doc.get("alt_gold_sqls", []))
            _check_alternatives(alts, db, lineno)
            items.append(WorkloadItem(
                item_id=doc.get("id", f"item-{lineno}"),
                question=Question(text=doc["question"],
                                  user_id=doc.get("user_id", "anonymous"),
                                  db_id=doc["db_id"]),
                gold_sql=doc["gold_sql"],
                database=db,
                alt_gold_sqls=alts,
                fixture_path=fixture_path,
            ))
    return items


def convert_ambiqt_item(raw: dict, fixture: str) -> dict:
    """Map one AmbiQT-layout record to a workload line (format stub).

    The AmbiQT benchmark ships records carrying the NL question, a database
    id, the original gold query, and — per ambiguity split — the two correct
    SQL alternatives. Source keys and their targets:

        question                      -> question
        db_id                         -> db_id
        query (original gold)         -> gold_sql
        ambig_queries (the 2 correct alternatives) -> alt_gold_sqls

    The benchmark data is not bundled; its databases must be exported
    separately to the documented fixture format and referenced via
    ``fixture``. Queries outside the supported SQL subset will be rejected
    at load time with a line-numbered diagnostic.
    """
    line = {
        "question": raw["question"],
        "db_id": raw["db_id"],
        "gold_sql": raw["query"],
        "fixture": fixture,
    }
    alternatives = raw.get("ambig_queries")
    if alternatives:
        line["alt_gold_sqls"] = list(alternatives)
    if "user_id" in raw:
        line["user_id"] = raw["user_id"]
    return line


def _check_alternatives(alts: Sequence[str], db: Database, lineno: int) -> None:
    results = []
    for alt in alts:
        try:
            results.append(execute_sql(alt, db))
        except SqlError as exc:
            raise FormatError(f"alternative gold invalid: {exc}", line=lineno) from exc
    for i in range(len(results)):
        for j in range(i + 1, len(results)):
            if results_equal(results[i], results[j]):
                raise FormatError(
                    f"alternative golds {i} and {j} are execution-equivalent",
                    line=lineno)


def accuracy(item: WorkloadItem, shown: Sequence[SqlCandidate]) -> bool:
    """1 iff some shown candidate execution-matches the item's gold."""
    return execution_match(shown, item.gold_sql, item.database)


def either_both_topk(item: WorkloadItem,
                     generated: Sequence[SqlCandidate]) -> tuple[bool, bool]:
    """(any alternative matched, every alternative matched) over the generated set."""
    if len(item.alt_gold_sqls) < 2:
        raise InsufficientAlternatives(
            f"item {item.item_id} has {len(item.alt_gold_sqls)} alternative golds")
    flags = [execution_match(generated, alt, item.database)
             for alt in item.alt_gold_sqls]
    return any(flags), all(flags)


@dataclass
class ItemResult:
    item_id: str
    question: str
    accuracy: bool
    shown_size: int
    generated_size: int
    either: bool | None
    both: bool | None
    generator_calls: int
    selector_calls: int
    shown_sqls: list[str] = field(default_factory=list)


@dataclass
class RunReport:
    strategy: str
    per_item: list[ItemResult]
    avg_acc: float
    avg_result_size: float
    either_rate: float | None
    both_rate: float | None
    config: dict
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "config": self.config,
            "aggregates": {
                "avg_acc": self.avg_acc,
                "avg_result_size": self.avg_result_size,
                "either_in_topk": self.either_rate,
                "both_in_topk": self.both_rate,
                "items": len(self.per_item),
            },
            "per_item": [asdict(r) for r in self.per_item],
        }

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)

    def format_table(self) -> str:
        lines = [
            f"strategy            {self.strategy}",
            f"items               {len(self.per_item)}",
            f"AvgAcc              {self.avg_acc:.4f}",
            f"AvgResultSize       {self.avg_result_size:.4f}",
        ]
        if self.either_rate is not None:
            lines.append(f"EitherInTopK        {self.either_rate:.4f}")
        if self.both_rate is not None:
            lines.append(f"BothInTopK          {self.both_rate:.4f}")
        return "\n".join(lines)


def aggregate_metrics(results: Sequence[ItemResult]) -> dict:
    """The report aggregates: plain means of the per-item numbers."""
    n = len(results)
    if n == 0:
        return {"avg_acc": 0.0, "avg_result_size": 0.0,
                "either_rate": None, "both_rate": None}
    with_alts = [r for r in results if r.either is not None]
    return {
        "avg_acc": sum(1 for r in results if r.accuracy) / n,
        "avg_result_size": sum(r.shown_size for r in results) / n,
        "either_rate": (sum(1 for r in with_alts if r.either) / len(with_alts)
                        if with_alts else None),
        "both_rate": (sum(1 for r in with_alts if r.both) / len(with_alts)
                      if with_alts else None),
    }


def _generate(strategy: str, backend: LlmBackend, provider: SimilarityProvider,
              item: WorkloadItem, k: int, hints) -> tuple[list[SqlCandidate], int, GenerationTrace | None]:
    schema = item.database.schema
    question = item.question
    if strategy == "odin":
        trace = gen_sql_queries(backend, provider, schema, question, k, hints)
        first_key = {}
        for entry in trace.entries:
            first_key.setdefault(entry.sql, entry.schema_key)
        candidates = [
            SqlCandidate(sql_text=text, strategy="odin", id=f"c{i}",
                         source_schema_key=first_key[text])
            for i, text in enumerate(trace.final_queries())
        ]
        return candidates, trace.llm_calls, trace
    if strategy == "sampling":
        texts = sampling_generate(backend, schema, question, k, temperature=1.0)
    elif strategy == "forced_diversity":
        prior: list[str] = []
        for _ in range(k):
            prior.append(forced_diversity_generate(backend, schema, question, prior))
        texts = prior
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    unique = list(dict.fromkeys(texts))
    candidates = [SqlCandidate(sql_text=t, strategy=strategy, id=f"c{i}")
                  for i, t in enumerate(unique)]
    return candidates, k, None


def run(items: Sequence[WorkloadItem], strategy: str, config: PipelineConfig,
        backend: LlmBackend, provider: SimilarityProvider,
        hint_store: HintStore | None = None,
        selector_model: ConformalModel | None = None,
        selector_enabled: bool = False,
        simulate_user: bool | None = None,
        audit_path: str | None = None,
        seed: int = 0) -> RunReport:
    """Evaluate a workload under one strategy and aggregate the metrics.

    With the selector enabled, a fitted model must be supplied (fit it on a
    disjoint slice). Items run in workload order; feedback from the
    simulated user is applied between items, so later questions from the
    same user see the learned hints when personalization is on.
    """
    if selector_enabled and selector_model is None:
        raise CalibrationMissing(
            "selector enabled but no calibration artifact supplied")
    if simulate_user is None:
        simulate_user = config.personalization_enabled and hint_store is not None
    if (simulate_user or config.personalization_enabled) and hint_store is None:
        hint_store = HintStore()

    audit_fh = open(audit_path, "w", encoding="utf-8") if audit_path else None
    results: list[ItemResult] = []
    try:
        for item in items:
            question = item.question
            extract_entities(backend, question)
            hints = ()
            item_provider = provider
            if config.personalization_enabled and hint_store is not None:
                hints = tuple(hints_for(hint_store, question.user_id, question,
                                        provider))
                if hints:
                    item_provider = provider.with_overrides(hint_overrides(hints))

            candidates, gen_calls, trace = _generate(
                strategy, backend, item_provider, item, config.max_calls, hints)

            selector_calls = 0
            shown = candidates
            if selector_enabled and selector_model is not None and candidates:
                scorer = make_scorer(config, backend, item_provider,
                                     item.database.schema, hints,
                                     allow_fallback=True)
                candidates = score_candidates(candidates, question, scorer)
                if config.scoring == "llm":
                    selector_calls = len(candidates)
                shown = select(selector_model, candidates)

            acc = accuracy(item, shown)
            either: bool | None = None
            both: bool | None = None
            if len(item.alt_gold_sqls) >= 2:
                either, both = either_both_topk(item, candidates)

            if simulate_user and hint_store is not None:
                chosen_id = _simulated_choice(item, shown)
                event = FeedbackEvent(session_id=f"bench-{item.item_id}",
                                      question=question,
                                      shown=tuple(shown), chosen_id=chosen_id)
                apply_feedback(hint_store, event, provider,
                               item.database.schema, backend=backend)

            result = ItemResult(
                item_id=item.item_id,
                question=question.text,
                accuracy=acc,
                shown_size=len(shown),
                generated_size=len(candidates),
                either=either,
                both=both,
                generator_calls=gen_calls,
                selector_calls=selector_calls,
                shown_sqls=[c.sql_text for c in shown],
            )
            results.append(result)
            if audit_fh is not None:
                audit_fh.write(json.dumps({
                    "item_id": item.item_id,
                    "question": question.text,
                    "strategy": strategy,
                    "generated": [c.sql_text for c in candidates],
                    "shown": [c.sql_text for c in shown],
                    "scores": [c.score for c in candidates],
                    "accuracy": acc,
                    "either": either,
                    "both": both,
                    "generator_calls": gen_calls,
                    "selector_calls": selector_calls,
                    "trace": ([json.loads(l) for l in trace.to_json_lines().splitlines()]
                              if trace is not None else None),
                }) + "\n")
    finally:
        if audit_fh is not None:
            audit_fh.close()

    agg = aggregate_metrics(results)
    return RunReport(
        strategy=strategy,
        per_item=results,
        avg_acc=agg["avg_acc"],
        avg_result_size=agg["avg_result_size"],
        either_rate=agg["either_rate"],
        both_rate=agg["both_rate"],
        config={
            "max_calls": config.max_calls,
            "alpha": config.alpha,
            "scoring": config.scoring,
            "personalization_enabled": config.personalization_enabled,
            "selector_enabled": selector_enabled,
        },
        seed=seed,
    )


def _simulated_choice(item: WorkloadItem, shown: Sequence[SqlCandidate]) -> str | None:
    """The simulated user picks the first shown candidate matching their gold."""
    try:
        gold_result = execute_sql(item.gold_sql, item.database)
    except SqlError:
        return None
    for cand in shown:
        try:
            if results_equal(execute_sql(cand.sql_text, item.database), gold_result):
                return cand.id
        except SqlError:
            continue
    return None

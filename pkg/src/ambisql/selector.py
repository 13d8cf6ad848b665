"""Conformal-prediction filtering of generated candidates.

Calibration collects nonconformity scores of known-correct candidates (one
draw per question: the minimum correct score, the conservative choice that
preserves the per-question coverage statement). The threshold is the
ceil((n+1)(1-alpha))/n-th empirical quantile of those scores, +infinity
when the index overflows n. Selection keeps every candidate scoring at or
below the threshold, which retains the correct candidate with probability
at least 1 - alpha whenever calibration and test questions are
exchangeable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction
from typing import Callable, Sequence

from .errors import EmptyCalibration, LogitsUnavailable, SqlError
from .gateway import LlmBackend, score_yes_no
from .generator import cal_score
from .model import (
    Hint,
    MaskedSchema,
    PipelineConfig,
    Question,
    Schema,
    SqlCandidate,
)
from .similarity import SimilarityProvider
from .sql import Database, columns_used, execute_sql, parse_sql, results_equal


@dataclass(frozen=True)
class CalibrationRecord:
    """One question's candidates with correctness flags and scores."""

    question: Question
    candidates: tuple[SqlCandidate, ...]
    correct: tuple[bool, ...]
    scores: tuple[float, ...]

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("a calibration record needs at least one candidate")
        if not (len(self.candidates) == len(self.correct) == len(self.scores)):
            raise ValueError("flags and scores must align with candidates")


@dataclass(frozen=True)
class ConformalModel:
    """A fitted threshold with everything needed to re-derive it."""

    threshold: float  # may be math.inf
    alpha: float
    n: int
    scoring: str
    calibration_scores: tuple[float, ...] = ()
    backend_id: str = ""
    created_at: str = ""

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "scoring": self.scoring,
            "n": self.n,
            "scores": list(self.calibration_scores),
            "threshold": None if math.isinf(self.threshold) else self.threshold,
            "created_at": self.created_at,
            "backend_id": self.backend_id,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ConformalModel":
        threshold = doc["threshold"]
        return cls(
            threshold=math.inf if threshold is None else float(threshold),
            alpha=float(doc["alpha"]),
            n=int(doc["n"]),
            scoring=doc["scoring"],
            calibration_scores=tuple(float(s) for s in doc.get("scores", [])),
            backend_id=doc.get("backend_id", ""),
            created_at=doc.get("created_at", ""),
        )

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)

    @classmethod
    def load(cls, path: str) -> "ConformalModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def with_alpha(self, alpha: float) -> "ConformalModel":
        """Re-derive the threshold for a different alpha from the stored scores."""
        if not self.calibration_scores:
            raise EmptyCalibration("model carries no calibration scores")
        return ConformalModel(
            threshold=conformal_threshold(list(self.calibration_scores), alpha),
            alpha=alpha,
            n=self.n,
            scoring=self.scoring,
            calibration_scores=self.calibration_scores,
            backend_id=self.backend_id,
            created_at=self.created_at,
        )


def embedding_score(provider: SimilarityProvider, question: Question,
                    candidate: SqlCandidate, schema: Schema) -> float:
    """Nonconformity of a candidate: 1 - coverage of the question's entities.

    The candidate's own referenced columns play the role of the visible
    schema; negating the coverage keeps lower = better aligned. Candidates
    that fail to parse get the worst score, 1.0.
    """
    if question.entities is None:
        raise ValueError("question entities must be extracted before scoring")
    try:
        ast = candidate.parsed or candidate.cache_parsed(parse_sql(candidate.sql_text))
        used = columns_used(ast, schema)
    except SqlError:
        return 1.0
    if not used:
        return 1.0
    masked = MaskedSchema(
        base=schema,
        removed=frozenset(ref for ref in schema.all_columns() if ref not in used))
    return 1.0 - cal_score(provider, masked, list(question.entities))


def collect_correct_scores(records: Sequence[CalibrationRecord]) -> list[float]:
    """One score per qualifying record: the minimum over its correct candidates.

    Records with no correct candidate contribute nothing; if none qualifies
    the calibration set is empty and fitting must abort.
    """
    out: list[float] = []
    for record in records:
        correct_scores = [s for s, ok in zip(record.scores, record.correct) if ok]
        if correct_scores:
            out.append(min(correct_scores))
    if not out:
        raise EmptyCalibration("no calibration record contains a correct candidate")
    return out


def conformal_threshold(scores: Sequence[float], alpha: float) -> float:
    """The k-th smallest score with k = ceil((n+1)(1-alpha)); +inf when k > n.

    Exact arithmetic via Fraction avoids float-ceiling overshoot (e.g.
    20 * 0.95 must give k = 19, not 20).
    """
    if not scores:
        raise EmptyCalibration("cannot fit a threshold on zero scores")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    n = len(scores)
    k = math.ceil((n + 1) * (1 - Fraction(str(alpha))))
    if k > n:
        return math.inf
    return sorted(scores)[k - 1]


def select(model: ConformalModel, candidates: Sequence[SqlCandidate]) -> list[SqlCandidate]:
    """Keep candidates whose score is at or below the threshold, in order.

    Candidates at exactly the threshold are kept (<=). An empty selection is
    legal and means "no confident candidate"; policy is the caller's.
    """
    kept = []
    for cand in candidates:
        if cand.score is None:
            raise ValueError(f"candidate {cand.id or cand.sql_text!r} has no score")
        if cand.score <= model.threshold:
            kept.append(cand)
    return kept


ScoreFn = Callable[[Question, SqlCandidate], float]


def make_scorer(config: PipelineConfig, backend: LlmBackend,
                provider: SimilarityProvider, schema: Schema,
                hints: Sequence[Hint] = (),
                allow_fallback: bool = False) -> ScoreFn:
    """The configured scoring function with hints wired in.

    LLM scoring passes hints into the prompt context; embedding scoring
    layers them on the similarity provider as overrides.

    When the LLM exposes no token probabilities, serving paths set
    ``allow_fallback`` and scores silently come from the embedding function
    instead; calibration must leave it off so a LogitsUnavailable aborts the
    fit — exchangeability requires one scoring function throughout.
    """
    from .personalizer import hint_overrides  # local import; no cycle at module load
    hinted = provider.with_overrides(hint_overrides(hints)) if hints else provider

    def embedding_scorer(question: Question, candidate: SqlCandidate) -> float:
        return embedding_score(hinted, question, candidate, schema)

    if config.scoring != "llm":
        return embedding_scorer

    def llm_scorer(question: Question, candidate: SqlCandidate) -> float:
        try:
            return score_yes_no(backend, question, candidate.sql_text, hints)
        except LogitsUnavailable:
            if not allow_fallback:
                raise
            return embedding_scorer(question, candidate)
    return llm_scorer


def score_candidates(candidates: Sequence[SqlCandidate],
                     question: Question, scorer: ScoreFn) -> list[SqlCandidate]:
    from dataclasses import replace
    return [replace(c, score=scorer(question, c)) for c in candidates]


def calibrate(records: Sequence[CalibrationRecord], alpha: float,
              scoring: str, backend_id: str = "") -> ConformalModel:
    """Fit the quantile threshold from prepared calibration records."""
    scores = collect_correct_scores(records)
    return ConformalModel(
        threshold=conformal_threshold(scores, alpha),
        alpha=alpha,
        n=len(scores),
        scoring=scoring,
        calibration_scores=tuple(sorted(scores)),
        backend_id=backend_id,
        created_at=datetime.now(timezone.utc).isoformat(),
    )


def calibrate_pipeline(items: Sequence, config: PipelineConfig,
                       backend: LlmBackend, provider: SimilarityProvider,
                       hints_for_item: Callable[[object], Sequence[Hint]] | None = None,
                       ) -> ConformalModel:
    """Run the generator over a workload slice and fit the conformal model.

    Each item must carry ``question`` (Question), ``gold_sql`` (text),
    ``database`` (Database) — the harness's WorkloadItem satisfies this.
    Correctness is execution match against the item's gold; scores come
    from the configured scoring function, with the item's hints active when
    personalization is on.
    """
    from .generator import gen_sql_queries  # deferred to keep import graph flat
    from .personalizer import hint_overrides

    records: list[CalibrationRecord] = []
    for item in items:
        question: Question = item.question
        db: Database = item.database
        hints = tuple(hints_for_item(item)) if (
            hints_for_item and config.personalization_enabled) else ()
        item_provider = provider.with_overrides(hint_overrides(hints)) if hints \
            else provider
        trace = gen_sql_queries(backend, item_provider, db.schema, question,
                                config.max_calls, hints)
        texts = trace.final_queries()
        if not texts:
            continue
        candidates = tuple(
            SqlCandidate(sql_text=t, strategy="odin", id=f"c{i}")
            for i, t in enumerate(texts))
        try:
            gold_result = execute_sql(item.gold_sql, db)
        except SqlError:
            continue
        flags = []
        for cand in candidates:
            try:
                flags.append(results_equal(execute_sql(cand.sql_text, db), gold_result))
            except SqlError:
                flags.append(False)
        # allow_fallback stays off: a LogitsUnavailable aborts the fit rather
        # than silently mixing scoring functions.
        scorer = make_scorer(config, backend, item_provider, db.schema, hints)
        scores = tuple(scorer(question, c) for c in candidates)
        records.append(CalibrationRecord(
            question=question, candidates=candidates,
            correct=tuple(flags), scores=scores))
    return calibrate(records, config.alpha, config.scoring,
                     backend_id=getattr(backend, "backend_id", ""))

"""Conformal selection: scoring, calibration, quantile math, coverage."""

from __future__ import annotations

import math
import random
from fractions import Fraction

import pytest

from ambisql.errors import EmptyCalibration
from ambisql.gateway import MockBackend, extract_entities
from ambisql.model import Entity, PipelineConfig, Question, SqlCandidate
from ambisql.selector import (
    CalibrationRecord,
    ConformalModel,
    calibrate,
    calibrate_pipeline,
    collect_correct_scores,
    conformal_threshold,
    embedding_score,
    select,
)

import synth


def oracle_threshold(scores: list[float], alpha: float) -> float:
    """Independent sort-and-index implementation of the quantile rule."""
    n = len(scores)
    ordered = sorted(scores)
    k = 0
    target = (n + 1) * (Fraction(1) - Fraction(str(alpha)))
    while k < target:  # smallest integer k >= target
        k += 1
    if k > n:
        return math.inf
    return ordered[k - 1]


def candidate(sql: str, score: float | None = None, cid: str = "c0") -> SqlCandidate:
    return SqlCandidate(sql_text=sql, strategy="odin", score=score, id=cid)


class TestEmbeddingScore:
    def setup_method(self):
        self.schema = synth.suite_schema(entities=2, fillers=False)
        self.oracle = synth.suite_oracle(entities=2, fillers=False)
        self.provider = synth.suite_provider(self.oracle, default=0.1)
        self.question = Question(synth.question_text(2, 0), db_id="synth")
        self.question.cache_entities([Entity("metric0"), Entity("metric1")])

    def test_covering_candidate_scores_low(self):
        score = embedding_score(self.provider, self.question,
                                candidate("SELECT col_0_0, col_1_0 FROM facts"),
                                self.schema)
        assert score == pytest.approx(1 - 0.9)

    def test_missing_entities_score_high(self):
        score = embedding_score(self.provider, self.question,
                                candidate("SELECT col_0_0 FROM facts"),
                                self.schema)
        assert score == pytest.approx(1 - 0.1)

    def test_unparseable_scores_worst(self):
        assert embedding_score(self.provider, self.question,
                               candidate("SELECT FROM"), self.schema) == 1.0

    def test_requires_extracted_entities(self):
        bare = Question("Report metric0 and metric1", db_id="synth")
        with pytest.raises(ValueError):
            embedding_score(self.provider, bare,
                            candidate("SELECT col_0_0 FROM facts"), self.schema)


class TestCollectCorrectScores:
    def make_record(self, scores, flags):
        q = Question("q", db_id="d")
        cands = tuple(candidate(f"SELECT c{i} FROM t", cid=f"c{i}")
                      for i in range(len(scores)))
        return CalibrationRecord(question=q, candidates=cands,
                                 correct=tuple(flags), scores=tuple(scores))

    def test_one_correct_each(self):
        records = [self.make_record([s], [True]) for s in (0.2, 0.5, 0.3)]
        assert collect_correct_scores(records) == [0.2, 0.5, 0.3]

    def test_record_without_correct_contributes_nothing(self):
        records = [self.make_record([0.2], [True]),
                   self.make_record([0.4, 0.6], [False, False])]
        assert collect_correct_scores(records) == [0.2]

    def test_min_per_record(self):
        records = [self.make_record([0.4, 0.1], [True, True])]
        assert collect_correct_scores(records) == [0.1]

    def test_no_qualifying_records(self):
        records = [self.make_record([0.4], [False])]
        with pytest.raises(EmptyCalibration):
            collect_correct_scores(records)


class TestConformalThreshold:
    def test_nine_scores_alpha_point_one(self):
        scores = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
        # k = ceil(10 * 0.9) = 9 -> 9th smallest.
        assert conformal_threshold(scores, 0.1) == pytest.approx(0.9)

    def test_nineteen_scores_alpha_point_05(self):
        scores = [i / 20 for i in range(1, 20)]
        # k = ceil(20 * 0.95) = 19 -> the maximum.
        assert conformal_threshold(scores, 0.05) == pytest.approx(max(scores))

    def test_overflow_gives_infinity(self):
        # k = ceil(6 * 0.95) = 6 > 5 -> select everything.
        assert conformal_threshold([0.1, 0.2, 0.3, 0.4, 0.5], 0.05) == math.inf

    def test_empty_scores(self):
        with pytest.raises(EmptyCalibration):
            conformal_threshold([], 0.1)

    def test_alpha_bounds(self):
        with pytest.raises(ValueError):
            conformal_threshold([0.5], 0.0)

    def test_matches_brute_force_oracle_on_random_multisets(self):
        rng = random.Random(20240817)
        for trial in range(100):
            n = rng.randint(1, 60)
            # Draw from a tiny grid so ties are common.
            scores = [rng.choice([0.0, 0.1, 0.25, 0.25, 0.5, 0.9, 1.0])
                      for _ in range(n)]
            alpha = rng.choice([0.01, 0.05, 0.1, 0.25, 0.5, 0.9])
            assert conformal_threshold(scores, alpha) == oracle_threshold(scores, alpha), \
                f"trial {trial}: n={n} alpha={alpha}"

    def test_monotone_in_alpha(self):
        rng = random.Random(7)
        scores = [rng.random() for _ in range(40)]
        alphas = [0.01, 0.05, 0.1, 0.2, 0.5]
        thresholds = [conformal_threshold(scores, a) for a in alphas]
        for lo, hi in zip(thresholds[1:], thresholds):
            assert lo <= hi  # larger alpha, (weakly) smaller threshold


class TestSelect:
    def model(self, threshold: float) -> ConformalModel:
        return ConformalModel(threshold=threshold, alpha=0.1, n=10,
                              scoring="embedding")

    def test_infinite_threshold_keeps_everything(self):
        cands = [candidate("SELECT a FROM t", 0.2, "a"),
                 candidate("SELECT b FROM t", 0.99, "b")]
        assert select(self.model(math.inf), cands) == cands

    def test_threshold_filters(self):
        cands = [candidate("SELECT a FROM t", 0.1, "a"),
                 candidate("SELECT b FROM t", 0.95, "b")]
        assert select(self.model(0.9), cands) == [cands[0]]

    def test_empty_selection_is_legal(self):
        cands = [candidate("SELECT a FROM t", 0.95, "a")]
        assert select(self.model(0.5), cands) == []

    def test_boundary_scores_are_kept(self):
        cands = [candidate("SELECT a FROM t", 0.5, "a")]
        assert select(self.model(0.5), cands) == cands

    def test_order_preserved_and_monotone_in_threshold(self):
        rng = random.Random(3)
        cands = [candidate(f"SELECT c{i} FROM t", rng.random(), f"c{i}")
                 for i in range(12)]
        kept_low = select(self.model(0.3), cands)
        kept_high = select(self.model(0.7), cands)
        assert set(c.id for c in kept_low) <= set(c.id for c in kept_high)
        ids = [c.id for c in cands]
        assert [c.id for c in kept_high] == [i for i in ids
                                             if i in {c.id for c in kept_high}]


class TestCalibratePipeline:
    def test_fifty_synthetic_items_fit_a_finite_threshold(self):
        oracle = synth.suite_oracle(entities=2)
        backend = MockBackend(oracle, seed=5)
        provider = synth.suite_provider(oracle)
        items = synth.make_items(50)
        config = PipelineConfig(max_calls=6, alpha=0.05, scoring="embedding",
                                personalization_enabled=False)
        model = calibrate_pipeline(items, config, backend, provider)
        assert model.n <= 50
        assert math.isfinite(model.threshold)
        assert model.scoring == "embedding"
        assert model.backend_id == "mock"

    def test_alpha_monotonicity_on_same_records(self):
        oracle = synth.suite_oracle(entities=2)
        backend = MockBackend(oracle, seed=5)
        provider = synth.suite_provider(oracle)
        items = synth.make_items(30)
        base = PipelineConfig(max_calls=6, alpha=0.5, scoring="embedding",
                              personalization_enabled=False)
        loose = calibrate_pipeline(items, base, backend, provider)
        tight = loose.with_alpha(0.01)
        assert loose.threshold <= tight.threshold

    def test_zero_qualifying_records_aborts(self):
        oracle = synth.suite_oracle(entities=2)
        backend = MockBackend(oracle, seed=5)
        provider = synth.suite_provider(oracle)
        # A gold no generated query can match (different literal values).
        items = [item for item in synth.make_items(3)]
        from dataclasses import replace
        items = [replace(item, gold_sql="SELECT extra_0 FROM facts LIMIT 0")
                 for item in items]
        config = PipelineConfig(max_calls=4, alpha=0.1, scoring="embedding",
                                personalization_enabled=False)
        with pytest.raises(EmptyCalibration):
            calibrate_pipeline(items, config, backend, provider)

    def test_llm_scoring_also_calibrates(self):
        oracle = synth.suite_oracle(entities=2)
        backend = MockBackend(oracle, seed=5)
        provider = synth.suite_provider(oracle)
        items = synth.make_items(20)
        config = PipelineConfig(max_calls=6, alpha=0.1, scoring="llm",
                                personalization_enabled=False)
        model = calibrate_pipeline(items, config, backend, provider)
        assert model.scoring == "llm"
        assert model.n > 0


class TestArtifactPersistence:
    def test_round_trip_including_infinity(self, tmp_path):
        for threshold in (0.37, math.inf):
            model = ConformalModel(threshold=threshold, alpha=0.1, n=5,
                                   scoring="embedding",
                                   calibration_scores=(0.1, 0.2, 0.3, 0.35, 0.37),
                                   backend_id="mock", created_at="2026-01-01T00:00:00")
            path = tmp_path / "artifact.json"
            model.save(str(path))
            loaded = ConformalModel.load(str(path))
            assert loaded == model

    def test_threshold_rederivable_for_any_alpha(self, tmp_path):
        scores = [i / 10 for i in range(1, 10)]
        model = calibrate(
            [CalibrationRecord(question=Question("q", db_id="d"),
                               candidates=(candidate("SELECT a FROM t", cid=f"c{i}"),),
                               correct=(True,), scores=(s,))
             for i, s in enumerate(scores)],
            alpha=0.1, scoring="embedding")
        derived = model.with_alpha(0.5)
        assert derived.threshold == conformal_threshold(scores, 0.5)


class TestCoverage:
    @pytest.mark.parametrize("alpha", [0.05, 0.1])
    def test_exchangeable_retention(self, alpha):
        rng = random.Random(99)
        n_calib, n_test = 200, 1000
        calib = [rng.random() for _ in range(n_calib)]
        test = [rng.random() for _ in range(n_test)]
        threshold = conformal_threshold(calib, alpha)
        retained = sum(1 for s in test if s <= threshold) / n_test
        sigma = math.sqrt(alpha * (1 - alpha) / n_test)
        assert retained >= (1 - alpha) - 3 * sigma


class _NoLogitsBackend(MockBackend):
    """Mock whose LLM scoring path hides token probabilities."""

    def score_yes_no_raw(self, question, sql, hints):
        from ambisql.errors import LogitsUnavailable
        raise LogitsUnavailable("model hides logits")


class TestLogitsFallback:
    def setup_method(self):
        self.oracle = synth.suite_oracle(entities=2)
        self.backend = _NoLogitsBackend(self.oracle, seed=1)
        self.provider = synth.suite_provider(self.oracle, default=0.1)
        self.schema = synth.suite_schema(entities=2)
        self.question = Question(synth.question_text(2, 0), db_id="synth")
        self.question.cache_entities([Entity("metric0"), Entity("metric1")])
        self.config = PipelineConfig(max_calls=4, scoring="llm",
                                     personalization_enabled=False)

    def test_serving_path_falls_back_to_embedding(self):
        from ambisql.selector import make_scorer
        scorer = make_scorer(self.config, self.backend, self.provider,
                             self.schema, allow_fallback=True)
        cand = candidate("SELECT col_0_0, col_1_0 FROM facts")
        assert scorer(self.question, cand) == pytest.approx(1 - 0.9)

    def test_calibration_path_aborts(self):
        from ambisql.errors import LogitsUnavailable
        from ambisql.selector import make_scorer
        scorer = make_scorer(self.config, self.backend, self.provider,
                             self.schema, allow_fallback=False)
        with pytest.raises(LogitsUnavailable):
            scorer(self.question, candidate("SELECT col_0_0 FROM facts"))

    def test_calibrate_pipeline_propagates(self):
        from ambisql.errors import LogitsUnavailable
        items = synth.make_items(5)
        with pytest.raises(LogitsUnavailable):
            calibrate_pipeline(items, self.config, self.backend, self.provider)

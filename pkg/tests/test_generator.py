"""Tree-search generation: scoring, budget, dedup, greedy order, completeness."""

from __future__ import annotations

import itertools

import pytest

from ambisql.errors import ColumnNotVisible
from ambisql.gateway import MockBackend, MockOracle, generate_sql
from ambisql.generator import cal_score, cal_sim, gen_sql_queries, remove_col
from ambisql.model import (
    Column,
    ColumnRef,
    Entity,
    MaskedSchema,
    Question,
    Schema,
    Table,
    canonical_key,
    visible_columns,
)
from ambisql.similarity import LexiconProvider, NgramEmbeddingProvider
from ambisql.sql import columns_used, execute_sql, parse_sql, results_equal

import synth


# The weights behind the worked scoring example: hometown matches both
# birthplace (0.9) and origin (0.85); roll number only matches roll_num.
FIXTURE_LEXICON = {
    ("hometown", ColumnRef("students", "birthplace")): 0.9,
    ("hometown", ColumnRef("students", "origin")): 0.85,
    ("roll number", ColumnRef("students", "roll_num")): 0.95,
}


@pytest.fixture
def three_col_schema() -> Schema:
    return Schema("school", (Table("students", (
        Column("birthplace"), Column("origin"), Column("roll_num"))),))


@pytest.fixture
def fixture_provider() -> LexiconProvider:
    return LexiconProvider(FIXTURE_LEXICON, default=0.1)


class TestCalSim:
    def test_lexicon_override_direct_lookup(self, three_col_schema):
        provider = LexiconProvider({}, default=0.0, overrides={
            ("hometown", ColumnRef("students", "origin")): 0.85})
        assert cal_sim(provider, Entity("hometown"),
                       ColumnRef("students", "origin"), three_col_schema) == 0.85

    def test_identical_name_dominates_within_table(self):
        schema = Schema("s", (Table("students", (
            Column("roll_num"), Column("birthplace"), Column("origin"))),))
        provider = NgramEmbeddingProvider()
        entity = Entity("roll_num")
        sims = {col.column: cal_sim(provider, entity, col, schema)
                for col in schema.all_columns()}
        assert max(sims, key=sims.get) == "roll_num"

    def test_table_context_separates_same_column_name(self):
        schema = Schema("s", (
            Table("students", (Column("address"),)),
            Table("teachers", (Column("address"),)),
        ))
        provider = NgramEmbeddingProvider()
        entity = Entity("student address")
        student_side = cal_sim(provider, entity, ColumnRef("students", "address"), schema)
        teacher_side = cal_sim(provider, entity, ColumnRef("teachers", "address"), schema)
        assert student_side > teacher_side

    def test_description_feeds_the_comparison(self):
        schema = Schema("s", (Table("t", (
            Column("c1", "text", description="customer hometown city"),
            Column("c2", "text", description="internal checksum"))),))
        provider = NgramEmbeddingProvider()
        entity = Entity("hometown")
        with_desc = cal_sim(provider, entity, ColumnRef("t", "c1"), schema)
        without = cal_sim(provider, entity, ColumnRef("t", "c2"), schema)
        assert with_desc > without


class TestCalScore:
    ENTITIES = [Entity("hometown"), Entity("roll number")]

    def test_full_schema(self, three_col_schema, fixture_provider):
        full = MaskedSchema.full(three_col_schema)
        assert cal_score(fixture_provider, full, self.ENTITIES) == pytest.approx(0.9)

    def test_minus_birthplace(self, three_col_schema, fixture_provider):
        m = MaskedSchema(three_col_schema,
                         frozenset({ColumnRef("students", "birthplace")}))
        assert cal_score(fixture_provider, m, self.ENTITIES) == pytest.approx(0.85)

    def test_minus_roll_num(self, three_col_schema, fixture_provider):
        m = MaskedSchema(three_col_schema,
                         frozenset({ColumnRef("students", "roll_num")}))
        assert cal_score(fixture_provider, m, self.ENTITIES) == pytest.approx(0.1)

    def test_empty_schema_scores_zero(self, three_col_schema, fixture_provider):
        m = MaskedSchema(three_col_schema, frozenset(three_col_schema.all_columns()))
        assert cal_score(fixture_provider, m, self.ENTITIES) == 0.0

    def test_entities_required(self, three_col_schema, fixture_provider):
        with pytest.raises(ValueError):
            cal_score(fixture_provider, MaskedSchema.full(three_col_schema), [])


class TestRemoveCol:
    def test_removal_shrinks_visibility(self, three_col_schema):
        full = MaskedSchema.full(three_col_schema)
        out = remove_col(full, ColumnRef("students", "birthplace"))
        assert len(visible_columns(out)) == 2
        assert len(visible_columns(full)) == 3  # input untouched

    def test_removing_last_column_yields_empty(self, three_col_schema):
        m = MaskedSchema.full(three_col_schema)
        for col in three_col_schema.all_columns():
            m = remove_col(m, col)
        assert m.is_empty()

    def test_removing_removed_column_fails(self, three_col_schema):
        m = remove_col(MaskedSchema.full(three_col_schema),
                       ColumnRef("students", "birthplace"))
        with pytest.raises(ColumnNotVisible):
            remove_col(m, ColumnRef("students", "birthplace"))


class TestGenSqlQueries:
    def test_budget_four_finds_both_alternatives(self, school_schema,
                                                 school_backend, school_provider,
                                                 school_question):
        trace = gen_sql_queries(school_backend, school_provider, school_schema,
                                school_question, max_calls=4)
        finals = trace.final_queries()
        assert any("birthplace" in sql for sql in finals)
        assert any("origin" in sql for sql in finals)

    def test_budget_one_is_single_full_schema_query(self, school_schema,
                                                    school_backend,
                                                    school_provider,
                                                    school_question):
        trace = gen_sql_queries(school_backend, school_provider, school_schema,
                                school_question, max_calls=1)
        assert trace.llm_calls == 1
        assert trace.final_queries() == ["SELECT birthplace, roll_num FROM students"]
        assert trace.entries[0].schema_key == canonical_key(
            MaskedSchema.full(school_schema))

    def test_two_by_two_alternatives_budget_eight(self, school_schema,
                                                  school_backend, school_provider,
                                                  school_question, school_db):
        trace = gen_sql_queries(school_backend, school_provider, school_schema,
                                school_question, max_calls=8)
        results = []
        for sql in trace.final_queries():
            try:
                result = execute_sql(sql, school_db)
            except Exception:
                continue
            if not any(results_equal(result, r) for r in results):
                results.append(result)
        # 2 alternatives for each of 2 entities -> 4 execution-distinct queries.
        assert len(results) >= 4
        keys = [e.schema_key for e in trace.entries]
        assert len(keys) == len(set(keys))

    def test_greedy_pop_order_on_worked_fixture(self, three_col_schema,
                                                fixture_provider):
        oracle = MockOracle(linking={
            "hometown": ((ColumnRef("students", "birthplace"), 0.9),
                         (ColumnRef("students", "origin"), 0.85)),
            "roll number": ((ColumnRef("students", "roll_num"), 0.95),),
        }, noise_rate=0.0)
        backend = MockBackend(oracle, seed=1)
        q = Question("Find the hometown and roll number of students", db_id="school")
        trace = gen_sql_queries(backend, fixture_provider, three_col_schema, q,
                                max_calls=4)
        second = trace.entries[1]
        minus_birthplace = MaskedSchema(
            three_col_schema, frozenset({ColumnRef("students", "birthplace")}))
        assert second.schema_key == canonical_key(minus_birthplace)
        assert second.score == pytest.approx(0.85)

    def test_budget_respected_and_keys_unique(self, school_schema, school_backend,
                                              school_provider, school_question):
        for budget in (1, 2, 3, 5, 7, 10):
            trace = gen_sql_queries(school_backend, school_provider, school_schema,
                                    school_question, max_calls=budget)
            assert trace.llm_calls <= budget
            keys = [e.schema_key for e in trace.entries]
            assert len(keys) == len(set(keys))

    def test_pop_scores_non_increasing(self, school_schema, school_backend,
                                       school_provider, school_question):
        trace = gen_sql_queries(school_backend, school_provider, school_schema,
                                school_question, max_calls=10)
        scores = [e.score for e in trace.entries]
        assert scores == sorted(scores, reverse=True)

    def test_child_lacks_a_column_its_parent_used(self, school_schema,
                                                  school_backend, school_provider,
                                                  school_question, school_db):
        trace = gen_sql_queries(school_backend, school_provider, school_schema,
                                school_question, max_calls=6)
        parent = trace.entries[0]
        parent_used = columns_used(parse_sql(parent.sql), school_schema)
        for entry in trace.entries[1:]:
            child_sql = entry.sql
            try:
                child_used = columns_used(parse_sql(child_sql), school_schema)
            except Exception:
                continue
            # Every non-root query omits at least one column of the root query.
            assert parent_used - child_used

    def test_final_queries_dedup_by_text(self, school_schema, school_backend,
                                         school_provider, school_question):
        trace = gen_sql_queries(school_backend, school_provider, school_schema,
                                school_question, max_calls=10)
        finals = trace.final_queries()
        assert len(finals) == len(set(finals))

    def test_unparseable_generation_consumes_call_without_children(self):
        oracle = MockOracle(
            linking={"hometown": ((ColumnRef("students", "birthplace"), 0.9),
                                  (ColumnRef("students", "origin"), 0.85))},
            noise_rate=1.0)
        backend = MockBackend(oracle, seed=2)
        schema = Schema("school", (Table("students", (
            Column("birthplace"), Column("origin"))),))
        provider = LexiconProvider({
            ("hometown", ColumnRef("students", "birthplace")): 0.9,
            ("hometown", ColumnRef("students", "origin")): 0.85}, default=0.1)
        q = Question("hometown of students", db_id="school")
        trace = gen_sql_queries(backend, provider, schema, q, max_calls=5)
        # Every generation is noise-invalid: one call, no expansion possible.
        assert trace.llm_calls == 1
        assert not trace.entries[0].parsed_ok

    def test_trace_serializes_to_json_lines(self, school_schema, school_backend,
                                            school_provider, school_question):
        import json
        trace = gen_sql_queries(school_backend, school_provider, school_schema,
                                school_question, max_calls=3)
        lines = trace.to_json_lines().splitlines()
        assert len(lines) == len(trace.entries)
        first = json.loads(lines[0])
        assert set(first) == {"schema_key", "score", "sql", "call_index", "parsed_ok"}


class TestCompleteness:
    """Brute-force lattice enumeration as the oracle for small instances."""

    @pytest.mark.parametrize("entities", [1, 2, 3])
    def test_unlimited_budget_covers_all_alternatives(self, entities):
        schema = synth.suite_schema(entities, fillers=False)
        oracle = synth.suite_oracle(entities, fillers=False)
        provider = synth.suite_provider(oracle)
        backend = MockBackend(oracle, seed=3)
        db = synth.suite_db(schema)
        q = Question(synth.question_text(entities, 0), db_id="synth")

        # Oracle: enumerate every non-empty masked schema, render the mock's
        # query for it, and dedup by execution result.
        cols = schema.all_columns()
        expected = []
        for r in range(len(cols)):
            for removed in itertools.combinations(cols, r):
                m = MaskedSchema(schema, frozenset(removed))
                sql = generate_sql(MockBackend(oracle, seed=3), m,
                                   Question(q.text, db_id="synth"))
                result = execute_sql(sql, db)
                if not any(results_equal(result, e) for e in expected):
                    expected.append(result)

        budget = 2 ** entities + 2
        trace = gen_sql_queries(backend, provider, schema, q, max_calls=budget)
        got = []
        for sql in trace.final_queries():
            result = execute_sql(sql, db)
            if not any(results_equal(result, g) for g in got):
                got.append(result)

        # All alternative combinations (the "good" part of the lattice) are
        # reached within budget; expected also counts dead-schema queries,
        # which the greedy order postpones past the good ones.
        combos = [synth.combo_sql(entities, c)
                  for c in itertools.product(range(2), repeat=entities)]
        for combo in combos:
            combo_result = execute_sql(combo, db)
            assert any(results_equal(combo_result, g) for g in got)
        assert trace.llm_calls <= budget
        keys = [e.schema_key for e in trace.entries]
        assert len(keys) == len(set(keys))
        assert len(expected) >= 2 ** entities

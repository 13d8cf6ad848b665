"""Core domain types: canonical keys, visibility, and value invariants."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ambisql.model import (
    CandidateSet,
    Column,
    ColumnRef,
    MaskedSchema,
    PipelineConfig,
    Question,
    Schema,
    SqlCandidate,
    Table,
    canonical_key,
    visible_columns,
)


def refs(*pairs: tuple[str, str]) -> frozenset[ColumnRef]:
    return frozenset(ColumnRef(t, c) for t, c in pairs)


class TestCanonicalKey:
    def test_full_schema_equals_empty_removed(self, school_schema):
        full = MaskedSchema.full(school_schema)
        explicit = MaskedSchema(school_schema, frozenset())
        assert canonical_key(full) == canonical_key(explicit)

    def test_removal_order_is_irrelevant(self, school_schema):
        ab = MaskedSchema(school_schema,
                          refs(("students", "birthplace"), ("students", "roll_num")))
        ba = MaskedSchema(school_schema,
                          refs(("students", "roll_num"), ("students", "birthplace")))
        assert canonical_key(ab) == canonical_key(ba)

    def test_different_sets_different_keys(self, school_schema):
        minus_birthplace = MaskedSchema(school_schema, refs(("students", "birthplace")))
        minus_origin = MaskedSchema(school_schema, refs(("students", "origin")))
        assert canonical_key(minus_birthplace) != canonical_key(minus_origin)

    def test_pure_function(self, school_schema):
        masked = MaskedSchema(school_schema, refs(("students", "id")))
        assert canonical_key(masked) == canonical_key(masked)

    def test_case_insensitive(self, school_schema):
        a = MaskedSchema(school_schema, refs(("STUDENTS", "Birthplace")))
        b = MaskedSchema(school_schema, refs(("students", "birthplace")))
        assert canonical_key(a) == canonical_key(b)


class TestVisibleColumns:
    def test_nothing_removed(self, school_schema):
        assert visible_columns(MaskedSchema.full(school_schema)) == \
            school_schema.all_columns()

    def test_everything_removed(self, school_schema):
        masked = MaskedSchema(school_schema, frozenset(school_schema.all_columns()))
        assert visible_columns(masked) == []
        assert masked.is_empty()

    def test_set_difference_in_declaration_order(self):
        schema = Schema("s", (Table("students", (
            Column("birthplace"), Column("origin"), Column("roll_num"))),))
        masked = MaskedSchema(schema, refs(("students", "birthplace")))
        assert visible_columns(masked) == [
            ColumnRef("students", "origin"), ColumnRef("students", "roll_num")]

    def test_removed_must_exist(self, school_schema):
        with pytest.raises(ValueError):
            MaskedSchema(school_schema, refs(("students", "nope")))


@settings(max_examples=200, deadline=None)
@given(removed_a=st.lists(st.integers(min_value=0, max_value=3), max_size=4),
       removed_b=st.lists(st.integers(min_value=0, max_value=3), max_size=4))
def test_key_equality_matches_set_equality(removed_a, removed_b):
    schema = Schema("s", (Table("t", (
        Column("a"), Column("b"), Column("c"), Column("d"))),))
    cols = schema.all_columns()
    ma = MaskedSchema(schema, frozenset(cols[i] for i in removed_a))
    mb = MaskedSchema(schema, frozenset(cols[i] for i in removed_b))
    same_sets = {cols[i] for i in removed_a} == {cols[i] for i in removed_b}
    assert (canonical_key(ma) == canonical_key(mb)) == same_sets


def test_lattice_has_at_most_2_to_c_keys():
    schema = Schema("s", (Table("t", (Column("a"), Column("b"), Column("c"))),))
    cols = schema.all_columns()
    keys = set()
    for mask in range(2 ** len(cols)):
        removed = frozenset(c for i, c in enumerate(cols) if mask & (1 << i))
        keys.add(canonical_key(MaskedSchema(schema, removed)))
    assert len(keys) == 2 ** len(cols)  # distinct sets, distinct keys


class TestInvariants:
    def test_duplicate_table_names_rejected(self):
        with pytest.raises(ValueError):
            Schema("s", (Table("t", (Column("a"),)), Table("T", (Column("b"),))))

    def test_duplicate_column_names_rejected(self):
        with pytest.raises(ValueError):
            Table("t", (Column("a"), Column("A")))

    def test_question_text_non_empty(self):
        with pytest.raises(ValueError):
            Question("")

    def test_candidate_strategy_checked(self):
        with pytest.raises(ValueError):
            SqlCandidate(sql_text="SELECT 1", strategy="beam")

    def test_candidate_score_finite(self):
        with pytest.raises(ValueError):
            SqlCandidate(sql_text="SELECT 1", strategy="odin", score=float("nan"))

    def test_candidate_set_distinct_texts(self, school_question):
        a = SqlCandidate(sql_text="SELECT x FROM t", strategy="odin", id="a")
        b = SqlCandidate(sql_text="SELECT x FROM t", strategy="odin", id="b")
        with pytest.raises(ValueError):
            CandidateSet(question=school_question, generated=(a, b))

    def test_candidate_set_selected_subset(self, school_question):
        a = SqlCandidate(sql_text="SELECT x FROM t", strategy="odin", id="a")
        with pytest.raises(ValueError):
            CandidateSet(question=school_question, generated=(a,), selected=("z",))

    def test_pipeline_config_bounds(self):
        with pytest.raises(ValueError):
            PipelineConfig(max_calls=0)
        with pytest.raises(ValueError):
            PipelineConfig(alpha=1.0)
        with pytest.raises(ValueError):
            PipelineConfig(scoring="cosine")

    def test_schema_round_trips_through_json(self, school_schema):
        assert Schema.from_json(school_schema.to_json()) == school_schema

    def test_schema_file_loader(self, tmp_path, school_schema):
        import json
        from ambisql.model import load_schema_file
        path = tmp_path / "school.json"
        path.write_text(json.dumps(school_schema.to_json()))
        assert load_schema_file(str(path)) == school_schema

    def test_descriptions_survive_serialization(self):
        schema = Schema("s", (Table("t", (
            Column("c", "text", description="customer hometown city"),)),))
        loaded = Schema.from_json(schema.to_json())
        assert loaded.tables[0].columns[0].description == "customer hometown city"

    def test_shown_prefers_selection(self, school_question):
        a = SqlCandidate(sql_text="SELECT a FROM t", strategy="odin", id="a")
        b = SqlCandidate(sql_text="SELECT b FROM t", strategy="odin", id="b")
        cs = CandidateSet(question=school_question, generated=(a, b), selected=("b",))
        assert cs.shown() == (b,)
        assert CandidateSet(question=school_question, generated=(a, b)).shown() == (a, b)

"""Walkthrough: diverse SQL generation by tree search over masked schemas.

A question like "Find the hometown and roll number of students" is ambiguous
when the schema carries both a birthplace and an origin column. The search
starts from the full schema, generates one query per node, and spawns child
schemas by hiding the columns that query used — forcing the next generation
onto the alternatives. Run with:

    python demos/01_generation_tree_search.py
"""

from ambisql.gateway import MockBackend, MockOracle
from ambisql.generator import gen_sql_queries
from ambisql.model import Column, ColumnRef, Question, Schema, Table
from ambisql.similarity import LexiconProvider

schema = Schema("school", (
    Table("students", (
        Column("birthplace", "text"),
        Column("origin", "text"),
        Column("roll_num", "integer"),
        Column("id", "integer"),
    )),
))

# The oracle stands in for the language model: it knows which columns each
# entity phrase could mean, and how strongly.
linking = {
    "hometown": ((ColumnRef("students", "birthplace"), 0.9),
                 (ColumnRef("students", "origin"), 0.85)),
    "roll number": ((ColumnRef("students", "roll_num"), 0.95),
                    (ColumnRef("students", "id"), 0.8)),
}
oracle = MockOracle(linking=linking, noise_rate=0.0)
backend = MockBackend(oracle, seed=7)

# Node priorities come from the same kind of knowledge: the weakest entity
# of a masked schema decides its score.
provider = LexiconProvider(
    {(phrase, col): w for phrase, cands in linking.items() for col, w in cands},
    default=0.1)

question = Question("Find the hometown and roll number of students",
                    user_id="demo", db_id="school")

for budget in (1, 4, 8):
    trace = gen_sql_queries(backend, provider, schema, question, max_calls=budget)
    print(f"\n=== budget K={budget}: {trace.llm_calls} calls, "
          f"{len(trace.final_queries())} distinct queries ===")
    for entry in trace.entries:
        print(f"  pop {entry.call_index}  score={entry.score:4.2f}  {entry.sql}")

print("\nNote the greedy order: after the full schema (score 1.0) the search")
print("prefers hiding birthplace (origin still covers 'hometown', 0.85) over")
print("hiding roll_num (nothing good remains for 'roll number', 0.1).")

"""Walkthrough: learning schema preferences from one round of feedback.

The user's schema has both birthplace and origin; the model's first guess is
birthplace, but this user means origin. After the user picks the origin
query once, the preference is rendered as a textual hint, stored, and
injected into every later generation — so a single LLM call now suffices.
Run with:

    python demos/03_feedback_personalization.py
"""

from ambisql.gateway import MockBackend, MockOracle, generate_sql
from ambisql.model import (
    ColumnRef,
    MaskedSchema,
    Question,
    Schema,
    SqlCandidate,
    Table,
    Column,
)
from ambisql.personalizer import FeedbackEvent, HintStore, apply_feedback, hints_for
from ambisql.similarity import LexiconProvider

schema = Schema("school", (
    Table("students", (Column("birthplace"), Column("origin"),
                       Column("roll_num"))),
))
linking = {
    "hometown": ((ColumnRef("students", "birthplace"), 0.9),
                 (ColumnRef("students", "origin"), 0.85)),
    "roll number": ((ColumnRef("students", "roll_num"), 0.95),),
}
oracle = MockOracle(linking=linking, noise_rate=0.0)
backend = MockBackend(oracle, seed=2)
provider = LexiconProvider(
    {(p, c): w for p, cands in linking.items() for c, w in cands}, default=0.1)

question = Question("Find the hometown and roll number of students",
                    user_id="maria", db_id="school")
full = MaskedSchema.full(schema)

print("before feedback:")
print("  ", generate_sql(backend, full, question))

# The review session showed two candidates; the user picked the origin one.
shown = (
    SqlCandidate(sql_text="SELECT birthplace, roll_num FROM students",
                 strategy="odin", id="c0"),
    SqlCandidate(sql_text="SELECT origin, roll_num FROM students",
                 strategy="odin", id="c1"),
)
store = HintStore()
created = apply_feedback(
    store, FeedbackEvent("session-1", question, shown, chosen_id="c1"),
    provider, schema, backend=backend)

print("\nlearned hints:")
for hint in created:
    print("  ", hint.text)

followup = Question("What is the hometown of students from Utah?",
                    user_id="maria", db_id="school")
active = hints_for(store, "maria", followup, provider)
print("\nafter feedback (hints injected):")
print("  ", generate_sql(backend, full, followup, active))

# Preferences drift: a later feedback flips the mapping and supersedes.
flip = Question("Find the hometown and roll number of students again",
                user_id="maria", db_id="school")
apply_feedback(store, FeedbackEvent("session-2", flip, shown, chosen_id="c0"),
               provider, schema, backend=backend)
print("\nafter the user changes their mind:")
for hint in store.active_hints("maria"):
    print("  ", hint.text)

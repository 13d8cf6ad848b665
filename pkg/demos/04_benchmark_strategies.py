"""Walkthrough: benchmarking the three generation strategies.

Builds a synthetic ambiguity workload (two plausible columns per entity,
some questions needing a compound reinterpretation), then compares the
masked-schema search against high-temperature sampling and prior-aware
forced diversity at the same LLM budget. Also shows the selector's effect
on the shown-set size. Run with:

    python demos/04_benchmark_strategies.py
"""

from dataclasses import replace

from ambisql.gateway import MockBackend, MockOracle
from ambisql.harness import WorkloadItem, run
from ambisql.model import Column, ColumnRef, PipelineConfig, Question, Schema, Table
from ambisql.selector import calibrate_pipeline
from ambisql.similarity import LexiconProvider
from ambisql.sql import Database

schema = Schema("synth", (
    Table("facts", (
        Column("col_0_0", "integer"), Column("col_0_1", "integer"),
        Column("col_1_0", "integer"), Column("col_1_1", "integer"),
        Column("extra_0", "integer"), Column("extra_1", "integer"),
    )),
))
db = Database.build(schema, {
    "facts": [tuple(1000 * c + r for c in range(6)) for r in range(2)],
})

linking = {
    "metric0": ((ColumnRef("facts", "col_0_0"), 0.9),
                (ColumnRef("facts", "col_0_1"), 0.85),
                (ColumnRef("facts", "extra_0"), 0.05)),
    "metric1": ((ColumnRef("facts", "col_1_0"), 0.9),
                (ColumnRef("facts", "col_1_1"), 0.85),
                (ColumnRef("facts", "extra_1"), 0.05)),
}
oracle = MockOracle(linking=linking, noise_rate=0.15)
backend = MockBackend(oracle, seed=17)
provider = LexiconProvider(
    {(p, c): w for p, cands in linking.items() for c, w in cands}, default=0.05)


def combo(c0: int, c1: int) -> str:
    return f"SELECT col_0_{c0}, col_1_{c1} FROM facts"


def make_items(n: int, offset: int = 0) -> list[WorkloadItem]:
    golds = [(0, 0), (1, 1), (0, 1), (1, 0)]
    items = []
    for i in range(n):
        idx = offset + i
        hard = idx % 2 == 1
        alts = (combo(0, 0), combo(1, 1)) if hard else (combo(0, 0), combo(1, 0))
        items.append(WorkloadItem(
            item_id=f"item-{idx}",
            question=Question(f"Report metric0 and metric1 for case {idx}",
                              user_id=f"user{idx % 5}", db_id="synth"),
            gold_sql=combo(*golds[idx % 4]),
            database=db,
            alt_gold_sqls=alts,
        ))
    return items


config = PipelineConfig(max_calls=10, alpha=0.1, scoring="embedding",
                        personalization_enabled=False)

print("strategy             AvgAcc  AvgResultSize  EitherInTopK  BothInTopK")
items = make_items(60, offset=100)
for strategy in ("odin", "forced_diversity", "sampling"):
    report = run(items, strategy, config, backend, provider)
    print(f"{strategy:<20} {report.avg_acc:6.3f}  {report.avg_result_size:13.2f}"
          f"  {report.either_rate:12.3f}  {report.both_rate:10.3f}")

model = calibrate_pipeline(make_items(40), config, backend, provider)
with_selector = run(items, "odin", config, backend, provider,
                    selector_model=model, selector_enabled=True)
print(f"{'odin + selector':<20} {with_selector.avg_acc:6.3f}"
      f"  {with_selector.avg_result_size:13.2f}"
      f"  {with_selector.either_rate:12.3f}  {with_selector.both_rate:10.3f}")
print(f"\nselector threshold: {model.threshold:.3f} "
      f"(fitted on {model.n} calibration questions at alpha={model.alpha})")

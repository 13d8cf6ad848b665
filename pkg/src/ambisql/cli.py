"""Command-line surface: benchmarking, calibration, serving, fixture checks."""

from __future__ import annotations

import json
import os

import click

from .errors import AmbisqlError
from .gateway import HttpBackend, LlmBackend, MockBackend, MockOracle
from .harness import DEFAULT_K_SWEEP, load_workload, run
from .model import PipelineConfig
from .personalizer import HintStore
from .selector import ConformalModel, calibrate_pipeline
from .service import ServiceConfig, create_app
from .similarity import LexiconProvider, NgramEmbeddingProvider, SimilarityProvider
from .sql import Database


def _build_backend(kind: str, oracle: str | None, endpoint: str | None,
                   seed: int) -> LlmBackend:
    if kind == "mock":
        if not oracle:
            raise click.UsageError("--backend mock requires --oracle PATH")
        return MockBackend(MockOracle.load(oracle), seed=seed)
    if not endpoint:
        raise click.UsageError("--backend http requires --endpoint URL")
    return HttpBackend(endpoint=endpoint,
                       api_key=os.environ.get("AMBISQL_API_KEY"))


def _build_provider(similarity: str, oracle: str | None,
                    default: float) -> SimilarityProvider:
    if similarity == "embedding":
        return NgramEmbeddingProvider()
    if not oracle:
        raise click.UsageError("--similarity lexicon requires --oracle PATH")
    doc = MockOracle.load(oracle)
    entries = {(phrase, col): weight
               for phrase, cands in doc.linking.items()
               for col, weight in cands}
    return LexiconProvider(entries, default=default)


@click.group()
def main() -> None:
    """NL2SQL disambiguation engine."""


@main.command()
@click.option("--workload", "workload_path", required=True, type=click.Path())
@click.option("--strategy", type=click.Choice(["odin", "sampling", "forced_diversity"]),
              default="odin", show_default=True)
@click.option("--k", type=click.IntRange(min=1), default=10, show_default=True,
              help="Generator LLM call budget per question.")
@click.option("--alpha", type=click.FloatRange(min=0, max=1, min_open=True, max_open=True),
              default=0.05, show_default=True)
@click.option("--backend", type=click.Choice(["mock", "http"]), default="mock",
              show_default=True)
@click.option("--oracle", type=click.Path(), default=None,
              help="Mock oracle JSON (mock backend / lexicon similarity).")
@click.option("--endpoint", default=None, help="HTTP backend endpoint URL.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--report", "report_path", type=click.Path(), default=None,
              help="Write the machine-readable report JSON here.")
@click.option("--calibration", "calibration_path", type=click.Path(), default=None,
              help="Calibration artifact; enables the selector.")
@click.option("--scoring", type=click.Choice(["llm", "embedding"]),
              default="embedding", show_default=True)
@click.option("--similarity", type=click.Choice(["lexicon", "embedding"]),
              default="lexicon", show_default=True)
@click.option("--personalization/--no-personalization", default=True,
              show_default=True)
@click.option("--audit", "audit_path", type=click.Path(), default=None,
              help="Write a per-item JSON-lines audit log here.")
@click.option("--sweep", is_flag=True,
              help=f"Run the default budget grid {DEFAULT_K_SWEEP} instead of --k.")
def bench(workload_path: str, strategy: str, k: int, alpha: float, backend: str,
          oracle: str | None, endpoint: str | None, seed: int,
          report_path: str | None, calibration_path: str | None, scoring: str,
          similarity: str, personalization: bool, audit_path: str | None,
          sweep: bool) -> None:
    """Run a workload under one strategy and report the metrics."""
    try:
        items = load_workload(workload_path)
        llm = _build_backend(backend, oracle, endpoint, seed)
        provider = _build_provider(similarity, oracle, default=0.05)
        model = None
        if calibration_path:
            model = ConformalModel.load(calibration_path)

        budgets = DEFAULT_K_SWEEP if sweep else (k,)
        reports = []
        for budget in budgets:
            config = PipelineConfig(max_calls=budget, alpha=alpha,
                                    scoring=scoring,
                                    personalization_enabled=personalization)
            report = run(items, strategy, config, llm, provider,
                         hint_store=HintStore(),
                         selector_model=model,
                         selector_enabled=model is not None,
                         audit_path=audit_path if not sweep else None,
                         seed=seed)
            if calibration_path:
                report.config["calibration_artifact"] = os.path.abspath(
                    calibration_path)
                if model is not None:
                    report.config["calibration_created_at"] = model.created_at
            reports.append(report)
            if sweep:
                click.echo(f"--- K={budget} ---")
            click.echo(report.format_table())
        if report_path:
            if sweep:
                payload = {"sweep": [r.to_json() for r in reports]}
                with open(report_path, "w", encoding="utf-8") as fh:
                    json.dump(payload, fh, indent=2, sort_keys=True)
            else:
                reports[0].save(report_path)
            click.echo(f"report written to {report_path}")
    except AmbisqlError as exc:
        raise click.ClickException(str(exc)) from exc


@main.command()
@click.option("--workload", "workload_path", required=True, type=click.Path())
@click.option("--split", default="", help="Comma-separated item ids to calibrate on "
                                          "(default: every item).")
@click.option("--alpha", type=click.FloatRange(min=0, max=1, min_open=True, max_open=True),
              default=0.05, show_default=True)
@click.option("--scoring", type=click.Choice(["llm", "embedding"]),
              default="embedding", show_default=True)
@click.option("--k", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--backend", type=click.Choice(["mock", "http"]), default="mock",
              show_default=True)
@click.option("--oracle", type=click.Path(), default=None)
@click.option("--endpoint", default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--similarity", type=click.Choice(["lexicon", "embedding"]),
              default="lexicon", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Where to write the calibration artifact JSON.")
def calibrate(workload_path: str, split: str, alpha: float, scoring: str, k: int,
              backend: str, oracle: str | None, endpoint: str | None, seed: int,
              similarity: str, out_path: str) -> None:
    """Fit the conformal threshold on a workload slice."""
    try:
        items = load_workload(workload_path)
        if split:
            wanted = {s.strip() for s in split.split(",") if s.strip()}
            items = [i for i in items if i.item_id in wanted]
            if not items:
                raise click.ClickException(f"no workload items match split {split!r}")
        llm = _build_backend(backend, oracle, endpoint, seed)
        provider = _build_provider(similarity, oracle, default=0.05)
        config = PipelineConfig(max_calls=k, alpha=alpha, scoring=scoring,
                                personalization_enabled=False)
        model = calibrate_pipeline(items, config, llm, provider)
        model.save(out_path)
        threshold = "inf" if model.threshold == float("inf") else f"{model.threshold:.6f}"
        click.echo(f"calibrated on {model.n} records: threshold={threshold} "
                   f"alpha={model.alpha} scoring={model.scoring}")
        click.echo(f"artifact written to {out_path}")
    except AmbisqlError as exc:
        raise click.ClickException(str(exc)) from exc


@main.command()
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--config", "config_path", required=True, type=click.Path())
def serve(port: int, host: str, config_path: str) -> None:
    """Start the ask/review/feedback HTTP service."""
    import uvicorn

    try:
        config = ServiceConfig.load(config_path)
    except (AmbisqlError, OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(str(exc)) from exc
    app = create_app(config)
    uvicorn.run(app, host=host, port=port)


@main.group()
def fixtures() -> None:
    """Fixture and workload file checks."""


@fixtures.command()
@click.argument("path", type=click.Path())
def validate(path: str) -> None:
    """Validate a workload (.jsonl) or database fixture (.json) file."""
    try:
        if path.endswith(".jsonl"):
            items = load_workload(path)
            dbs = {item.database.schema.db_id for item in items}
            with_alts = sum(1 for i in items if len(i.alt_gold_sqls) >= 2)
            click.echo(f"ok: {len(items)} items over {len(dbs)} databases "
                       f"({with_alts} with alternative golds)")
        else:
            db = Database.load(path)
            total = sum(len(db.table_rows(t.name)) for t in db.schema.tables)
            click.echo(f"ok: database {db.schema.db_id!r} with "
                       f"{len(db.schema.tables)} tables, {total} rows")
    except AmbisqlError as exc:
        raise click.ClickException(str(exc)) from exc


if __name__ == "__main__":
    main()

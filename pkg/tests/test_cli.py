"""CLI verbs: bench, calibrate, fixtures validate, and their error paths."""

from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from ambisql.cli import main

FIXTURE_DOC = {
    "db_id": "school",
    "tables": [{
        "name": "students",
        "columns": ["birthplace", "origin", "roll_num"],
        "column_types": ["text", "text", "integer"],
        "rows": [["NYC", "Utah", 1], ["LA", "Ohio", 2]],
    }],
}

ORACLE_DOC = {
    "linking": [
        {"entity": "hometown", "columns": [
            {"table": "students", "column": "birthplace", "weight": 0.9},
            {"table": "students", "column": "origin", "weight": 0.85}]},
        {"entity": "roll number", "columns": [
            {"table": "students", "column": "roll_num", "weight": 0.95}]},
    ],
    "noise_rate": 0.0,
}


@pytest.fixture
def workspace(tmp_path):
    (tmp_path / "db.json").write_text(json.dumps(FIXTURE_DOC))
    (tmp_path / "oracle.json").write_text(json.dumps(ORACLE_DOC))
    lines = []
    for i in range(3):
        lines.append(json.dumps({
            "id": f"q{i}",
            "question": f"Find the hometown and roll number of students {i}",
            "db_id": "school",
            "gold_sql": "SELECT origin, roll_num FROM students",
            "alt_gold_sqls": ["SELECT origin, roll_num FROM students",
                              "SELECT birthplace, roll_num FROM students"],
            "user_id": "u1",
            "fixture": "db.json",
        }))
    (tmp_path / "workload.jsonl").write_text("\n".join(lines) + "\n")
    return tmp_path


def test_bench_writes_report(workspace):
    runner = CliRunner()
    report_path = workspace / "report.json"
    result = runner.invoke(main, [
        "bench", "--workload", str(workspace / "workload.jsonl"),
        "--strategy", "odin", "--k", "4", "--backend", "mock",
        "--oracle", str(workspace / "oracle.json"),
        "--seed", "1", "--report", str(report_path),
    ])
    assert result.exit_code == 0, result.output
    assert "AvgAcc" in result.output and "AvgResultSize" in result.output
    report = json.loads(report_path.read_text())
    assert report["aggregates"]["items"] == 3
    assert 0.0 <= report["aggregates"]["avg_acc"] <= 1.0


def test_bench_k_zero_is_usage_error(workspace):
    result = CliRunner().invoke(main, [
        "bench", "--workload", str(workspace / "workload.jsonl"), "--k", "0",
        "--oracle", str(workspace / "oracle.json"),
    ])
    assert result.exit_code == 2
    assert "k" in result.output


def test_bench_mock_requires_oracle(workspace):
    result = CliRunner().invoke(main, [
        "bench", "--workload", str(workspace / "workload.jsonl")])
    assert result.exit_code == 2
    assert "--oracle" in result.output


def test_calibrate_then_bench_with_selector(workspace):
    runner = CliRunner()
    artifact = workspace / "calibration.json"
    result = runner.invoke(main, [
        "calibrate", "--workload", str(workspace / "workload.jsonl"),
        "--split", "q0,q1", "--alpha", "0.2", "--scoring", "embedding",
        "--k", "4", "--oracle", str(workspace / "oracle.json"),
        "--out", str(artifact),
    ])
    assert result.exit_code == 0, result.output
    doc = json.loads(artifact.read_text())
    assert doc["n"] == 2 and doc["alpha"] == 0.2 and doc["scores"]

    report_path = workspace / "report.json"
    result = runner.invoke(main, [
        "bench", "--workload", str(workspace / "workload.jsonl"),
        "--k", "4", "--oracle", str(workspace / "oracle.json"),
        "--calibration", str(artifact), "--report", str(report_path),
    ])
    assert result.exit_code == 0, result.output
    report = json.loads(report_path.read_text())
    assert report["config"]["selector_enabled"] is True
    assert report["config"]["calibration_artifact"].endswith("calibration.json")


def test_calibrate_unknown_split(workspace):
    result = CliRunner().invoke(main, [
        "calibrate", "--workload", str(workspace / "workload.jsonl"),
        "--split", "zz", "--oracle", str(workspace / "oracle.json"),
        "--out", str(workspace / "x.json"),
    ])
    assert result.exit_code != 0


def test_fixtures_validate_workload(workspace):
    result = CliRunner().invoke(main, [
        "fixtures", "validate", str(workspace / "workload.jsonl")])
    assert result.exit_code == 0
    assert "3 items" in result.output


def test_fixtures_validate_database(workspace):
    result = CliRunner().invoke(main, [
        "fixtures", "validate", str(workspace / "db.json")])
    assert result.exit_code == 0
    assert "students" in result.output or "school" in result.output


def test_fixtures_validate_rejects_broken_workload(workspace):
    bad = workspace / "bad.jsonl"
    bad.write_text(json.dumps({"question": "x", "db_id": "school",
                               "gold_sql": "SELECT FROM", "fixture": "db.json"}) + "\n")
    result = CliRunner().invoke(main, ["fixtures", "validate", str(bad)])
    assert result.exit_code != 0


def test_bench_audit_log(workspace):
    audit = workspace / "audit.jsonl"
    result = CliRunner().invoke(main, [
        "bench", "--workload", str(workspace / "workload.jsonl"),
        "--k", "3", "--oracle", str(workspace / "oracle.json"),
        "--audit", str(audit),
    ])
    assert result.exit_code == 0, result.output
    lines = audit.read_text().splitlines()
    assert len(lines) == 3


def test_bench_sweep_runs_default_grid(workspace):
    report_path = workspace / "sweep.json"
    result = CliRunner().invoke(main, [
        "bench", "--workload", str(workspace / "workload.jsonl"),
        "--oracle", str(workspace / "oracle.json"), "--sweep",
        "--no-personalization", "--report", str(report_path),
    ])
    assert result.exit_code == 0, result.output
    for k in (1, 2, 3, 5, 7, 10):
        assert f"--- K={k} ---" in result.output
    payload = json.loads(report_path.read_text())
    budgets = [entry["config"]["max_calls"] for entry in payload["sweep"]]
    assert budgets == [1, 2, 3, 5, 7, 10]

import csv
import json

import jsonschema
import pytest
import yaml

import suites
from autonoc.cli import main
from autonoc.harness.checkpoints import Checkpoint
from autonoc.harness.report import (
    L4_CRITERIA,
    SCRIPTED_NOTE,
    emit_report,
    l4_checklist,
    load_results,
    summary_rows,
    validate_report,
)
from autonoc.harness.tasks import TrialResult, run_trials


def fake(task, mode, i, completed):
    cps = [Checkpoint(f"c{k}", f"check {k}", completed or k == 1) for k in range(1, 6)]
    return TrialResult(task, i, i, mode, cps, completed)


def test_completion_rates():
    results = [fake("Task1", "autolight", i, True) for i in range(10)]
    results += [fake("Task1", "single_agent", i, i < 3) for i in range(10)]
    rates = {(r["mode"], r["checkpoint"]): r["rate"] for r in summary_rows(results) if r["task"] == "Task1"}
    assert rates[("autolight", None)] == 1.0
    assert rates[("single_agent", None)] == pytest.approx(0.3)
    assert rates[("single_agent", "c1")] == 1.0 and rates[("single_agent", "c2")] == pytest.approx(0.3)


def test_headline_is_not_reported_for_scripted_runs():
    results = [fake("Task1", "autolight", 0, True), fake("Task1", "single_agent", 0, False)]
    (headline,) = [r for r in summary_rows(results, scripted=True) if r["section"] == "headline"]
    assert headline["note"] == SCRIPTED_NOTE
    (live,) = [r for r in summary_rows(results, scripted=False) if r["section"] == "headline"]
    assert "x inf" in live["note"]


def test_emit_validate_and_reload(tmp_path):
    results = run_trials("Task3", "autolight", 2) + run_trials("Task4", "autolight", 2)
    paths = emit_report(results, tmp_path)
    validate_report(tmp_path)
    with open(paths["summary"], newline="") as fh:
        header = next(csv.reader(fh))
    assert header == ["section", "task", "mode", "checkpoint", "trials", "successes", "rate", "note"]
    reloaded = load_results(tmp_path)
    assert [r.to_dict() for r in reloaded] == [r.to_dict() for r in results]


def test_broken_summary_fails_validation(tmp_path):
    emit_report(run_trials("Task1", "autolight", 1), tmp_path)
    path = tmp_path / "summary.csv"
    path.write_text(path.read_text().replace("completion", "bogus", 1))
    with pytest.raises(jsonschema.ValidationError):
        validate_report(tmp_path)


def test_l4_evidence_from_golden_runs():
    results = [r for task in ("Task1", "Task2", "Task3", "Task4") for r in run_trials(task, "autolight", 1)]
    criteria = l4_checklist(results)["criteria"]
    assert set(criteria) == set(L4_CRITERIA) and len(criteria) == 6
    assert all(c["evidence"] for c in criteria.values())


def test_empty_results_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], tmp_path)


# -- CLI ----------------------------------------------------------------------------


def test_cli_full_matrix_report(tmp_path):
    out = suites.report_check(tmp_path / "run", trials=2)
    assert out["exit"] == 0 and out["valid"]
    assert out["criteria"] == 6 and out["empty"] == []


def test_cli_report_rewrites_in_place(tmp_path, capsys):
    assert main(["run", "--task", "3", "--trials", "2", "--out", str(tmp_path)]) == 0
    before = (tmp_path / "summary.csv").read_text()
    assert main(["report", str(tmp_path)]) == 0
    assert (tmp_path / "summary.csv").read_text() == before
    assert "Task3/autolight/trial-1" in capsys.readouterr().out


def test_cli_topo_show(capsys):
    assert main(["topo", "show"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out["backbone"]["live_channels"]) == 6
    assert out["fabric"]["bisection_gbps"] == 6400 and out["metro"]["nodes"] == 14


def test_cli_inject_failure(tmp_path, capsys):
    spec = tmp_path / "f.yaml"
    spec.write_text(yaml.safe_dump({"kind": "fiber_aging", "span_id": "span2", "delta_db": 3.0}))
    assert main(["inject-failure", "--spec", str(spec)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["class"]["label"] == "PowerLoss" and out["localized"] == "span2"


def test_cli_errors_return_one(tmp_path, capsys):
    assert main(["inject-failure", "--spec", str(tmp_path / "missing.yaml")]) == 1
    assert main(["report", str(tmp_path)]) == 1
    assert "autonoc: error:" in capsys.readouterr().err

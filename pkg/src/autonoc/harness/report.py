"""Report artifacts: report.json, summary.csv, l4_checklist.json and trial logs."""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

import jsonschema

from autonoc.harness.checkpoints import evaluate_checkpoints, summarize_trial
from autonoc.harness.tasks import TASKS, TrialLog, TrialResult
from autonoc.optical.metro import DATA_DIR

SCHEMA_DIR = DATA_DIR / "schemas"
SUMMARY_COLUMNS = ("section", "task", "mode", "checkpoint", "trials", "successes", "rate", "note")
SCRIPTED_NOTE = "n/a (scripted)"

# L4 criterion -> (description, checkpoint sources); "a+b" needs both in one trial
L4_CRITERIA = {
    "Execution": ("configuration changes applied through domain controllers", ("Task1/c4", "Task2/c3")),
    "Awareness": ("anomalies noticed from live telemetry", ("Task3/c1", "Task4/c2+c3")),
    "Analysis": ("failures classified and localized", ("Task3/c2", "Task3/c3", "Task4/c5")),
    "Decision": ("remedial allocations computed and checked", ("Task1/c3", "Task3/c4")),
    "Intent/Experience": ("requests fulfilled and reported back to the requester", ("Task1/c5", "Task2/c5")),
    "Cross-domain": ("evidence gathered across both backbone domains", ("Task4/c2+c3", "Task2/c2")),
}


def _rate(successes: int, trials: int) -> float:
    return successes / trials if trials else 0.0


def summary_rows(results: Sequence[TrialResult], scripted: bool = True) -> list[dict]:
    rows = []
    groups: dict[tuple[str, str], list[TrialResult]] = defaultdict(list)
    for r in results:
        groups[(r.task, r.mode)].append(r)
    for (task, mode), rs in sorted(groups.items()):
        done = sum(r.completed for r in rs)
        rows.append({"section": "completion", "task": task, "mode": mode, "checkpoint": None,
                     "trials": len(rs), "successes": done, "rate": _rate(done, len(rs)), "note": None})
    for (task, mode), rs in sorted(groups.items()):
        for i, cp in enumerate(rs[0].checkpoints):
            ok = sum(r.checkpoints[i].passed for r in rs)
            rows.append({"section": "checkpoint", "task": task, "mode": mode, "checkpoint": cp.id,
                         "trials": len(rs), "successes": ok, "rate": _rate(ok, len(rs)),
                         "note": cp.description})
    by_mode: dict[str, list[TrialResult]] = defaultdict(list)
    for r in results:
        by_mode[r.mode].append(r)
    auto, single = by_mode.get("autolight", []), by_mode.get("single_agent", [])
    note = SCRIPTED_NOTE
    if not scripted and auto and single:
        a = _rate(sum(r.completed for r in auto), len(auto))
        s = _rate(sum(r.completed for r in single), len(single))
        ratio = f"x{a / s:.2f}" if s else "x inf"
        note = f"autolight {a:.3f} vs single_agent {s:.3f} ({ratio})"
    rows.append({"section": "headline", "task": "all", "mode": "autolight vs single_agent", "checkpoint": None,
                 "trials": len(auto) + len(single),
                 "successes": sum(r.completed for r in auto) + sum(r.completed for r in single),
                 "rate": None, "note": note})
    return rows


def l4_checklist(results: Sequence[TrialResult]) -> dict:
    criteria = {}
    for name, (description, sources) in L4_CRITERIA.items():
        evidence = []
        for source in sources:
            task, cps = source.split("/")
            needed = cps.split("+")
            for r in results:
                if r.task != task:
                    continue
                passed = {c.id for c in r.checkpoints if c.passed}
                if all(c in passed for c in needed):
                    evidence.append(f"{r.trial_id}/{cps}")
        criteria[name] = {"description": description, "sources": list(sources), "evidence": evidence}
    return {"criteria": criteria}


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def read_summary(path: str | Path) -> list[dict]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for raw in csv.DictReader(fh):
            row: dict = {k: (v if v != "" else None) for k, v in raw.items()}
            for k in ("trials", "successes"):
                row[k] = int(row[k]) if row[k] is not None else None
            row["rate"] = float(row["rate"]) if row["rate"] is not None else None
            rows.append(row)
    return rows


def _schema(name: str) -> dict:
    return json.loads((SCHEMA_DIR / name).read_text(encoding="utf-8"))


def validate_report(out_dir: str | Path) -> None:
    """Raise jsonschema.ValidationError if an artifact breaks its schema."""
    out = Path(out_dir)
    jsonschema.validate(read_summary(out / "summary.csv"), _schema("summary.schema.json"))
    checklist = json.loads((out / "l4_checklist.json").read_text(encoding="utf-8"))
    jsonschema.validate(checklist, _schema("l4_checklist.schema.json"))


def log_name(r: TrialResult) -> str:
    return f"{r.task}-{r.mode}-trial-{r.trial_index}.jsonl"


def emit_report(results: Sequence[TrialResult], out_dir: str | Path, *, scripted: bool = True,
                write_logs: bool = True) -> dict[str, Path]:
    if not results:
        raise ValueError("no results to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"report": out / "report.json", "summary": out / "summary.csv", "l4": out / "l4_checklist.json"}
    rows = summary_rows(results, scripted)
    checklist = l4_checklist(results)
    report = {
        "tasks": [t for t in TASKS if any(r.task == t for r in results)],
        "modes": sorted({r.mode for r in results}),
        "scripted": scripted,
        "completion": {f"{row['task']}/{row['mode']}": row["rate"] for row in rows
                       if row["section"] == "completion"},
        "summary": rows,
        "l4_checklist": checklist,
        "trials": [r.to_dict() for r in results],
    }
    paths["report"].write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with open(paths["summary"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in SUMMARY_COLUMNS])
    paths["l4"].write_text(json.dumps(checklist, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if write_logs:
        logs = out / "logs"
        logs.mkdir(exist_ok=True)
        for r in results:
            if r.log is not None:
                (logs / log_name(r)).write_text(r.log.to_jsonl(), encoding="utf-8")
    return paths


def load_results(out_dir: str | Path) -> list[TrialResult]:
    """Re-evaluate every saved trial log under ``out_dir/logs``."""
    results = []
    for path in sorted(Path(out_dir, "logs").glob("*.jsonl")):
        log = TrialLog.read(path)
        results.append(summarize_trial(log, evaluate_checkpoints(log)))
    order = {t: i for i, t in enumerate(TASKS)}
    results.sort(key=lambda r: (order[r.task], r.mode, r.trial_index))
    return results


def is_scripted(results: Iterable[TrialResult]) -> bool:
    return all((r.log is None) or r.log.meta.get("backend") != "remote" for r in results)

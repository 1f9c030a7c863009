"""Acceptance criteria, one PASS/FAIL line each.

Run standalone for the table only::

    python3 tests/test_acceptance.py

Under pytest each criterion is its own test and the line is printed unbuffered.
Tolerances are pinned in the constants below.
"""

import math
import sys
import tempfile
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

import suites  # noqa: E402
from autonoc.optical.backbone import compute_osnr  # noqa: E402
from autonoc.optical.fabric import ImddLinkState, imdd_quality  # noqa: E402

LOCALIZATION_SECONDS = 1.0
POWER_TOL = 1e-9
OSNR_TARGET, OSNR_TOL = 24.98, 1e-2
MPI_TARGET, MPI_TOL = 0.8715, 1e-3
RWA_SEQUENCES = 1000
COI_ROUND_TRIPS = 1000
GOLDEN_TRIALS = 10
GOLDEN_SECONDS = 60.0
PLAN_STEPS = 4
TASK4_TOP_DOC = "fiber_aging_guide"


def _equal_span_osnr(n):
    from autonoc.domains import DomainId
    from autonoc.optical.backbone import BackboneConfig, Edfa, Span, Transponder, build_backbone

    a = DomainId.BACKBONE_A
    spans = tuple(Span(f"s{i}", a, 110.0, 0.2) for i in range(n))
    edfas = tuple(Edfa(f"e{i}", a, 22.0, 5.0, f"s{i}") for i in range(n))
    return compute_osnr(build_backbone(BackboneConfig(spans, edfas, (Transponder("t1", 0, 0),), 30, 0.0)), 0)


def localization():
    out = suites.localization_sweep()
    ok = out["correct"] == out["total"] == 12 and out["seconds"] < LOCALIZATION_SECONDS
    return ok, f"{out['correct']}/{out['total']} spans localized in {out['seconds']:.3f}s (< {LOCALIZATION_SECONDS}s)"


def power_budget():
    out = suites.power_budget(100)
    ok = out["max_err"] <= POWER_TOL and not out["locality_violations"]
    return ok, (f"{out['configs']} configs, max |err| {out['max_err']:.2e} (<= {POWER_TOL:g}), "
                f"{len(out['locality_violations'])} downstream-only violations")


def osnr():
    values = [_equal_span_osnr(n) for n in range(1, 9)]
    four = values[3]
    closed = 58 - 22 - 5 - 10 * math.log10(4)
    monotone = all(a > b for a, b in zip(values, values[1:]))
    ok = abs(four - OSNR_TARGET) <= OSNR_TOL and abs(four - closed) <= OSNR_TOL and monotone
    return ok, f"4 spans {four:.4f} dB (target {OSNR_TARGET} +/- {OSNR_TOL:g}), monotone N=1..8: {monotone}"


def mpi():
    penalty = imdd_quality(ImddLinkState("x", mpi_ratio_db=-20.0)).penalty_db
    absent = imdd_quality(ImddLinkState("x")).penalty_db
    present = all(imdd_quality(ImddLinkState("x", mpi_ratio_db=r)).penalty_db > 0 for r in (-60, -40, -20, -13, -1))
    ok = abs(penalty - MPI_TARGET) <= MPI_TOL and absent == 0.0 and present
    return ok, f"-20 dB -> {penalty:.4f} dB (target {MPI_TARGET} +/- {MPI_TOL:g}), absent -> {absent}, present > 0: {present}"


def rwa():
    eq = suites.rwa_equivalence()
    seq = suites.rwa_random_sequences(RWA_SEQUENCES)
    ok = not eq["mismatches"] and not seq["violations"] and eq["graphs"] == 30
    return ok, (f"{eq['graphs']} graphs / {eq['cases']} cases, {len(eq['mismatches'])} mismatches; "
                f"{seq['sequences']} sequences / {seq['ops']} ops, {len(seq['violations'])} violations")


def coi():
    trips = suites.coi_round_trips(COI_ROUND_TRIPS)
    reasons = suites.coi_mutations()
    mutations_ok = reasons["valid"] == () and all(
        reasons[k] == (k,) for k in ("missing declaration", "identity mismatch", "missing acknowledgement"))
    ok = not trips["failures"] and mutations_ok
    return ok, f"{trips['round_trips'] - len(trips['failures'])}/{trips['round_trips']} round trips, mutation reasons ok: {mutations_ok}"


def plan_table():
    out = suites.plan_model_check(PLAN_STEPS)
    ok = not out["stuck"] and not out["regress"] and out["within_bound"]
    worst = max(w for w, _ in out["fresh_worst"].values())
    return ok, (f"{out['states']} states, {len(out['stuck'])} stuck, {len(out['regress'])} regressions, "
                f"dispatches within steps*(1+retries): {out['within_bound']} (max {worst})")


def golden_runs():
    out = suites.golden_runs(GOLDEN_TRIALS)
    complete = all(v == GOLDEN_TRIALS for v in out["completed"].values())
    identical = all(out["identical"].values())
    naive = all(v < GOLDEN_TRIALS for v in out["naive_adversarial"].values())
    strict = all(v > 0 for v in out["strict_aborts"].values())
    ok = complete and identical and naive and strict and out["seconds"] < GOLDEN_SECONDS
    return ok, (f"golden {out['completed']}, byte-identical {identical}, naive adversarial "
                f"{out['naive_adversarial']}, strict aborts {out['strict_aborts']}, {out['seconds']:.1f}s")


def isolation():
    out = suites.isolation_matrix()
    ok = (not out["leaks"] and out["rpc_denied"] == out["rpc_total"] and out["tool_denied"] == out["tool_total"]
          and not out["state_changed"])
    return ok, (f"controller {out['rpc_denied']}/{out['rpc_total']} denied, tools "
                f"{out['tool_denied']}/{out['tool_total']} denied")


def retrieval():
    out = suites.task4_retrieval()
    ok = bool(out["ranking"]) and out["ranking"][0] == TASK4_TOP_DOC
    return ok, f"ranking {out['ranking']}"


def reports():
    with tempfile.TemporaryDirectory() as tmp:
        out = suites.report_check(Path(tmp) / "run", trials=10)
    ok = out["exit"] == 0 and out["valid"] and out["criteria"] == 6 and not out["empty"]
    return ok, f"schemas valid: {out['valid']}, {out['criteria']} L4 criteria, empty evidence: {out['empty']}"


CRITERIA = [
    ("localization", localization),
    ("power-budget", power_budget),
    ("osnr", osnr),
    ("mpi", mpi),
    ("rwa", rwa),
    ("coi", coi),
    ("plan-table", plan_table),
    ("golden-runs", golden_runs),
    ("isolation", isolation),
    ("retrieval", retrieval),
    ("reports", reports),
]


def line(name, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} {name:13} {detail}"


@pytest.mark.parametrize("name,check", CRITERIA, ids=[n for n, _ in CRITERIA])
def test_criterion(name, check, capsys):
    ok, detail = check()
    with capsys.disabled():
        print("\n" + line(name, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for name, check in CRITERIA:
        ok, detail = check()
        failed += not ok
        print(line(name, ok, detail))
    sys.exit(1 if failed else 0)

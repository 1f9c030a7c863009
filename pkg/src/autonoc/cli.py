"""Command line: run trials, inject failures, show topology, rebuild reports."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import yaml

from autonoc.agents.backends import RemoteBackend
from autonoc.agents.runtime import Limits
from autonoc.errors import AutonocError
from autonoc.failures import classify_failure, detect_anomaly, failure_from_dict, inject_failure, localize_failure
from autonoc.harness.policies import POLICY_SETS
from autonoc.harness.report import emit_report, is_scripted, load_results, validate_report
from autonoc.harness.roster import MODE_ALIASES, MODES
from autonoc.harness.tasks import TASKS, run_trials
from autonoc.optical.backbone import compute_osnr, compute_power_profile
from autonoc.optical.fabric import imdd_quality
from autonoc.world import Scenario, build_world

log = logging.getLogger("autonoc")


def _scenario(path: str | None) -> Scenario:
    return Scenario.load(path) if path else Scenario.default()


def cmd_run(args) -> int:
    tasks = list(TASKS) if args.task == "all" else [f"Task{args.task}"]
    modes = list(MODES) if args.mode == "all" else [MODE_ALIASES[args.mode]]
    factory = None
    if args.backend == "remote":
        RemoteBackend.from_env(args.model)  # fail fast when the endpoint is not configured
        factory = lambda: RemoteBackend.from_env(args.model, retries=args.retries)  # noqa: E731
    scenario = _scenario(args.scenario)
    start = time.perf_counter()
    results = []
    for task in tasks:
        for mode in modes:
            rs = run_trials(task, mode, args.trials, args.seed, backend_factory=factory, policy=args.policy,
                            limits=Limits(args.max_steps), scenario=scenario, corpus_dir=args.corpus,
                            backend_name=args.backend)
            done = sum(r.completed for r in rs)
            print(f"{task:6} {mode:13} {done}/{len(rs)} completed")
            results.extend(rs)
    paths = emit_report(results, args.out, scripted=args.backend == "scripted")
    validate_report(args.out)
    print(f"wrote {', '.join(str(p) for p in paths.values())} in {time.perf_counter() - start:.2f}s")
    return 0


def cmd_inject(args) -> int:
    with open(args.spec, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    specs = raw if isinstance(raw, list) else raw.get("failures", [raw]) if isinstance(raw, dict) else None
    if not specs:
        raise AutonocError(f"{args.spec}: expected a failure mapping or a list of them")
    healthy = build_world(_scenario(args.scenario))
    world = healthy
    for spec in specs:
        world = inject_failure(world, failure_from_dict(spec))
    reports = [imdd_quality(s) for s in world.imdd.values()]
    anomaly = detect_anomaly(compute_power_profile(world.backbone), compute_power_profile(healthy.backbone),
                             imdd_reports=reports, channels=world.backbone.channels,
                             baseline_channels=healthy.backbone.channels)
    out = {"failures": [f.to_dict() for f in world.failures],
           "anomaly": None if anomaly is None else anomaly.to_dict()}
    if anomaly is not None:
        try:
            out["class"] = classify_failure(anomaly).to_dict()
            out["localized"] = localize_failure(anomaly, world.backbone)
        except AutonocError as exc:
            out["analysis_error"] = str(exc)
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_topo(args) -> int:
    world = build_world(_scenario(args.scenario))
    bb = world.backbone
    out = {
        "backbone": {
            "elements": [{"id": el.id, "domain": el.domain.value, "kind": type(el).__name__.lower()}
                         for el in bb.elements()],
            "live_channels": {f"ch{i}": round(compute_osnr(bb, i), 3) for i in bb.live_indices()},
        },
        "metro": {"nodes": len(world.metro.nodes), "edges": len(world.metro.edges),
                  "wavelengths": world.metro.n_wavelengths},
        "fabric": {"leaves": len(world.fabric.leaves), "spines": len(world.fabric.spines),
                   "links": len(world.fabric.links), "bisection_gbps": world.fabric.bisection_gbps},
    }
    print(json.dumps(out, indent=2))
    return 0


def cmd_report(args) -> int:
    results = load_results(args.dir)
    if not results:
        raise AutonocError(f"no trial logs under {Path(args.dir) / 'logs'}")
    emit_report(results, args.out or args.dir, scripted=is_scripted(results), write_logs=args.out is not None)
    validate_report(args.out or args.dir)
    for r in results:
        print(f"{r.trial_id:32} {'completed' if r.completed else 'incomplete':10} "
              + " ".join(f"{c.id}={'ok' if c.passed else 'FAIL'}" for c in r.checkpoints))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="autonoc", description="Multi-agent autonomous optical network testbed.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run lifecycle task trials and write a report")
    run.add_argument("--task", default="all", choices=["1", "2", "3", "4", "all"])
    run.add_argument("--mode", default="autolight", choices=sorted(set(MODE_ALIASES) | {"all"}))
    run.add_argument("--trials", type=int, default=10)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--backend", default="scripted", choices=["scripted", "remote"])
    run.add_argument("--policy", choices=POLICY_SETS, help="scripted policy set (default depends on mode)")
    run.add_argument("--model", help="model name for the remote backend")
    run.add_argument("--retries", type=int, default=2, help="remote backend retries per turn")
    run.add_argument("--max-steps", type=int, default=40)
    run.add_argument("--scenario", help="scenario YAML (default: shipped scenario)")
    run.add_argument("--corpus", help="document corpus directory (default: shipped corpus)")
    run.add_argument("--out", default="runs/latest")
    run.set_defaults(fn=cmd_run)

    inj = sub.add_parser("inject-failure", help="inject failures into a fresh world and analyse them")
    inj.add_argument("--spec", required=True, help="YAML/JSON failure spec or list of specs")
    inj.add_argument("--scenario")
    inj.set_defaults(fn=cmd_inject)

    topo = sub.add_parser("topo", help="topology commands")
    topo_sub = topo.add_subparsers(dest="topo_command", required=True)
    show = topo_sub.add_parser("show", help="print the scenario topology")
    show.add_argument("--scenario")
    show.set_defaults(fn=cmd_topo)

    rep = sub.add_parser("report", help="re-evaluate saved trial logs and rewrite the report")
    rep.add_argument("dir")
    rep.add_argument("--out", help="write to another directory (default: in place)")
    rep.set_defaults(fn=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (AutonocError, OSError, ValueError) as exc:
        print(f"autonoc: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Lifecycle task scenarios, trial execution and persisted trial logs."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable

from autonoc.agents.messages import Message
from autonoc.agents.runtime import Backend, Limits, Transcript
from autonoc.agents.session import AgentSystem
from autonoc.coi import Handoff, encode_handoff
from autonoc.control import ControlPlane
from autonoc.errors import SetupError
from autonoc.failures import FiberAging, Mpi, inject_failure
from autonoc.harness.policies import DEFAULT_POLICY, scripted_backend
from autonoc.harness.roster import COI_FOR_MODE, MODE_ALIASES, agents_for, isolation_policy
from autonoc.harness.tools import build_registry
from autonoc.optical.backbone import Transponder
from autonoc.retrieval import CORPUS_DIR, load_corpus
from autonoc.traffic import WorkloadSpec, allocate_intra_dc, generate_demands
from autonoc.world import Scenario, World, build_world

TASKS = ("Task1", "Task2", "Task3", "Task4")
ENTRY = {"Task1": "dci-planner", "Task2": "dci-planner", "Task3": "dci-planner", "Task4": "backbone-planner"}
QUERIES = {
    "Task1": "Allocate intra-DC resources for this epoch's training traffic.",
    "Task2": "Local resources look insufficient for this epoch: establish a backbone wavelength if needed.",
    "Task3": "Manage the intra-DC link failure: detect, classify, localize and reroute around it.",
    "Task4": "Manage the backbone failure: find the faulty span across both backbone domains.",
}
TASK1_PAYLOAD_GBPS = 100.0
TASK2_PAYLOAD_GBPS = 650.0
TASK3_PAYLOAD_GBPS = 100.0
TASK3_MPI_DB = -20.0
TASK4_AGING_DB = 3.0
TASK2_BUSY_TRANSPONDERS = 5


def task_id(value: str | int) -> str:
    text = str(value)
    task = text if text.startswith("Task") else f"Task{text}"
    if task not in TASKS:
        raise ValueError(f"unknown task {value!r}")
    return task


@dataclass
class TaskSetup:
    task: str
    seed: int
    baseline: World
    world: World
    params: dict[str, str]
    truth: dict[str, Any]


def _apply_allocation(world: World, payload: float, epoch: int) -> World:
    alloc = allocate_intra_dc(generate_demands(WorkloadSpec("ring_allreduce", payload), epoch, epoch),
                              world.fabric)
    new = world.copy()
    for link in new.fabric.links.values():
        link.load_gbps = alloc.loads.get(link.id, 0.0)
    new.allocation = alloc
    return new


def setup_task(task: str, seed: int, scenario: Scenario | None = None, *,
               payload_gbps: float | None = None) -> TaskSetup:
    task = task_id(task)
    try:
        world = build_world(scenario)
    except (OSError, KeyError) as exc:
        raise SetupError(f"scenario assets missing: {exc}") from exc
    params = {"task": task, "ticket": f"{task}-{seed}"}
    truth: dict[str, Any] = {}
    if task == "Task1":
        payload = TASK1_PAYLOAD_GBPS if payload_gbps is None else payload_gbps
        params.update(kind="ring_allreduce", payload_gbps=f"{payload:g}", epoch=str(seed))
        baseline = world
    elif task == "Task2":
        payload = TASK2_PAYLOAD_GBPS if payload_gbps is None else payload_gbps
        params.update(kind="ring_allreduce", payload_gbps=f"{payload:g}", epoch=str(seed))
        rng = random.Random(f"task2/{seed}")
        bb = world.backbone
        channels = sorted(rng.sample(range(bb.n_channels), TASK2_BUSY_TRANSPONDERS))
        trs = [Transponder(f"t{i + 1}", ch, ch, 400) for i, ch in enumerate(channels)]
        idle = Transponder(f"t{len(trs) + 1}", None, None, 400)
        world.backbone = replace(bb, transponders=tuple(trs) + (idle,))
        free = sorted(set(range(bb.n_channels)) - set(channels))
        truth.update(idle_transponder=idle.id, expected_channel=free[0], busy_channels=channels)
        baseline = world
    elif task == "Task3":
        baseline = _apply_allocation(world, TASK3_PAYLOAD_GBPS if payload_gbps is None else payload_gbps, seed)
        loaded = sorted((lid for lid, link in baseline.fabric.links.items() if link.load_gbps > 0),
                        key=lambda lid: int(lid.rsplit("-", 1)[1]))
        if not loaded:
            raise SetupError("Task3 needs at least one loaded intra-DC link")
        link = random.Random(f"task3/{seed}").choice(loaded)
        world = inject_failure(baseline, Mpi(link, TASK3_MPI_DB))
        truth.update(link=link, ratio_db=TASK3_MPI_DB)
    else:
        span = "span3" if seed % 2 == 0 else "span4"
        baseline = world
        world = inject_failure(world, FiberAging(span, TASK4_AGING_DB))
        truth.update(span=span, delta_db=TASK4_AGING_DB)
    return TaskSetup(task, seed, baseline, world, params, truth)


def goal_text(setup: TaskSetup, entry_id: str, entry_name: str) -> str:
    h = Handoff(entry_id, f"Hello {entry_name}, this is the Operator.", QUERIES[setup.task], setup.params)
    return f"{QUERIES[setup.task]}\n{encode_handoff(h, entry_name)}"


# -- trial logs --------------------------------------------------------------------


@dataclass
class TrialLog:
    meta: dict[str, Any]
    truth: dict[str, Any]
    transcripts: list[Transcript]
    plan_log: list[dict]
    audit: list[dict]
    baseline: dict
    world: dict

    @property
    def top_level(self) -> list[Transcript]:
        return [t for t in self.transcripts if t.caller is None]

    def to_records(self) -> list[dict]:
        records: list[dict] = [{"type": "trial", **self.meta}, {"type": "ground_truth", **self.truth}]
        for t in self.transcripts:
            records.append({"type": "activation", **t.header()})
            records.extend({"type": "message", "activation": t.activation_id, **m.to_dict()}
                           for m in t.messages)
        records.extend({"type": "plan_revision", **p} for p in self.plan_log)
        records.extend({"type": "rpc", **a} for a in self.audit)
        records.append({"type": "world", "phase": "baseline", "snapshot": self.baseline})
        records.append({"type": "world", "phase": "final", "snapshot": self.world})
        return records

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.to_records())

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "TrialLog":
        meta, truth, plan_log, audit, worlds = {}, {}, [], [], {}
        headers: list[dict] = []
        messages: dict[str, list[Message]] = {}
        for r in records:
            r = dict(r)
            kind = r.pop("type")
            if kind == "trial":
                meta = r
            elif kind == "ground_truth":
                truth = r
            elif kind == "activation":
                headers.append(r)
                messages.setdefault(r["activation"], [])
            elif kind == "message":
                messages.setdefault(r.pop("activation"), []).append(Message.from_dict(r))
            elif kind == "plan_revision":
                plan_log.append(r)
            elif kind == "rpc":
                audit.append(r)
            elif kind == "world":
                worlds[r["phase"]] = r["snapshot"]
        transcripts = [Transcript.from_parts(h, messages[h["activation"]]) for h in headers]
        return cls(meta, truth, transcripts, plan_log, audit, worlds.get("baseline", {}), worlds.get("final", {}))

    @classmethod
    def read(cls, path: str | Path) -> "TrialLog":
        with open(path, encoding="utf-8") as fh:
            return cls.from_records(json.loads(line) for line in fh if line.strip())


@dataclass
class TrialResult:
    task: str
    trial_index: int
    seed: int
    mode: str
    checkpoints: list = field(default_factory=list)
    completed: bool = False
    steps: int = 0
    terminations: list[str] = field(default_factory=list)
    declarations: dict[str, int] = field(default_factory=dict)
    final_answer: str | None = None
    log: TrialLog | None = None

    @property
    def trial_id(self) -> str:
        return f"{self.task}/{self.mode}/trial-{self.trial_index}"

    def to_dict(self) -> dict:
        return {"trial_id": self.trial_id, "task": self.task, "trial_index": self.trial_index,
                "seed": self.seed, "mode": self.mode, "completed": self.completed, "steps": self.steps,
                "terminations": self.terminations, "declarations": self.declarations,
                "final_answer": self.final_answer,
                "checkpoints": [c.to_dict() for c in self.checkpoints]}


def run_task(task: str, mode: str, backend: Backend | None = None, seed: int = 0, *,
             policy: str | None = None, trial_index: int = 0, limits: Limits = Limits(),
             scenario: Scenario | None = None, corpus_dir: str | Path | None = None,
             payload_gbps: float | None = None, backend_name: str | None = None) -> TrialResult:
    from autonoc.harness.checkpoints import evaluate_checkpoints, summarize_trial

    task = task_id(task)
    mode = MODE_ALIASES[mode]
    setup = setup_task(task, seed, scenario, payload_gbps=payload_gbps)
    if backend is None:
        policy = policy or DEFAULT_POLICY[mode]
        backend = scripted_backend(policy, mode)
        backend_name = backend_name or "scripted"
    corpus = Path(corpus_dir) if corpus_dir else CORPUS_DIR
    if not corpus.is_dir():
        raise SetupError(f"corpus directory {corpus} not found")
    scenario = scenario or Scenario.default()
    plane = ControlPlane(setup.world, isolation_policy(), detection=scenario.detection,
                         baseline=setup.baseline, noise_seed=seed)
    agents = agents_for(mode)
    system = AgentSystem(agents, build_registry(), backend, coi=COI_FOR_MODE[mode], limits=limits,
                         services={"plane": plane, "index": load_corpus(corpus)})
    entry = agents[0] if mode == "single_agent" else system.agents[ENTRY[task]]
    system.run(entry.id, goal_text(setup, entry.id, entry.identity_name))
    log = TrialLog(
        meta={"task": task, "mode": mode, "seed": seed, "trial_index": trial_index,
              "policy": policy, "backend": backend_name or getattr(backend, "kind", "custom"),
              "max_steps": limits.max_steps},
        truth=setup.truth,
        transcripts=list(system.transcripts),
        plan_log=list(system.plan_log),
        audit=[a.to_dict() for a in plane.audit],
        baseline=setup.baseline.snapshot(),
        world=plane.world.snapshot(),
    )
    return summarize_trial(log, evaluate_checkpoints(log))


def run_trials(task: str, mode: str, n: int, base_seed: int = 0, *, backend_factory=None,
               policy: str | None = None, **kwargs) -> list[TrialResult]:
    """Trial ``i`` runs with seed ``base_seed + i`` on its own fresh world."""
    if n < 1:
        raise ValueError("n must be >= 1")
    results = []
    for i in range(n):
        backend = backend_factory() if backend_factory else None
        results.append(run_task(task, mode, backend, base_seed + i, policy=policy, trial_index=i, **kwargs))
    return results

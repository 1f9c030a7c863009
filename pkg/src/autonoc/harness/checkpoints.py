"""Checkpoint predicates, computed only from a persisted trial log."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, Callable, Iterator

from autonoc.agents.session import FAILED_MARKER
from autonoc.coi import HandoffParseError, NotAHandoffError, parse_handoff
from autonoc.harness.programs import OSNR_MIN_DB, RX_POWER_RANGE_DBM
from autonoc.harness.tasks import TrialLog, TrialResult
from autonoc.optical.fabric import Fabric
from autonoc.traffic import FlowAllocation, capacity_check

DESCRIPTIONS = {
    "Task1": ("demands ingested", "allocation plan created", "allocation passes capacity_check",
              "allocation applied via the controller", "read-back matches the allocation"),
    "Task2": ("request handoff parsed by the backbone planner", "free channel found on all 4 spans",
              "both end transponders configured", "power and OSNR meet thresholds",
              "completion handoff returned to the requester"),
    "Task3": ("anomaly detected", "classified as Interference", "correct link localized",
              "reroute computed avoiding the link", "reroute applied and capacity_check clean"),
    "Task4": ("cross-domain plan created", "backbone-A monitors queried", "backbone-B monitors queried",
              "fiber-aging guide retrieved", "correct span named in the final answer"),
}


@dataclass(frozen=True)
class Checkpoint:
    id: str
    description: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"id": self.id, "description": self.description, "passed": self.passed, "detail": self.detail}


# -- log queries ---------------------------------------------------------------


def tool_results(log: TrialLog, name: str) -> Iterator[tuple[str, Any]]:
    """(agent id, decoded payload) for every tool message named ``name``; errors skipped."""
    for t in log.transcripts:
        for m in t.messages:
            if m.role == "tool" and m.name == name:
                payload = m.json_payload()
                if isinstance(payload, dict) and "error" in payload:
                    continue
                yield t.agent_id, payload if payload is not None else m.content


def audit_ok(log: TrialLog, domain: str, verb: str) -> list[int]:
    """Audit positions of successful ``verb`` calls on ``domain``."""
    return [i for i, a in enumerate(log.audit)
            if a["domain"] == domain and a["verb"] == verb and a["outcome"] == "ok"]


def _fabric(snapshot: dict) -> Fabric:
    fab = snapshot["fabric"]
    cap = fab["links"][0]["capacity_gbps"] if fab["links"] else 400.0
    return Fabric.build(len(fab["leaves"]), len(fab["spines"]), fab["servers_per_leaf"], cap)


def _world_allocation(snapshot: dict) -> FlowAllocation | None:
    raw = snapshot.get("allocation")
    return None if raw is None else FlowAllocation.from_dict(raw)


def _clean(snapshot: dict) -> tuple[bool, str]:
    alloc = _world_allocation(snapshot)
    if alloc is None:
        return False, "no allocation in the final world"
    violations = capacity_check(alloc, _fabric(snapshot))
    over = [link["id"] for link in snapshot["fabric"]["links"] if link["load_gbps"] > link["capacity_gbps"]]
    if violations or over:
        return False, f"violations on {[v.element for v in violations] + over}"
    return True, ""


def _readback_matches(snapshot: dict) -> bool:
    alloc = _world_allocation(snapshot)
    if alloc is None:
        return False
    return all(abs(link["load_gbps"] - alloc.loads.get(link["id"], 0.0)) <= 1e-9
               for link in snapshot["fabric"]["links"])


def final_answer(log: TrialLog) -> str | None:
    top = log.top_level
    return top[-1].final_answer if top else None


# -- per-task predicates ---------------------------------------------------------


def _task1(log: TrialLog) -> list[tuple[bool, str]]:
    ingested = list(tool_results(log, "ingest_demands"))
    planned = list(tool_results(log, "allocate_flows"))
    clean, why = _clean(log.world)
    applies = audit_ok(log, "intra-dc", "apply_allocation")
    reads = [i for i in audit_ok(log, "intra-dc", "get_topology") if applies and i > applies[-1]]
    return [
        (bool(ingested), f"{len(ingested)} ingest result(s)"),
        (bool(planned), f"{len(planned)} allocation(s) computed"),
        (clean and bool(planned), why),
        (bool(applies), f"{len(applies)} successful apply call(s)"),
        (bool(reads) and _readback_matches(log.world), f"{len(reads)} read-back(s) after apply"),
    ]


def _parse(text: str):
    try:
        return parse_handoff(text)
    except (NotAHandoffError, HandoffParseError):
        return None


def _task2(log: TrialLog) -> list[tuple[bool, str]]:
    delivered = [t for t in log.transcripts if t.agent_id == "backbone-planner" and t.caller is not None]
    c1 = any(len(t.messages) > 1 and (h := _parse(t.messages[1].content)) is not None
             and h.to == "backbone-planner" and t.termination != "validation_abort" for t in delivered)
    tid = log.truth["idle_transponder"]
    tr = next((t for t in log.world["backbone"]["transponders"] if t["id"] == tid), None)
    channel = tr["channel"] if tr else None
    base = log.baseline["backbone"]["transponders"]
    used_a = {t["channel"] for t in base if t["id"] != tid}
    used_b = {t["rx_channel"] for t in base if t["id"] != tid}
    listed = bool(audit_ok(log, "backbone-A", "list_channels")) and bool(audit_ok(log, "backbone-B", "list_channels"))
    c2 = listed and channel is not None and channel not in used_a and channel not in used_b
    c3 = tr is not None and channel is not None and tr["rx_channel"] == channel
    entry = next((c for c in log.world["backbone"]["channels"] if c["index"] == channel), None) if c3 else None
    lo, hi = RX_POWER_RANGE_DBM
    c4 = (entry is not None and "osnr_db" in entry and entry["osnr_db"] >= OSNR_MIN_DB
          and lo <= entry["rx_power_dbm"] <= hi)
    c5 = False
    for t in log.transcripts:
        if t.agent_id != "dci-planner":
            continue
        for m in t.messages:
            h = _parse(m.content) if m.role == "tool" and m.name == "handoff" else None
            if h is not None and h.to == "dci-planner" and "Backbone Planner" in h.greeting \
                    and h.params.get("status") == "done":
                c5 = True
    return [(c1, f"{len(delivered)} delivered activation(s)"), (c2, f"channel={channel}"),
            (c3, f"{tid} channel={channel}"), (c4, f"quality={json.dumps(entry, sort_keys=True)}"), (c5, "")]


def _task3(log: TrialLog) -> list[tuple[bool, str]]:
    link = log.truth["link"]
    alarms = [p for _, p in tool_results(log, "list_alarms") if p.get("domain") == "intra-dc" and p["alarms"]]
    labels = [p["label"] for _, p in tool_results(log, "classify_failure")]
    located = [p["element"] for _, p in tool_results(log, "localize_failure")]
    reroutes = [p for _, p in tool_results(log, "reroute_flows")]
    avoided = [r for r in reroutes if not r["unmovable"] and "allocation" in r
               and not any(link in f["links"] for f in r["allocation"]["flows"])]
    clean, why = _clean(log.world)
    alloc = _world_allocation(log.world)
    avoids = alloc is not None and not any(link in f.links for f in alloc.flows)
    applied = bool(audit_ok(log, "intra-dc", "apply_allocation"))
    return [(bool(alarms), f"{len(alarms)} alarm listing(s)"),
            ("Interference" in labels, f"labels={labels}"),
            (link in located, f"localized={located} truth={link}"),
            (bool(avoided), f"{len(avoided)} valid reroute(s)"),
            (applied and clean and avoids, why or f"avoids={avoids} applied={applied}")]


_SPAN = re.compile(r"\bspan\d+\b")


def _task4(log: TrialLog) -> list[tuple[bool, str]]:
    creates = [p for p in log.plan_log if p["planner"] == "backbone-planner" and p["event"] == "create"]
    agents = {s["assigned_agent"] for p in creates for s in p["table"]["steps"]}
    c1 = {"backbone-a-agent", "backbone-b-agent"} <= agents
    docs = {h["doc_id"] for _, p in tool_results(log, "retrieve") for h in p["hits"]}
    answer = final_answer(log) or ""
    named = set(_SPAN.findall(answer))
    return [(c1, f"plan agents={sorted(agents)}"),
            (bool(audit_ok(log, "backbone-A", "get_monitors")), ""),
            (bool(audit_ok(log, "backbone-B", "get_monitors")), ""),
            ("fiber_aging_guide" in docs, f"docs={sorted(docs)}"),
            (named == {log.truth["span"]}, f"named={sorted(named)} truth={log.truth['span']}")]


PREDICATES: dict[str, Callable[[TrialLog], list[tuple[bool, str]]]] = {
    "Task1": _task1, "Task2": _task2, "Task3": _task3, "Task4": _task4}


def evaluate_checkpoints(log: TrialLog) -> list[Checkpoint]:
    task = log.meta["task"]
    outcomes = PREDICATES[task](log)
    return [Checkpoint(f"c{i}", desc, bool(ok), detail)
            for i, (desc, (ok, detail)) in enumerate(zip(DESCRIPTIONS[task], outcomes), start=1)]


def summarize_trial(log: TrialLog, checkpoints: list[Checkpoint]) -> TrialResult:
    top = log.top_level
    answer = final_answer(log)
    finished = bool(top) and top[-1].termination == "final_answer" and not answer.startswith(FAILED_MARKER)
    checked = [t.declaration for t in log.transcripts if t.declaration is not None]
    return TrialResult(
        task=log.meta["task"], trial_index=log.meta["trial_index"], seed=log.meta["seed"],
        mode=log.meta["mode"], checkpoints=checkpoints,
        completed=finished and all(c.passed for c in checkpoints),
        steps=sum(t.step_count for t in log.transcripts),
        terminations=[t.termination for t in log.transcripts],
        declarations={"checked": len(checked), "passed": sum(d.passed for d in checked)},
        final_answer=answer, log=log)


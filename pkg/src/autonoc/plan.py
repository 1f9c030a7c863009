"""Plan tracking table: an immutable state machine owned by one planner.

Step lifecycle: pending -> in_progress -> done | failed.  A failed step with
retry budget left is reset to pending by ``next_action``; once the budget is
spent the plan finishes incomplete.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from autonoc.coi import Handoff
from autonoc.errors import ConfigurationError, IllegalTransitionError, NotFoundError

STATUSES = ("pending", "in_progress", "done", "failed")
DEFAULT_RETRIES = 1


@dataclass(frozen=True)
class PlanStep:
    step_id: int
    description: str
    assigned_agent: str
    status: str = "pending"
    result_summary: str | None = None
    attempts: int = 0
    params: Mapping[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"step_id": self.step_id, "description": self.description,
                "assigned_agent": self.assigned_agent, "status": self.status,
                "result_summary": self.result_summary, "attempts": self.attempts,
                "params": dict(self.params)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "PlanStep":
        return cls(int(data["step_id"]), data["description"], data["assigned_agent"],
                   data.get("status", "pending"), data.get("result_summary"),
                   int(data.get("attempts", 0)), dict(data.get("params") or {}))


@dataclass(frozen=True)
class PlanTable:
    goal: str
    steps: tuple[PlanStep, ...]
    revision: int = 0

    @property
    def complete(self) -> bool:
        return all(s.status == "done" for s in self.steps)

    @property
    def in_progress(self) -> PlanStep | None:
        return next((s for s in self.steps if s.status == "in_progress"), None)

    def step(self, step_id: int) -> PlanStep:
        for s in self.steps:
            if s.step_id == step_id:
                return s
        raise NotFoundError(f"plan has no step {step_id}")

    def _with(self, step: PlanStep) -> "PlanTable":
        steps = tuple(step if s.step_id == step.step_id else s for s in self.steps)
        return PlanTable(self.goal, steps, self.revision + 1)

    def to_dict(self) -> dict:
        return {"goal": self.goal, "revision": self.revision, "complete": self.complete,
                "steps": [s.to_dict() for s in self.steps]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "PlanTable":
        return cls(data["goal"], tuple(PlanStep.from_dict(s) for s in data["steps"]),
                   int(data.get("revision", 0)))


@dataclass(frozen=True)
class DispatchPolicy:
    retries: int = DEFAULT_RETRIES
    planner_name: str = "Planner"
    identities: Mapping[str, str] = field(default_factory=dict)  # agent id -> identity name


@dataclass(frozen=True)
class Dispatch:
    kind: str  # "start" | "wait" | "replan" | "finish"
    step_id: int | None = None
    handoff: Handoff | None = None
    complete: bool = False
    reason: str = ""

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "step_id": self.step_id, "complete": self.complete, "reason": self.reason}
        if self.handoff is not None:
            h = self.handoff
            out["handoff"] = {"to": h.to, "greeting": h.greeting, "query": h.query, "params": dict(h.params)}
        return out


def create_plan(goal: str, steps: Sequence[Mapping], agents: Iterable[str]) -> PlanTable:
    """``steps`` items carry ``description``, ``assigned_agent`` and optional ``params``."""
    known = set(agents)
    if not steps:
        raise ConfigurationError("steps", "a plan needs at least one step")
    out = []
    for i, raw in enumerate(steps, start=1):
        agent = raw.get("assigned_agent") or raw.get("agent")
        if agent not in known:
            raise ConfigurationError(f"steps[{i - 1}].assigned_agent", f"unknown agent {agent!r}")
        desc = str(raw.get("description") or "").strip()
        if not desc:
            raise ConfigurationError(f"steps[{i - 1}].description", "must not be empty")
        params = {str(k): str(v) for k, v in (raw.get("params") or {}).items()}
        out.append(PlanStep(i, desc, agent, params=params))
    return PlanTable(goal, tuple(out), 0)


def advance_plan(table: PlanTable, step_id: int, outcome: str, summary: str) -> PlanTable:
    if outcome not in ("done", "failed"):
        raise IllegalTransitionError(f"outcome must be 'done' or 'failed', got {outcome!r}")
    step = table.step(step_id)
    if step.status != "in_progress":
        raise IllegalTransitionError(f"step {step_id} is {step.status}, only in_progress steps advance")
    return table._with(replace(step, status=outcome, result_summary=summary))


def next_action(table: PlanTable, policy: DispatchPolicy = DispatchPolicy()) -> tuple[Dispatch, PlanTable]:
    """Decide the planner's next move; returns the dispatch and the updated table."""
    current = table.in_progress
    if current is not None:
        return Dispatch("wait", current.step_id, reason=f"step {current.step_id} in progress"), table
    budget = 1 + policy.retries
    for s in table.steps:
        if s.status == "failed" and s.attempts >= budget:
            return Dispatch("finish", s.step_id, complete=False,
                            reason=f"step {s.step_id} failed after {s.attempts} attempt(s)"), table
    for s in table.steps:
        if s.status == "failed":
            reset = replace(s, status="pending", result_summary=None)
            return Dispatch("replan", s.step_id, reason=f"retrying step {s.step_id}"), table._with(reset)
    for s in table.steps:
        if s.status == "pending":
            params = dict(s.params)
            for prior in table.steps:
                if prior.status == "done" and prior.result_summary is not None:
                    params[f"result.{prior.step_id}"] = prior.result_summary
            identity = policy.identities.get(s.assigned_agent, s.assigned_agent)
            handoff = Handoff(s.assigned_agent, f"Hello {identity}, this is {policy.planner_name}.",
                              s.description, params)
            started = replace(s, status="in_progress", attempts=s.attempts + 1)
            return Dispatch("start", s.step_id, handoff), table._with(started)
    return Dispatch("finish", None, complete=True, reason="all steps done"), table

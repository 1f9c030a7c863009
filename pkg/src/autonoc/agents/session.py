"""Multi-agent session: call-and-return handoffs, plan tables, CoI wiring.

A handoff runs the target agent to completion inside the caller's tool call.
The target sees the caller's handoff call followed by the delivery tool
message; the caller gets back a completion block addressed to itself.  When
the caller is a planner with a step in progress for that target, the step is
advanced from the target's outcome, so a silent or aborted activation always
lands in the plan table as a failure.
"""

from __future__ import annotations

import logging
from typing import Iterable, Mapping, Sequence

from autonoc.agents.messages import FINAL_MARKER, Message
from autonoc.agents.runtime import (
    AgentSpec,
    Backend,
    DeclarationCheck,
    Limits,
    Tool,
    ToolContext,
    ToolFailure,
    ToolRegistry,
    Transcript,
    run_react_loop,
)
from autonoc.coi import Handoff, encode_handoff, make_handoff_tool_result, pseudo_system_header
from autonoc.plan import DEFAULT_RETRIES, DispatchPolicy, PlanTable, advance_plan, create_plan, next_action

log = logging.getLogger(__name__)

COI_MODES = ("strict", "monitor", "off")
FAILED_MARKER = "FINAL: FAILED"
COMPLETION_QUERY = "handoff complete"
RESUME_TEXT = "Resume the existing plan: call next_action and continue until it reports finish."
MAX_RESUMES = 2


def final_text(t: Transcript) -> str | None:
    answer = t.final_answer
    return None if answer is None else answer[len(FINAL_MARKER):].strip()


def activation_status(t: Transcript) -> str:
    answer = t.final_answer
    return "done" if answer is not None and not answer.startswith(FAILED_MARKER) else "failed"


class AgentSystem:
    def __init__(self, agents: Iterable[AgentSpec], registry: ToolRegistry, backend: Backend, *,
                 coi: str = "strict", limits: Limits = Limits(), retries: int = DEFAULT_RETRIES,
                 services: Mapping | None = None, max_resumes: int = MAX_RESUMES):
        if coi not in COI_MODES:
            raise ValueError(f"coi must be one of {COI_MODES}")
        self.agents = {a.id: a for a in agents}
        self.registry = registry
        self.backend = backend
        self.coi = coi
        self.limits = limits
        self.retries = retries
        self.services = dict(services or {})
        self.max_resumes = max_resumes
        self.transcripts: list[Transcript] = []  # activation start order
        self.plans: dict[str, PlanTable] = {}  # plan scope -> table
        self.plan_log: list[dict] = []
        self._scope: dict[str, str] = {}
        self._count = 0

    # -- activations ---------------------------------------------------------

    def activate(self, agent_id: str, opening: Sequence[Message], *, caller: str | None = None,
                 parent: str | None = None, check: DeclarationCheck | None = None,
                 scope: str | None = None) -> Transcript:
        self._count += 1
        aid = f"act-{self._count:03d}"
        self._scope[aid] = scope or aid
        slot = len(self.transcripts)
        self.transcripts.append(Transcript(aid, agent_id))  # placeholder keeps start order
        t = run_react_loop(self.agents[agent_id], list(opening), self.backend, self.limits,
                           registry=self.registry, activation_id=aid, declaration_check=check,
                           system=self, caller=caller, parent=parent)
        self.transcripts[slot] = t
        return t

    def run(self, agent_id: str, goal: str) -> Transcript:
        """Top-level activation; an unfinished planner is resumed on its own table."""
        goal_msg = Message("user", goal)
        t = self.activate(agent_id, [goal_msg])
        scope = t.activation_id
        resumes = 0
        while (t.termination != "final_answer" and scope in self.plans
               and next_action(self.plans[scope], self._policy(agent_id))[0].kind != "finish"
               and resumes < self.max_resumes):
            resumes += 1
            log.info("resuming %s on plan %s (%d)", agent_id, scope, resumes)
            t = self.activate(agent_id, [goal_msg, Message("user", RESUME_TEXT)], scope=scope)
        return t

    def scope_of(self, activation_id: str) -> str:
        return self._scope[activation_id]

    # -- plans ---------------------------------------------------------------

    def _policy(self, planner_id: str) -> DispatchPolicy:
        return DispatchPolicy(self.retries, self.agents[planner_id].identity_name,
                              {a.id: a.identity_name for a in self.agents.values()})

    def _store(self, ctx: ToolContext, table: PlanTable, event: str) -> None:
        scope = self._scope[ctx.activation_id]
        self.plans[scope] = table
        self.plan_log.append({"scope": scope, "activation": ctx.activation_id, "planner": ctx.agent.id,
                              "event": event, "table": table.to_dict()})

    def _table(self, ctx: ToolContext) -> PlanTable:
        table = self.plans.get(self._scope[ctx.activation_id])
        if table is None:
            raise ToolFailure("no-plan", "create_plan must be called first")
        return table

    # -- handoff ---------------------------------------------------------------

    def handoff(self, ctx: ToolContext, args: Mapping) -> str:
        caller = ctx.agent
        target = self.agents.get(str(args.get("to", "")))
        if target is None:
            raise ToolFailure("routing", f"no agent {args.get('to')!r}")
        if target.id == caller.id:
            raise ToolFailure("routing", "an agent cannot hand off to itself")
        params = {str(k): str(v) for k, v in (args.get("params") or {}).items()}
        h = Handoff(target.id, str(args.get("greeting", "")), str(args.get("query", "")), params)
        if self.coi == "off":
            delivery = Message("tool", encode_handoff(h, target.identity_name),
                               tool_call_id=ctx.call.id, name="handoff")
            check = None
        else:
            delivery = make_handoff_tool_result(h, target, sender=caller.identity_name,
                                                tool_call_id=ctx.call.id)
            check = DeclarationCheck(target.identity_name, caller.identity_name, self.coi == "strict")
        opening = [Message("assistant", "", (ctx.call,), name=caller.id), delivery]
        t = self.activate(target.id, opening, caller=caller.id, parent=ctx.activation_id, check=check)

        status = activation_status(t)
        result = final_text(t)
        if result is None:
            result = f"{t.termination}: {t.error or 'no final answer'}"
        scope = self._scope[ctx.activation_id]
        table = self.plans.get(scope)
        step = table.in_progress if table is not None else None
        if step is not None and step.assigned_agent == target.id:
            self._store(ctx, advance_plan(table, step.step_id, status, result), "advance")

        reply = Handoff(caller.id, f"Hello {caller.identity_name}, this is {target.identity_name}.",
                        COMPLETION_QUERY, {"activation": t.activation_id, "result": result,
                                           "status": status, "termination": t.termination})
        block = encode_handoff(reply, caller.identity_name)
        if self.coi == "off":
            return block
        header = pseudo_system_header(caller.identity_name, caller.core_responsibility, target.identity_name)
        return f"{header}\n{block}"


# -- tools bound to the session ------------------------------------------------


def _system(ctx: ToolContext) -> AgentSystem:
    if not isinstance(ctx.system, AgentSystem):
        raise ToolFailure("no-session", "tool requires a multi-agent session")
    return ctx.system


def _handoff(ctx: ToolContext, args: dict):
    return _system(ctx).handoff(ctx, args)


def _create_plan(ctx: ToolContext, args: dict):
    system = _system(ctx)
    scope = system.scope_of(ctx.activation_id)
    if scope in system.plans:
        raise ToolFailure("conflict", "a plan already exists for this activation")
    table = create_plan(str(args.get("goal", "")), list(args.get("steps") or ()), system.agents)
    system._store(ctx, table, "create")
    return table.to_dict()


def _next_action(ctx: ToolContext, args: dict):
    system = _system(ctx)
    dispatch, table = next_action(system._table(ctx), system._policy(ctx.agent.id))
    if table is not system.plans[system.scope_of(ctx.activation_id)]:
        system._store(ctx, table, dispatch.kind)
    return {**dispatch.to_dict(), "revision": table.revision}


def _advance_plan(ctx: ToolContext, args: dict):
    system = _system(ctx)
    table = advance_plan(system._table(ctx), int(args["step_id"]), str(args["outcome"]),
                         str(args.get("summary", "")))
    system._store(ctx, table, "advance")
    return table.to_dict()


_OBJ = {"type": "object"}
SESSION_TOOLS = (
    Tool("handoff", "Transfer a task to another agent and wait for its completion report.", _handoff,
         {"type": "object", "required": ["to", "greeting", "query"],
          "properties": {"to": {"type": "string"}, "greeting": {"type": "string"},
                         "query": {"type": "string"},
                         "params": {"type": "object", "additionalProperties": {"type": "string"}}}}),
    Tool("create_plan", "Record a step-by-step plan; each step names the agent that owns it.", _create_plan,
         {"type": "object", "required": ["goal", "steps"],
          "properties": {"goal": {"type": "string"},
                         "steps": {"type": "array", "items": {
                             "type": "object", "required": ["description", "assigned_agent"],
                             "properties": {"description": {"type": "string"},
                                            "assigned_agent": {"type": "string"}, "params": _OBJ}}}}}),
    Tool("next_action", "Ask the plan table what to do next (start a step, wait, replan or finish).",
         _next_action, {"type": "object", "properties": {}}),
    Tool("advance_plan", "Mark the in-progress step done or failed with a summary.", _advance_plan,
         {"type": "object", "required": ["step_id", "outcome"],
          "properties": {"step_id": {"type": "integer"}, "outcome": {"enum": ["done", "failed"]},
                         "summary": {"type": "string"}}}),
)
PLANNER_TOOLS = tuple(t.name for t in SESSION_TOOLS)

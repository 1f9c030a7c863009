import pytest

import suites
from autonoc.agents.backends import Rule, RulePolicy, ScriptedBackend
from autonoc.agents.messages import assistant, call
from autonoc.agents.runtime import AgentSpec, Limits, Tool, ToolRegistry
from autonoc.agents.session import SESSION_TOOLS, AgentSystem
from autonoc.coi import declaration
from autonoc.errors import ConfigurationError, IllegalTransitionError, NotFoundError
from autonoc.plan import DispatchPolicy, PlanTable, advance_plan, create_plan, next_action

AGENTS = ("alpha", "beta")


def two_step():
    return create_plan("goal", [{"description": "first", "assigned_agent": "alpha"},
                                {"description": "second", "assigned_agent": "beta", "params": {"x": 1}}], AGENTS)


def test_create_plan_numbers_steps():
    t = two_step()
    assert [s.step_id for s in t.steps] == [1, 2]
    assert all(s.status == "pending" and s.attempts == 0 for s in t.steps)
    assert t.steps[1].params == {"x": "1"}
    assert PlanTable.from_dict(t.to_dict()) == t


@pytest.mark.parametrize("steps,field", [
    ([], "steps"),
    ([{"description": "x", "assigned_agent": "gamma"}], "steps[0].assigned_agent"),
    ([{"description": " ", "assigned_agent": "alpha"}], "steps[0].description"),
])
def test_create_plan_rejects(steps, field):
    with pytest.raises(ConfigurationError) as exc:
        create_plan("goal", steps, AGENTS)
    assert exc.value.field == field


def test_dispatch_sequence_with_results_forwarded():
    policy = DispatchPolicy(1, "Boss", {"alpha": "Alpha Agent"})
    d, t = next_action(two_step(), policy)
    assert d.kind == "start" and d.step_id == 1
    assert d.handoff.to == "alpha" and d.handoff.greeting == "Hello Alpha Agent, this is Boss."
    assert next_action(t, policy)[0].kind == "wait"
    t = advance_plan(t, 1, "done", "rate=400")
    d, t = next_action(t, policy)
    assert d.kind == "start" and d.handoff.params == {"x": "1", "result.1": "rate=400"}
    t = advance_plan(t, 2, "done", "ok")
    d, _ = next_action(t, policy)
    assert d.kind == "finish" and d.complete and t.complete


def test_failed_step_retried_then_finishes_incomplete():
    policy = DispatchPolicy(1)
    _, t = next_action(two_step(), policy)
    t = advance_plan(t, 1, "failed", "boom")
    d, t = next_action(t, policy)
    assert d.kind == "replan" and t.step(1).status == "pending"
    d, t = next_action(t, policy)
    assert d.kind == "start" and t.step(1).attempts == 2
    t = advance_plan(t, 1, "failed", "boom")
    d, _ = next_action(t, policy)
    assert d.kind == "finish" and not d.complete


def test_illegal_transitions():
    t = two_step()
    with pytest.raises(IllegalTransitionError):
        advance_plan(t, 1, "done", "x")  # still pending
    _, t = next_action(t)
    with pytest.raises(IllegalTransitionError):
        advance_plan(t, 1, "in_progress", "x")
    with pytest.raises(NotFoundError):
        advance_plan(t, 9, "done", "x")


def test_revision_increments_on_every_change():
    t = two_step()
    _, t1 = next_action(t)
    t2 = advance_plan(t1, 1, "done", "s")
    assert (t.revision, t1.revision, t2.revision) == (0, 1, 2)


def test_model_check_no_stuck_states():
    out = suites.plan_model_check(max_steps=4)
    assert out["stuck"] == [] and out["regress"] == []
    assert out["within_bound"]
    for (retries, n), (worst, bound) in out["fresh_worst"].items():
        assert worst == bound == n * (1 + retries)


# -- a looping task agent cannot stall the planner --------------------------------


def _last_tool(v):
    tools = [m for m in v.own if m.role == "tool"]
    return tools[-1] if tools else None


def _planner_act(v):
    last = _last_tool(v)
    if last is None:
        return assistant("", call("create_plan", goal="g", steps=[{"description": "spin", "assigned_agent": "spinner"}]))
    if last.name != "next_action":
        return assistant("", call("next_action"))
    d = last.json_payload()
    if d["kind"] == "start":
        h = d["handoff"]
        return assistant("", call("handoff", to=h["to"], greeting=h["greeting"], query=h["query"], params=h["params"]))
    if d["kind"] == "finish":
        return assistant("FINAL: done" if d["complete"] else f"FINAL: FAILED {d['reason']}")
    return assistant("", call("next_action"))


def _spinner_act(v):
    if v.turns == 0:
        return assistant(declaration("Spinner", "Boss"), call("noop"))
    return assistant("", call("noop"))


def test_looping_task_agent_is_failed_and_retried():
    planner = AgentSpec("boss", "Boss", "plan", "planner", tuple(t.name for t in SESSION_TOOLS))
    spinner = AgentSpec("spinner", "Spinner", "spin", "task", ("noop",))
    registry = ToolRegistry(list(SESSION_TOOLS) + [Tool("noop", "does nothing", lambda ctx, a: {"ok": True})])
    always = lambda v: True  # noqa: E731
    backend = ScriptedBackend({"boss": RulePolicy("boss", (Rule("act", always, _planner_act),)),
                               "spinner": RulePolicy("spin", (Rule("spin", always, _spinner_act),))})
    system = AgentSystem([planner, spinner], registry, backend, limits=Limits(12), retries=1)
    top = system.run("boss", "do the thing")
    spins = [t for t in system.transcripts if t.agent_id == "spinner"]
    assert [t.termination for t in spins] == ["step_limit", "step_limit"]
    assert all(t.declaration.passed for t in spins)
    assert top.termination == "final_answer" and top.final_answer.startswith("FINAL: FAILED")
    (table,) = system.plans.values()
    assert table.step(1).status == "failed" and table.step(1).attempts == 2

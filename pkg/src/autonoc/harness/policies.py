"""Shipped scripted policy sets.

golden       every agent follows its program.
adversarial  every agent reached by a handoff loses its identity: it skips or
             garbles the declaration and answers FINAL without doing the work.
susceptible  like adversarial, but only when the delivery carries no
             pseudo-system header, and then only for a seeded fraction of
             activations.
overwhelmed  single agent with a seeded failure (skipped verification, tool
             flooding until the step budget, premature answer) or none.
confused     single agent that always skips the last verification; on Task4
             it never queries backbone-B.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from autonoc.agents.backends import ScriptedBackend, View
from autonoc.agents.messages import Message
from autonoc.agents.runtime import AgentSpec
from autonoc.harness.programs import PROGRAMS, single_program
from autonoc.harness.script import ProgramPolicy, unit_hash

POLICY_SETS = ("golden", "adversarial", "susceptible", "overwhelmed", "confused")
DEFAULT_POLICY = {"autolight": "golden", "naive_multi": "susceptible", "single_agent": "overwhelmed"}
SUSCEPTIBILITY = 0.2
FLAVORS = ("drop", "mimic", "noack")
_SINGLE_VARIANTS = ((0.3, "golden"), (0.5, "omit"), (0.75, "flood"), (1.0, "premature"))


def confused_message(agent: AgentSpec, view: View) -> Message:
    """What an agent that lost track of who it is says next."""
    opening = view.opening.content if view.opening is not None else ""
    flavor = FLAVORS[int(unit_hash(opening, "flavor") * len(FLAVORS))]
    sender = view.sender or "the planner"
    if view.turns > 0 or flavor == "drop":
        return Message("assistant", f"FINAL: I am {sender}; the request has been forwarded.")
    if flavor == "mimic":
        return Message("assistant", f"I am {sender}. Handoff from {sender} received and verified.")
    return Message("assistant", f"I am {agent.identity_name}. Proceeding with the request.")


@dataclass(frozen=True)
class ConfusablePolicy:
    policy_id: str
    inner: ProgramPolicy
    confused: Callable[[View], bool]

    def decide(self, agent: AgentSpec, history: Sequence[Message]) -> Message:
        view = View(agent, history)
        if view.delivered and self.confused(view):
            return confused_message(agent, view)
        return self.inner.decide(agent, history)


def _always(view: View) -> bool:
    return True


def _susceptible(view: View) -> bool:
    return view.pseudo is None and unit_hash(view.opening.content, "susceptible") < SUSCEPTIBILITY


def single_variant(view: View, policy_set: str) -> str:
    if policy_set == "golden":
        return "golden"
    if policy_set == "confused":
        return "omit"
    u = unit_hash(view.opening.content if view.opening else "", "overwhelmed")
    return next(name for bound, name in _SINGLE_VARIANTS if u < bound)


def scripted_backend(policy_set: str, mode: str) -> ScriptedBackend:
    if policy_set not in POLICY_SETS:
        raise ValueError(f"unknown policy set {policy_set!r}; expected one of {POLICY_SETS}")
    if mode == "single_agent":
        policy = ProgramPolicy(f"{policy_set}/single",
                               lambda v: single_program(single_variant(v, policy_set)))
        return ScriptedBackend({"single": policy})
    policies = {}
    for agent_id, program in PROGRAMS.items():
        golden = ProgramPolicy(f"golden/{agent_id}", lambda v, p=program: p)
        if policy_set == "adversarial":
            policies[agent_id] = ConfusablePolicy(f"adversarial/{agent_id}", golden, _always)
        elif policy_set == "susceptible":
            policies[agent_id] = ConfusablePolicy(f"susceptible/{agent_id}", golden, _susceptible)
        else:
            policies[agent_id] = golden
    return ScriptedBackend(policies)

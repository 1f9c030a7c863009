"""Agent roster, domain grants and per-mode registrations."""

from __future__ import annotations

from autonoc.agents.runtime import AgentSpec
from autonoc.agents.session import PLANNER_TOOLS
from autonoc.control import IsolationPolicy
from autonoc.domains import DomainId

MODES = ("autolight", "naive_multi", "single_agent")
MODE_ALIASES = {"autolight": "autolight", "naive": "naive_multi", "naive_multi": "naive_multi",
                "single": "single_agent", "single_agent": "single_agent"}
COI_FOR_MODE = {"autolight": "strict", "naive_multi": "off", "single_agent": "off"}

PROTOCOL = (
    "Protocol: when you receive a handoff, your first message must begin with the sentence "
    "'I am <your identity>. Handoff from <sender identity> received and verified.' before any tool call. "
    "End your work with a message whose first line starts with 'FINAL:'. Start it with 'FINAL: FAILED' "
    "if you could not complete the request. Report results as key=value pairs."
)

_AGENTS = (
    ("dci-planner", "DCI Planner", "decompose data center interconnect requests into steps and dispatch them",
     "planner", PLANNER_TOOLS),
    ("backbone-planner", "Backbone Planner",
     "coordinate cross-domain backbone operations between the two backbone controllers", "planner",
     PLANNER_TOOLS),
    ("resource-allocator", "Resource-Allocator",
     "compute, check and apply intra-DC and metro resource allocations", "task",
     ("ingest_demands", "allocate_flows", "check_capacity", "assess_local_capacity", "reroute_flows",
      "apply_allocation", "get_topology", "list_channels")),
    ("failure-handler", "Failure-Handler", "detect, classify and localize intra-DC link failures", "task",
     ("list_alarms", "get_link_quality", "classify_failure", "localize_failure", "get_topology")),
    ("backbone-a-agent", "Backbone-A Controller Agent", "operate the backbone-A domain controller", "task",
     ("get_monitors", "list_channels", "set_channel", "configure_transponder", "list_alarms", "get_topology",
      "classify_failure", "localize_failure")),
    ("backbone-b-agent", "Backbone-B Controller Agent", "operate the backbone-B domain controller", "task",
     ("get_monitors", "list_channels", "configure_transponder", "list_alarms", "get_topology",
      "get_link_quality", "classify_failure", "localize_failure")),
    ("knowledge-retriever", "Knowledge Retriever",
     "retrieve device specifications and troubleshooting guides from the document corpus", "task",
     ("retrieve",)),
)

GRANTS = {
    "resource-allocator": frozenset({DomainId.INTRA_DC, DomainId.DCI_METRO}),
    "failure-handler": frozenset({DomainId.INTRA_DC}),
    "backbone-a-agent": frozenset({DomainId.BACKBONE_A}),
    "backbone-b-agent": frozenset({DomainId.BACKBONE_B}),
    "knowledge-retriever": frozenset(),
    "single": frozenset(DomainId),
}
PLANNERS = frozenset({"dci-planner", "backbone-planner"})


def _prompt(identity: str, responsibility: str) -> str:
    return f"You are {identity}. Your core responsibility: {responsibility}.\n{PROTOCOL}"


def multi_agents() -> list[AgentSpec]:
    return [AgentSpec(aid, name, resp, cat, tuple(tools), _prompt(name, resp))
            for aid, name, resp, cat, tools in _AGENTS]


def task_agent_tools() -> tuple[str, ...]:
    """Union of every task agent's toolset, in first-seen order."""
    seen: dict[str, None] = {}
    for a in multi_agents():
        if a.category == "task":
            seen.update(dict.fromkeys(a.tool_names))
    return tuple(seen)


def single_agent() -> AgentSpec:
    resp = "operate every network domain end to end without delegation"
    return AgentSpec("single", "Network Operator", resp, "task", task_agent_tools(),
                     _prompt("Network Operator", resp)
                     + " Tools act on one domain; pass domain=<backbone-A|backbone-B|dci-metro|intra-dc>.")


def agents_for(mode: str) -> list[AgentSpec]:
    mode = MODE_ALIASES[mode]
    return [single_agent()] if mode == "single_agent" else multi_agents()


def isolation_policy() -> IsolationPolicy:
    return IsolationPolicy(dict(GRANTS), PLANNERS)

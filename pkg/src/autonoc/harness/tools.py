"""Domain tools for task agents.

Controller tools go through the control plane as the calling agent, so the
isolation policy applies to every agent action.  Analysis tools are pure
functions over data the agent already holds, except that they fetch alarms
or topology through the same controller calls when not given them.
"""

from __future__ import annotations

from typing import Any, Mapping

from autonoc.agents.runtime import Tool, ToolContext, ToolFailure, ToolRegistry
from autonoc.agents.session import SESSION_TOOLS
from autonoc.control import DOMAIN_VERBS, VERBS, ControlPlane, RpcRequest
from autonoc.domains import DomainId
from autonoc.failures import Anomaly, classify_failure, localize_failure
from autonoc.retrieval import Index, default_index, retrieve
from autonoc.traffic import (
    DemandMatrix,
    FlowAllocation,
    WorkloadSpec,
    allocate_intra_dc,
    backbone_request_needed,
    capacity_check,
    generate_demands,
    reroute_avoiding,
)

_DOMAIN_PROP = {"domain": {"enum": [d.value for d in DomainId]}}


def _plane(ctx: ToolContext) -> ControlPlane:
    plane = getattr(ctx.system, "services", {}).get("plane")
    if plane is None:
        raise ToolFailure("no-controller", "no control plane attached to this session")
    return plane


def _domain(ctx: ToolContext, verb: str, args: Mapping) -> DomainId:
    if args.get("domain"):
        try:
            return DomainId.parse(args["domain"])
        except ValueError:
            raise ToolFailure("invalid-args", f"unknown domain {args['domain']!r}") from None
    grants = _plane(ctx).policy.grants.get(ctx.agent.id, frozenset())
    serving = sorted((d for d in grants if verb in DOMAIN_VERBS[d]), key=lambda d: d.value)
    if len(serving) != 1:
        raise ToolFailure("invalid-args", f"{verb} needs a domain argument")
    return serving[0]


def rpc(ctx: ToolContext, verb: str, args: Mapping) -> Any:
    domain = _domain(ctx, verb, args)
    body = {k: v for k, v in args.items() if k != "domain"}
    resp = _plane(ctx).call(domain, ctx.agent.id, RpcRequest(verb, body))
    if not resp.ok:
        raise ToolFailure(resp.error["code"], resp.error["message"])
    return resp.payload


def _rpc_tool(verb: str, description: str, props: Mapping | None = None, required=()) -> Tool:
    schema = {"type": "object", "properties": {**_DOMAIN_PROP, **(props or {})}, "required": list(required)}
    return Tool(verb, description, lambda ctx, args: rpc(ctx, verb, args), schema)


def _fabric(ctx: ToolContext):
    # reading fabric dimensions is an intra-DC operation
    rpc(ctx, "get_topology", {"domain": DomainId.INTRA_DC.value})
    return _plane(ctx).world.fabric


def _anomaly(ctx: ToolContext, args: Mapping) -> Anomaly | None:
    raw = args.get("anomaly")
    if raw is None:
        alarms = rpc(ctx, "list_alarms", {k: v for k, v in args.items() if k == "domain"})["alarms"]
        raw = alarms[0] if alarms else None
    return None if raw is None else Anomaly.from_dict(raw)


def _classify(ctx: ToolContext, args: dict):
    anomaly = _anomaly(ctx, args)
    if anomaly is None:
        raise ToolFailure("no-anomaly", "no active alarm to classify")
    return classify_failure(anomaly).to_dict()


def _localize(ctx: ToolContext, args: dict):
    anomaly = _anomaly(ctx, args)
    if anomaly is None:
        raise ToolFailure("no-anomaly", "no active alarm to localize")
    domain = _domain(ctx, "get_topology", args)
    topology = rpc(ctx, "get_topology", {"domain": domain.value}) if domain in (
        DomainId.BACKBONE_A, DomainId.BACKBONE_B) else {"elements": []}
    return {"element": localize_failure(anomaly, topology), "first_affected": anomaly.first_affected}


def _ingest(ctx: ToolContext, args: dict):
    spec = WorkloadSpec.from_dict({"kind": args.get("kind", "ring_allreduce"),
                                   "payload_gbps": args.get("payload_gbps", 0),
                                   "max_gbps": args.get("max_gbps", 0),
                                   "groups": len(_fabric(ctx).leaves)})
    matrix = generate_demands(spec, int(args.get("epoch", 0)), int(args.get("seed", 0)))
    return {"epoch": matrix.epoch, "flows": len(matrix.nonzero()), "total_gbps": matrix.total_gbps,
            "table": matrix.to_table()}


def _allocate(ctx: ToolContext, args: dict):
    alloc = allocate_intra_dc(DemandMatrix.from_table(str(args["table"])), _fabric(ctx))
    return alloc.to_dict()


def _check(ctx: ToolContext, args: dict):
    alloc = FlowAllocation.from_dict(args["allocation"])
    return {"violations": [v.to_dict() for v in capacity_check(alloc, _fabric(ctx))]}


def _assess(ctx: ToolContext, args: dict):
    return backbone_request_needed(DemandMatrix.from_table(str(args["table"])), _fabric(ctx))


def _reroute(ctx: ToolContext, args: dict):
    fabric = _fabric(ctx)
    avoid = str(args["avoid"])
    fabric.link(avoid)
    result = reroute_avoiding(FlowAllocation.from_dict(args["allocation"]), avoid, _plane(ctx).world)
    return result.to_dict()


def _retrieve(ctx: ToolContext, args: dict):
    index = getattr(ctx.system, "services", {}).get("index")
    index = index if isinstance(index, Index) else default_index()
    return {"hits": [h.to_dict() for h in retrieve(index, str(args["query"]), int(args.get("k", 3)))]}


_OBJ = {"type": "object"}
_STR = {"type": "string"}

DOMAIN_TOOLS = (
    _rpc_tool("get_monitors", "Read EDFA input/output power monitors of a backbone domain."),
    _rpc_tool("list_channels", "List wavelength channels and transponder tuning (backbone) or busy wavelengths (metro)."),
    _rpc_tool("set_channel", "Switch a backbone channel on or off.",
              {"index": {"type": "integer"}, "state": {"enum": ["on", "off"]}}, ("index", "state")),
    _rpc_tool("configure_transponder", "Tune this domain's end of a transponder to a channel.",
              {"id": _STR, "channel": {"type": ["integer", "string", "null"]}, "rate": {"type": "integer"}},
              ("id",)),
    _rpc_tool("list_alarms", "List active alarms (anomalies against the commissioning baseline)."),
    _rpc_tool("apply_allocation", "Apply a flow allocation (intra-dc) or lightpaths (dci-metro).",
              {"allocation": _OBJ, "lightpaths": {"type": "array"}}),
    _rpc_tool("get_link_quality", "Quality of a backbone channel ('chN') or an intra-DC IMDD link.",
              {"link": _STR}, ("link",)),
    _rpc_tool("get_topology", "Topology (and current allocation) of a domain."),
    Tool("classify_failure", "Classify the active alarm: PowerLoss, Interference or TransmitterFault.",
         _classify, {"type": "object", "properties": {**_DOMAIN_PROP, "anomaly": _OBJ}}),
    Tool("localize_failure", "Name the element most likely at fault for the active alarm.", _localize,
         {"type": "object", "properties": {**_DOMAIN_PROP, "anomaly": _OBJ}}),
    Tool("ingest_demands", "Generate this epoch's demand matrix from the workload description.", _ingest,
         {"type": "object", "properties": {"kind": _STR, "payload_gbps": {"type": "number"},
                                           "max_gbps": {"type": "number"}, "epoch": {"type": "integer"},
                                           "seed": {"type": "integer"}}}),
    Tool("allocate_flows", "Route a demand table over the leaf-spine fabric.", _allocate,
         {"type": "object", "properties": {"table": _STR}, "required": ["table"]}),
    Tool("check_capacity", "List capacity violations of an allocation.", _check,
         {"type": "object", "properties": {"allocation": _OBJ}, "required": ["allocation"]}),
    Tool("assess_local_capacity", "Decide whether a demand table needs backbone capacity.", _assess,
         {"type": "object", "properties": {"table": _STR}, "required": ["table"]}),
    Tool("reroute_flows", "Re-route the flows of an allocation away from one fabric link.", _reroute,
         {"type": "object", "properties": {"allocation": _OBJ, "avoid": _STR},
          "required": ["allocation", "avoid"]}),
    Tool("retrieve", "Search the device and troubleshooting document corpus.", _retrieve,
         {"type": "object", "properties": {"query": _STR, "k": {"type": "integer"}}, "required": ["query"]}),
)
assert {t.name for t in DOMAIN_TOOLS} >= set(VERBS)


def build_registry() -> ToolRegistry:
    return ToolRegistry(DOMAIN_TOOLS + SESSION_TOOLS)

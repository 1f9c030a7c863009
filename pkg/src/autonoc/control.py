"""Domain controllers behind a uniform request/response RPC contract.

Every call passes the isolation check first, then dispatches to the serving
domain's handler.  Handlers for state-changing verbs work on a copy of the
world and the copy replaces the live world only on success, so a failing
call leaves no trace except its audit record.
"""

from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from autonoc.domains import DomainId
from autonoc.errors import (
    ConfigurationError,
    ConflictError,
    InputError,
    NotFoundError,
    UnsupportedChannelError,
)
from autonoc.failures import detect_anomaly
from autonoc.optical.backbone import (
    Span,
    compute_osnr,
    compute_power_profile,
    MonitorReading,
    received_channel_power_dbm,
)
from autonoc.optical.fabric import imdd_quality
from autonoc.optical.metro import LightpathAssignment
from autonoc.traffic import FlowAllocation, capacity_check
from autonoc.world import DetectionSettings, World

VERBS = (
    "get_monitors",
    "list_channels",
    "set_channel",
    "configure_transponder",
    "list_alarms",
    "apply_allocation",
    "get_link_quality",
    "get_topology",
)
STATE_CHANGING = frozenset({"set_channel", "configure_transponder", "apply_allocation"})
DOMAIN_VERBS = {
    DomainId.BACKBONE_A: frozenset({"get_monitors", "list_channels", "set_channel",
                                    "configure_transponder", "list_alarms", "get_topology"}),
    DomainId.BACKBONE_B: frozenset({"get_monitors", "list_channels", "configure_transponder",
                                    "list_alarms", "get_topology", "get_link_quality"}),
    DomainId.DCI_METRO: frozenset({"get_topology", "list_channels", "apply_allocation", "list_alarms"}),
    DomainId.INTRA_DC: frozenset({"get_topology", "apply_allocation", "get_link_quality", "list_alarms"}),
}


class RpcFailure(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class RpcRequest:
    verb: str
    args: Mapping[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"verb": self.verb, "args": dict(self.args)}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RpcRequest":
        data = json.loads(text)
        return cls(str(data["verb"]), dict(data.get("args") or {}))


@dataclass(frozen=True)
class RpcResponse:
    ok: bool
    payload: Any = None
    error: Mapping[str, str] | None = None

    def to_dict(self) -> dict:
        return {"ok": self.ok, "payload": self.payload, "error": self.error}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RpcResponse":
        data = json.loads(text)
        return cls(bool(data["ok"]), data.get("payload"), data.get("error"))

    @classmethod
    def failure(cls, code: str, message: str) -> "RpcResponse":
        return cls(False, None, {"code": code, "message": message})


@dataclass(frozen=True)
class IsolationPolicy:
    """Agent id -> domains it may operate; planners hold no device grants."""

    grants: Mapping[str, frozenset]
    planners: frozenset = frozenset()

    def known(self, caller: str) -> bool:
        return caller in self.grants or caller in self.planners


@dataclass(frozen=True)
class Decision:
    allowed: bool
    reason: str


def enforce_isolation(caller: str, domain: DomainId, policy: IsolationPolicy) -> Decision:
    if not policy.known(caller):
        return Decision(False, "unknown-caller")
    if caller in policy.planners:
        return Decision(False, "planner agents hold no device grants")
    if DomainId.parse(domain) in policy.grants.get(caller, frozenset()):
        return Decision(True, "granted")
    return Decision(False, f"{caller} has no grant for {domain}")


@dataclass(frozen=True)
class AuditRecord:
    tick: int
    caller: str
    domain: str
    verb: str
    outcome: str
    args: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"tick": self.tick, "caller": self.caller, "domain": self.domain, "verb": self.verb,
                "outcome": self.outcome, "args": dict(self.args)}


class ControlPlane:
    """All four domain controllers over one world.

    ``baseline`` is the healthy world that alarms are computed against.
    """

    def __init__(self, world: World, policy: IsolationPolicy, *,
                 detection: DetectionSettings = DetectionSettings(),
                 baseline: World | None = None, noise_seed: int = 0):
        self._world = world
        self.policy = policy
        self.detection = detection
        self.noise_seed = noise_seed
        base = baseline or world
        self._baseline_profile = compute_power_profile(base.backbone)
        self._baseline_channels = base.backbone.channels
        self.audit: list[AuditRecord] = []
        self._lock = threading.Lock()
        self._handlers: dict[tuple[DomainId, str], Callable] = {}
        for domain in (DomainId.BACKBONE_A, DomainId.BACKBONE_B):
            for verb in DOMAIN_VERBS[domain]:
                self._handlers[(domain, verb)] = getattr(self, f"_bb_{verb}")
        for verb in DOMAIN_VERBS[DomainId.DCI_METRO]:
            self._handlers[(DomainId.DCI_METRO, verb)] = getattr(self, f"_metro_{verb}")
        for verb in DOMAIN_VERBS[DomainId.INTRA_DC]:
            self._handlers[(DomainId.INTRA_DC, verb)] = getattr(self, f"_dc_{verb}")

    @property
    def world(self) -> World:
        return self._world

    def call(self, domain, caller: str, request: RpcRequest) -> RpcResponse:
        with self._lock:
            response = self._dispatch(domain, caller, request)
            outcome = "ok" if response.ok else response.error["code"]
            self.audit.append(AuditRecord(self._world.tick, caller, str(domain), request.verb,
                                          outcome, dict(request.args)))
            return response

    def _dispatch(self, domain, caller: str, request: RpcRequest) -> RpcResponse:
        try:
            domain = DomainId.parse(domain)
        except ValueError:
            return RpcResponse.failure("not-found", f"unknown domain {domain!r}")
        decision = enforce_isolation(caller, domain, self.policy)
        if not decision.allowed:
            return RpcResponse.failure("access-denied", decision.reason)
        handler = self._handlers.get((domain, request.verb))
        if handler is None:
            return RpcResponse.failure("unsupported-verb", f"{request.verb!r} not served by {domain}")
        try:
            result = handler(domain, dict(request.args))
        except RpcFailure as exc:
            return RpcResponse.failure(exc.code, str(exc))
        except NotFoundError as exc:
            return RpcResponse.failure("not-found", str(exc))
        except (ConflictError, ConfigurationError) as exc:
            return RpcResponse.failure("conflict", str(exc))
        except UnsupportedChannelError as exc:
            return RpcResponse.failure("unsupported-channel", str(exc))
        except (InputError, KeyError, TypeError, ValueError) as exc:
            return RpcResponse.failure("invalid-args", f"{type(exc).__name__}: {exc}")
        if request.verb in STATE_CHANGING:
            payload, new_world = result
            new_world.tick = self._world.tick + 1
            self._world = new_world
            return RpcResponse(True, payload)
        return RpcResponse(True, result)

    # -- backbone ----------------------------------------------------------

    def _owned_edfas(self, domain: DomainId) -> set[str]:
        return {e.id for e in self._world.backbone.edfas if e.domain == domain}

    def _readings(self, domain: DomainId) -> tuple[list[MonitorReading], list[MonitorReading]]:
        owned = self._owned_edfas(domain)
        tick = self._world.tick
        now = [r for r in compute_power_profile(self._world.backbone, tick) if r.element_id in owned]
        sigma = self.detection.monitor_noise_db
        if sigma > 0:
            rng = random.Random(f"noise/{self.noise_seed}/{domain.value}/{tick}/{len(self.audit)}")
            now = [MonitorReading(r.element_id, r.port, r.total_power_dbm + rng.gauss(0.0, sigma), r.timestamp)
                   for r in now]
        base = [r for r in self._baseline_profile if r.element_id in owned]
        return now, base

    def _bb_get_monitors(self, domain, args):
        now, _ = self._readings(domain)
        return {"domain": domain.value, "tick": self._world.tick,
                "readings": [r.to_dict() for r in now]}

    def _bb_list_channels(self, domain, args):
        bb = self._world.backbone
        end_attr = "channel" if domain == DomainId.BACKBONE_A else "rx_channel"
        return {
            "domain": domain.value,
            "spans": [s.id for s in bb.spans if s.domain == domain],
            "channels": [{"index": c.index, "kind": c.kind, "enabled": c.enabled,
                          "bitrate_gbps": c.bitrate_gbps, "transponder": c.transponder}
                         for c in bb.channels],
            "transponders": [{"id": t.id, "channel": getattr(t, end_attr), "rate_gbps": t.rate_gbps}
                             for t in bb.transponders],
        }

    def _bb_set_channel(self, domain, args):
        index = _channel_index(args["index"])
        state = str(args["state"]).lower()
        if state not in ("on", "off"):
            raise InputError("state must be 'on' or 'off'")
        new = self._world.copy()
        new.backbone = new.backbone.with_channel_enabled(index, state == "on")
        return {"index": index, "state": state}, new

    def _bb_configure_transponder(self, domain, args):
        tid = str(args["id"])
        channel = args.get("channel")
        channel = None if channel in (None, "", "none") else _channel_index(channel)
        new = self._world.copy()
        current = new.backbone.transponder(tid)
        rate = int(args.get("rate", current.rate_gbps))
        attr = "channel" if domain == DomainId.BACKBONE_A else "rx_channel"
        changes = {attr: channel, "rate_gbps": rate}
        new.backbone = new.backbone.with_transponder(tid, **changes)
        return {"id": tid, "end": "A" if attr == "channel" else "B", "channel": channel,
                "rate_gbps": rate}, new

    def _bb_list_alarms(self, domain, args):
        now, base = self._readings(domain)
        anomaly = detect_anomaly(now, base, self.detection.tol_db,
                                 channels=self._world.backbone.channels,
                                 baseline_channels=self._baseline_channels)
        return {"domain": domain.value, "alarms": [] if anomaly is None else [anomaly.to_dict()]}

    def _bb_get_topology(self, domain, args):
        elements = []
        for el in self._world.backbone.elements():
            if el.domain != domain:
                continue
            if isinstance(el, Span):
                elements.append({"id": el.id, "kind": "span", "length_km": el.length_km,
                                 "loss_coeff_db_per_km": el.loss_coeff_db_per_km})
            else:
                elements.append({"id": el.id, "kind": "edfa", "gain_db": el.gain_db, "nf_db": el.nf_db,
                                 "position": el.position})
        return {"domain": domain.value, "elements": elements}

    def _bb_get_link_quality(self, domain, args):
        index = _channel_index(args["link"])
        bb = self._world.backbone
        return {"link": f"ch{index}", "osnr_db": compute_osnr(bb, index),
                "rx_power_dbm": received_channel_power_dbm(bb, index),
                "rate_gbps": bb.channels[index].bitrate_gbps}

    # -- DCI metro ---------------------------------------------------------

    def _metro_get_topology(self, domain, args):
        return self._world.metro.to_dict()

    def _metro_list_channels(self, domain, args):
        metro = self._world.metro
        return {"busy": {f"{u}>{v}": metro.busy(u, v)
                         for e in metro.edges for u, v in ((e.u, e.v), (e.v, e.u))
                         if metro.busy(u, v)}}

    def _metro_apply_allocation(self, domain, args):
        lightpaths = [LightpathAssignment.from_dict(a) for a in args["lightpaths"]]
        new = self._world.copy()
        for lp in lightpaths:
            for u, v in lp.hops():
                if not new.metro.has_edge(u, v):
                    raise NotFoundError(f"edge {u}--{v} not in metro topology")
                if not new.metro.is_free(u, v, lp.wavelength_index):
                    raise RpcFailure("conflict", f"wavelength {lp.wavelength_index} busy on {u}>{v}")
            new.metro.commit(lp)
        if capacity_check(new.metro):
            raise RpcFailure("conflict", "allocation double-books a wavelength")
        return {"committed": [lp.demand_id for lp in lightpaths]}, new

    def _metro_list_alarms(self, domain, args):
        return {"domain": domain.value, "alarms": []}

    # -- intra-DC ----------------------------------------------------------

    def _dc_get_topology(self, domain, args):
        w = self._world
        return {**w.fabric.to_dict(), "allocation": None if w.allocation is None else w.allocation.to_dict()}

    def _dc_apply_allocation(self, domain, args):
        raw = args["allocation"]
        alloc = FlowAllocation.from_dict(raw)
        fabric = self._world.fabric
        for f in alloc.flows:
            if not (0 <= f.src < len(fabric.leaves) and 0 <= f.dst < len(fabric.leaves)):
                raise NotFoundError(f"flow {f.name} references an unknown server group")
        violations = capacity_check(alloc, fabric)
        if violations:
            raise RpcFailure("capacity", "; ".join(f"{v.element}: {v.detail}" for v in violations))
        new = self._world.copy()
        for link in new.fabric.links.values():
            link.load_gbps = alloc.loads.get(link.id, 0.0)
        new.allocation = alloc
        return {"applied_flows": len(alloc.flows), "max_load_gbps": alloc.max_load}, new

    def _dc_get_link_quality(self, domain, args):
        lid = str(args["link"])
        if lid not in self._world.imdd:
            raise NotFoundError(f"IMDD link {lid!r} not found")
        report = imdd_quality(self._world.imdd[lid])
        return {**report.to_dict(), "load_gbps": self._world.fabric.links[lid].load_gbps}

    def _dc_list_alarms(self, domain, args):
        reports = [imdd_quality(s) for _, s in sorted(self._world.imdd.items(),
                                                       key=lambda kv: int(kv[0].rsplit("-", 1)[1]))]
        anomaly = detect_anomaly([], [], self.detection.tol_db, imdd_reports=reports,
                                 quality_tol_db=self.detection.quality_tol_db)
        return {"domain": domain.value, "alarms": [] if anomaly is None else [anomaly.to_dict()]}


def _channel_index(value) -> int:
    if isinstance(value, str) and value.lower().startswith("ch"):
        value = value[2:]
    return int(value)


def rpc_call(plane: ControlPlane, domain, caller: str, request: RpcRequest) -> RpcResponse:
    return plane.call(domain, caller, request)

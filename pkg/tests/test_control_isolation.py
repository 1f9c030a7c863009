import pytest

import suites
from autonoc.control import (
    DOMAIN_VERBS,
    ControlPlane,
    RpcRequest,
    RpcResponse,
    enforce_isolation,
)
from autonoc.domains import DomainId
from autonoc.harness.roster import isolation_policy
from autonoc.world import build_world

A, B = DomainId.BACKBONE_A, DomainId.BACKBONE_B


@pytest.fixture
def plane():
    return ControlPlane(build_world(), isolation_policy())


def test_isolation_matrix_is_fully_denied():
    out = suites.isolation_matrix()
    assert out["leaks"] == []
    assert out["rpc_denied"] == out["rpc_total"] > 0
    assert out["tool_denied"] == out["tool_total"] > 0
    assert not out["state_changed"]
    assert out["audit_len"] == out["calls"]


def test_enforce_isolation_decisions():
    policy = isolation_policy()
    assert enforce_isolation("backbone-a-agent", A, policy).allowed
    assert not enforce_isolation("backbone-a-agent", B, policy).allowed
    assert enforce_isolation("nobody", A, policy).reason == "unknown-caller"
    assert not enforce_isolation("dci-planner", DomainId.DCI_METRO, policy).allowed
    assert enforce_isolation("single", DomainId.INTRA_DC, policy).allowed


def test_get_monitors_only_owned_edfas(plane):
    resp = plane.call(A, "backbone-a-agent", RpcRequest("get_monitors"))
    assert resp.ok
    assert {r["element_id"] for r in resp.payload["readings"]} == {"EDFA-1", "EDFA-2", "EDFA-3"}


def test_foreign_backbone_denied(plane):
    resp = plane.call(B, "backbone-a-agent", RpcRequest("get_monitors"))
    assert not resp.ok and resp.error["code"] == "access-denied"


def test_configure_transponder_reads_back(plane):
    resp = plane.call(A, "backbone-a-agent", RpcRequest("configure_transponder", {"id": "t1", "channel": 4, "rate": 400}))
    assert resp.ok
    channels = plane.call(A, "backbone-a-agent", RpcRequest("list_channels")).payload["channels"]
    assert channels[4]["kind"] == "live" and channels[4]["bitrate_gbps"] == 400
    assert channels[4]["transponder"] == "t1"


def test_unsupported_verb_for_owned_domain(plane):
    resp = plane.call(B, "backbone-b-agent", RpcRequest("set_channel", {"index": 3, "state": "off"}))
    assert resp.error["code"] == "unsupported-verb"


def test_unknown_domain(plane):
    assert plane.call("backbone-Z", "single", RpcRequest("get_topology")).error["code"] == "not-found"


def test_every_call_is_audited(plane):
    plane.call(A, "backbone-a-agent", RpcRequest("get_monitors"))
    plane.call(B, "backbone-a-agent", RpcRequest("get_monitors"))
    plane.call(A, "backbone-a-agent", RpcRequest("set_channel", {"index": 99, "state": "on"}))
    assert [r.outcome for r in plane.audit] == ["ok", "access-denied", "not-found"]


def test_failed_metro_allocation_leaves_state_untouched(plane):
    before = plane.world.snapshot()
    lps = [{"demand_id": "x", "path": ["DCI-1", "DCI-2"], "wavelength_index": 0},
           {"demand_id": "y", "path": ["DCI-1", "DCI-2"], "wavelength_index": 0}]
    resp = plane.call(DomainId.DCI_METRO, "resource-allocator", RpcRequest("apply_allocation", {"lightpaths": lps}))
    assert resp.error["code"] == "conflict"
    assert plane.world.snapshot() == before


def test_failed_fabric_allocation_leaves_state_untouched(plane):
    before = plane.world.snapshot()
    alloc = {"flows": [{"src": 0, "dst": 1, "gbps": 401, "spine": "spine0", "links": ["dc-link-0"]}],
             "loads": {"dc-link-0": 401}}
    resp = plane.call(DomainId.INTRA_DC, "resource-allocator", RpcRequest("apply_allocation", {"allocation": alloc}))
    assert resp.error["code"] == "capacity"
    assert plane.world.snapshot() == before


def test_metro_allocation_reads_back(plane):
    lp = {"demand_id": "x", "path": ["DCI-1", "DCI-2"], "wavelength_index": 2}
    assert plane.call(DomainId.DCI_METRO, "resource-allocator", RpcRequest("apply_allocation", {"lightpaths": [lp]})).ok
    busy = plane.call(DomainId.DCI_METRO, "resource-allocator", RpcRequest("list_channels")).payload["busy"]
    assert busy == {"DCI-1>DCI-2": [2]}


def test_verb_tables_cover_every_domain():
    assert set(DOMAIN_VERBS) == set(DomainId)
    assert "set_channel" not in DOMAIN_VERBS[B]


def test_wire_round_trip():
    req = RpcRequest("set_channel", {"index": 3, "state": "off"})
    assert RpcRequest.from_json(req.to_json()) == req
    resp = RpcResponse.failure("access-denied", "no")
    assert RpcResponse.from_json(resp.to_json()) == resp

from types import SimpleNamespace

import pytest
from hypothesis import given, settings, strategies as st

import oracles
import suites
from autonoc.errors import BlockedError, ConfigurationError, InfeasibleDemandError, InputError
from autonoc.optical.fabric import Fabric
from autonoc.optical.metro import LightpathAssignment, MetroEdge, MetroTopology
from autonoc.traffic import (
    DemandMatrix,
    Flow,
    FlowAllocation,
    LightpathDemand,
    WorkloadSpec,
    allocate_intra_dc,
    backbone_request_needed,
    capacity_check,
    generate_demands,
    reroute_avoiding,
    rwa_first_fit,
)


def line3():
    return MetroTopology(["a", "b", "c"], [MetroEdge("a", "b", 1), MetroEdge("b", "c", 1)], 30)


def square():
    nodes = ["a", "b", "c", "d"]
    edges = [MetroEdge("a", "b", 1), MetroEdge("b", "c", 1), MetroEdge("c", "d", 1), MetroEdge("d", "a", 1)]
    return MetroTopology(nodes, edges, 30)


# -- generate_demands ----------------------------------------------------------


def test_ring_allreduce_matrix():
    m = generate_demands(WorkloadSpec("ring_allreduce", 100), 0, 0)
    assert m.nonzero() == [(i, (i + 1) % 8, 100.0) for i in range(8)]


def test_zero_payload_is_all_zero():
    m = generate_demands(WorkloadSpec("ring_allreduce", 0), 0, 0)
    assert m.nonzero() == [] and m.total_gbps == 0


def test_uniform_random_reproducible():
    spec = WorkloadSpec("uniform_random", max_gbps=50)
    assert generate_demands(spec, 3, 7) == generate_demands(spec, 3, 7)
    assert generate_demands(spec, 3, 7) != generate_demands(spec, 4, 7)


def test_unknown_workload_kind():
    with pytest.raises(ConfigurationError):
        generate_demands(WorkloadSpec("gossip"), 0, 0)


@given(seed=st.integers(0, 1000), epoch=st.integers(0, 50), top=st.floats(0, 400))
def test_uniform_matrix_invariants(seed, epoch, top):
    m = generate_demands(WorkloadSpec("uniform_random", max_gbps=top), epoch, seed)
    for i, row in enumerate(m.entries):
        assert row[i] == 0
        assert all(0 <= g <= top for g in row)
    assert DemandMatrix.from_table(m.to_table()) == m


def test_demand_matrix_rejects_nonzero_diagonal():
    with pytest.raises(InputError):
        DemandMatrix(0, ("a", "b"), ((1.0, 0.0), (0.0, 0.0)))


# -- allocate_intra_dc -----------------------------------------------------------


def test_ring_allocation_is_optimal_and_feasible():
    fabric = Fabric.build()
    alloc = allocate_intra_dc(generate_demands(WorkloadSpec("ring_allreduce", 100), 0, 0), fabric)
    assert alloc.feasible and alloc.max_load <= 200
    flows = [(i, (i + 1) % 8, 100.0) for i in range(8)]
    assert alloc.max_load == oracles.best_max_load(flows, 4)
    for f in alloc.flows:
        assert len(f.links) == 2


def test_spine_tie_goes_to_lowest_id():
    fabric = Fabric.build()
    m = DemandMatrix(0, tuple(f"G{i}" for i in range(8)),
                     tuple(tuple(50.0 if (i, j) == (0, 1) else 0.0 for j in range(8)) for i in range(8)))
    (flow,) = allocate_intra_dc(m, fabric).flows
    assert flow.spine == "spine0"


def test_zero_matrix_empty_allocation():
    alloc = allocate_intra_dc(generate_demands(WorkloadSpec("ring_allreduce", 0), 0, 0), Fabric.build())
    assert alloc.flows == () and all(v == 0 for v in alloc.loads.values())


def test_single_flow_above_capacity():
    m = DemandMatrix(0, tuple(f"G{i}" for i in range(8)),
                     tuple(tuple(500.0 if (i, j) == (2, 5) else 0.0 for j in range(8)) for i in range(8)))
    with pytest.raises(InfeasibleDemandError, match="G2->G5"):
        allocate_intra_dc(m, Fabric.build())


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), top=st.floats(0, 120))
def test_allocation_loads_are_flow_sums(seed, top):
    fabric = Fabric.build()
    alloc = allocate_intra_dc(generate_demands(WorkloadSpec("uniform_random", max_gbps=top), 0, seed), fabric)
    for lid, load in alloc.loads.items():
        assert load == pytest.approx(sum(f.gbps for f in alloc.flows if lid in f.links))
    assert alloc.feasible == (capacity_check(alloc, fabric) == [])


def test_backbone_request_trigger():
    fabric = Fabric.build()
    small = backbone_request_needed(generate_demands(WorkloadSpec("ring_allreduce", 100), 0, 0), fabric)
    big = backbone_request_needed(generate_demands(WorkloadSpec("ring_allreduce", 650), 0, 0), fabric)
    assert not small["needed"]
    assert big["needed"] and big["aggregate_gbps"] > 0.8 * fabric.bisection_gbps


# -- capacity_check --------------------------------------------------------------


def test_capacity_violation_constructed():
    fabric = Fabric.build()
    alloc = FlowAllocation((Flow(0, 1, 401.0, "spine0", ("dc-link-0",)),), {"dc-link-0": 401.0})
    (v,) = capacity_check(alloc, fabric)
    assert v.kind == "capacity" and v.element == "dc-link-0"


def test_double_booked_wavelength_constructed():
    metro = line3()
    metro.commit(LightpathAssignment("x", ("a", "b"), 4))
    metro.commit(LightpathAssignment("y", ("a", "b", "c"), 4))
    (v,) = capacity_check(metro)
    assert v.kind == "wavelength" and v.element == "a>b" and v.amount == 4


def test_fresh_state_is_clean():
    assert capacity_check(MetroTopology.default()) == []
    assert capacity_check(Fabric.build()) == []


# -- rwa_first_fit ---------------------------------------------------------------


def test_adjacent_nodes_shortest_path_lambda0():
    a = rwa_first_fit(LightpathDemand("d1", "a", "b"), square())
    assert a.path == ("a", "b") and a.wavelength_index == 0


def test_second_demand_takes_next_wavelength():
    metro = square()
    rwa_first_fit(LightpathDemand("d1", "a", "b"), metro)
    assert rwa_first_fit(LightpathDemand("d2", "a", "b"), metro).wavelength_index == 1


def test_saturated_cut_blocks():
    metro = MetroTopology(["a", "b"], [MetroEdge("a", "b", 1)], 30)
    for w in range(30):
        metro.commit(LightpathAssignment(f"f{w}", ("a", "b"), w))
    with pytest.raises(BlockedError):
        rwa_first_fit(LightpathDemand("d", "a", "b"), metro)


def test_equal_length_paths_ordered_by_node_ordinal():
    metro = square()
    a = rwa_first_fit(LightpathDemand("d", "a", "c"), metro)
    assert a.path == ("a", "b", "c")


def test_rwa_contract_errors():
    with pytest.raises(InputError):
        rwa_first_fit(LightpathDemand("d", "a", "a"), square())
    with pytest.raises(InputError):
        rwa_first_fit(LightpathDemand("d", "a", "b"), square(), k=0)


def test_rwa_matches_exhaustive_search_on_small_graphs():
    out = suites.rwa_equivalence()
    assert out["graphs"] == 30  # connected graphs on 2..5 nodes up to isomorphism: 1+2+6+21
    assert out["mismatches"] == []


def test_random_sequences_never_violate_capacity():
    out = suites.rwa_random_sequences(n_sequences=200)
    assert out["violations"] == []


# -- reroute_avoiding ------------------------------------------------------------


def test_reroute_moves_lightpath_off_failed_edge():
    metro = square()
    lp = rwa_first_fit(LightpathDemand("d", "a", "b"), metro)
    other = rwa_first_fit(LightpathDemand("e", "c", "d"), metro)
    res = reroute_avoiding([lp, other], "a--b", SimpleNamespace(metro=metro))
    ((old, new),) = res.moved
    assert old == lp and new.path == ("a", "d", "c", "b")
    assert other in res.assignments and res.unmovable == []
    assert capacity_check(res.metro) == []


def test_reroute_noop_when_untouched():
    metro = square()
    lp = rwa_first_fit(LightpathDemand("d", "a", "b"), metro)
    res = reroute_avoiding([lp], "c--d", SimpleNamespace(metro=metro))
    assert res.moved == [] and res.assignments == [lp]


def test_bridge_failure_is_unmovable():
    metro = line3()
    lp = rwa_first_fit(LightpathDemand("d", "a", "c"), metro)
    res = reroute_avoiding([lp], "b--c", SimpleNamespace(metro=metro))
    assert res.unmovable == [lp] and res.moved == []


def test_fabric_reroute_avoids_link():
    fabric = Fabric.build()
    alloc = allocate_intra_dc(generate_demands(WorkloadSpec("ring_allreduce", 100), 0, 0), fabric)
    failed = alloc.flows[0].links[0]
    res = reroute_avoiding(alloc, failed, SimpleNamespace(fabric=fabric))
    assert res.moved and not res.unmovable
    assert all(failed not in f.links for f in res.assignments.flows)
    untouched = [f for f in alloc.flows if failed not in f.links]
    assert all(f in res.assignments.flows for f in untouched)
    assert res.assignments.feasible

"""Per-epoch demands, intra-DC flow allocation, metro RWA and rerouting."""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import networkx as nx

from autonoc.errors import BlockedError, ConfigurationError, InfeasibleDemandError, InputError, NotFoundError
from autonoc.optical.fabric import Fabric
from autonoc.optical.metro import LightpathAssignment, MetroTopology

if TYPE_CHECKING:
    from autonoc.world import World

WORKLOAD_KINDS = ("ring_allreduce", "uniform_random")
DEFAULT_K_PATHS = 3
CAPACITY_FRACTION = 0.8


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str
    payload_gbps: float = 0.0
    max_gbps: float = 0.0
    groups: int = 8
    labels: tuple[str, ...] | None = None

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "groups": self.groups}
        if self.kind == "ring_allreduce":
            out["payload_gbps"] = self.payload_gbps
        else:
            out["max_gbps"] = self.max_gbps
        if self.labels:
            out["labels"] = list(self.labels)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "WorkloadSpec":
        labels = data.get("labels")
        return cls(
            kind=str(data.get("kind", "")),
            payload_gbps=float(data.get("payload_gbps", 0.0)),
            max_gbps=float(data.get("max_gbps", 0.0)),
            groups=int(data.get("groups", len(labels) if labels else 8)),
            labels=tuple(labels) if labels else None,
        )


@dataclass(frozen=True)
class DemandMatrix:
    epoch: int
    labels: tuple[str, ...]
    entries: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        n = len(self.labels)
        if self.epoch < 0:
            raise InputError("epoch must be >= 0")
        if len(self.entries) != n or any(len(row) != n for row in self.entries):
            raise InputError(f"demand matrix must be {n}x{n}")
        for i, row in enumerate(self.entries):
            if row[i] != 0:
                raise InputError(f"diagonal entry {i} must be zero")
            if any(g < 0 for g in row):
                raise InputError(f"negative demand in row {i}")

    @property
    def size(self) -> int:
        return len(self.labels)

    def nonzero(self) -> list[tuple[int, int, float]]:
        return [(i, j, g) for i, row in enumerate(self.entries) for j, g in enumerate(row) if g > 0]

    @property
    def total_gbps(self) -> float:
        return sum(sum(row) for row in self.entries)

    def to_dict(self) -> dict:
        return {"epoch": self.epoch, "labels": list(self.labels),
                "entries": [list(row) for row in self.entries]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "DemandMatrix":
        return cls(int(data["epoch"]), tuple(data["labels"]),
                   tuple(tuple(float(g) for g in row) for row in data["entries"]))

    def to_table(self) -> str:
        buf = io.StringIO()
        buf.write(f"# epoch={self.epoch}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["src", *self.labels])
        for label, row in zip(self.labels, self.entries):
            writer.writerow([label, *(format(g, "g") for g in row)])
        return buf.getvalue()

    @classmethod
    def from_table(cls, text: str) -> "DemandMatrix":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# epoch="):
            raise InputError("missing '# epoch=' header line")
        epoch = int(lines[0].split("=", 1)[1])
        rows = list(csv.reader(lines[1:]))
        labels = tuple(rows[0][1:])
        entries = tuple(tuple(float(x) for x in row[1:]) for row in rows[1:])
        if tuple(row[0] for row in rows[1:]) != labels:
            raise InputError("row labels do not match header")
        return cls(epoch, labels, entries)


def generate_demands(workload: WorkloadSpec, epoch: int, seed: int) -> DemandMatrix:
    """Demand matrix for one training epoch; a pure function of its arguments."""
    n = workload.groups
    labels = workload.labels or tuple(f"G{i}" for i in range(n))
    if len(labels) != n:
        raise ConfigurationError("workload.labels", f"expected {n} labels")
    rows = [[0.0] * n for _ in range(n)]
    if workload.kind == "ring_allreduce":
        if workload.payload_gbps < 0:
            raise ConfigurationError("workload.payload_gbps", "must be >= 0")
        if n > 1:
            for i in range(n):
                rows[i][(i + 1) % n] = float(workload.payload_gbps)
    elif workload.kind == "uniform_random":
        if workload.max_gbps < 0:
            raise ConfigurationError("workload.max_gbps", "must be >= 0")
        rng = random.Random(f"uniform/{seed}/{epoch}/{n}/{workload.max_gbps!r}")
        for i in range(n):
            for j in range(n):
                if i != j:
                    rows[i][j] = round(rng.uniform(0.0, workload.max_gbps), 3)
    else:
        raise ConfigurationError("workload.kind", f"unknown workload kind {workload.kind!r}")
    return DemandMatrix(epoch, tuple(labels), tuple(tuple(r) for r in rows))


@dataclass(frozen=True)
class Violation:
    kind: str  # "capacity" | "wavelength" | "unknown-link"
    element: str
    detail: str
    amount: float = 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "element": self.element, "detail": self.detail, "amount": self.amount}


@dataclass(frozen=True)
class Flow:
    src: int
    dst: int
    gbps: float
    spine: str | None
    links: tuple[str, ...]

    @property
    def name(self) -> str:
        return f"G{self.src}->G{self.dst}"

    def to_dict(self) -> dict:
        return {"src": self.src, "dst": self.dst, "gbps": self.gbps, "spine": self.spine,
                "links": list(self.links)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Flow":
        return cls(int(data["src"]), int(data["dst"]), float(data["gbps"]), data.get("spine"),
                   tuple(data.get("links", ())))


@dataclass(frozen=True)
class FlowAllocation:
    flows: tuple[Flow, ...]
    loads: Mapping[str, float]
    violations: tuple[Violation, ...] = ()
    epoch: int | None = None

    @property
    def feasible(self) -> bool:
        return not self.violations

    @property
    def max_load(self) -> float:
        return max(self.loads.values(), default=0.0)

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "flows": [f.to_dict() for f in self.flows],
            "loads": {k: self.loads[k] for k in sorted(self.loads, key=_link_sort_key)},
            "violations": [v.to_dict() for v in self.violations],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "FlowAllocation":
        flows = tuple(Flow.from_dict(f) for f in data.get("flows", ()))
        loads = _loads_of(flows)
        return cls(flows, loads, (), data.get("epoch"))


def _link_sort_key(link_id: str):
    head, _, tail = link_id.rpartition("-")
    return (head, int(tail)) if tail.isdigit() else (link_id, -1)


def _loads_of(flows: Iterable[Flow]) -> dict[str, float]:
    loads: dict[str, float] = {}
    for f in flows:
        for lid in f.links:
            loads[lid] = loads.get(lid, 0.0) + f.gbps
    return loads


def _choose_spine(fabric: Fabric, loads: Mapping[str, float], src_leaf: str, dst_leaf: str,
                  gbps: float, avoid: str | None = None, must_fit: bool = False):
    best = None
    for spine in fabric.spines:
        up, down = fabric.link_between(src_leaf, spine), fabric.link_between(dst_leaf, spine)
        if avoid in (up.id, down.id):
            continue
        after_up = loads.get(up.id, 0.0) + gbps
        after_down = loads.get(down.id, 0.0) + gbps
        if must_fit and (after_up > up.capacity_gbps or after_down > down.capacity_gbps):
            continue
        worst = max(after_up, after_down)
        if best is None or worst < best[0]:
            best = (worst, spine, (up.id, down.id))
    return best


def allocate_intra_dc(matrix: DemandMatrix, fabric: Fabric) -> FlowAllocation:
    """Route every inter-group flow leaf -> spine -> leaf.

    Flows are placed in row-major order on the spine that minimises the
    larger of the two resulting link loads, ties going to the lowest spine.
    """
    if matrix.size != len(fabric.leaves):
        raise InputError(f"matrix is {matrix.size}x{matrix.size}, fabric has {len(fabric.leaves)} leaves")
    loads = {lid: 0.0 for lid in fabric.links}
    flows = []
    for i, j, gbps in matrix.nonzero():
        if i == j:
            flows.append(Flow(i, j, gbps, None, ()))
            continue
        src_leaf, dst_leaf = fabric.leaves[i], fabric.leaves[j]
        cap = min(fabric.link_between(src_leaf, s).capacity_gbps for s in fabric.spines)
        if gbps > cap:
            raise InfeasibleDemandError(f"G{i}->G{j}", gbps, cap)
        _, spine, links = _choose_spine(fabric, loads, src_leaf, dst_leaf, gbps)
        for lid in links:
            loads[lid] += gbps
        flows.append(Flow(i, j, gbps, spine, links))
    alloc = FlowAllocation(tuple(flows), loads, (), matrix.epoch)
    return FlowAllocation(alloc.flows, alloc.loads, tuple(capacity_check(alloc, fabric)), matrix.epoch)


def capacity_check(state, fabric: Fabric | None = None) -> list[Violation]:
    """Violations of link capacity or wavelength exclusivity; [] when clean.

    ``state`` is a FlowAllocation (checked against ``fabric``), a Fabric
    (its current link loads), or a MetroTopology (its committed lightpaths).
    """
    violations: list[Violation] = []
    if isinstance(state, MetroTopology):
        usage = state.usage()
        for (u, v, w), count in sorted(usage.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1])):
            if count > 1:
                violations.append(Violation("wavelength", f"{u}>{v}",
                                            f"wavelength {w} booked {count} times", w))
            if not 0 <= w < state.n_wavelengths:
                violations.append(Violation("wavelength", f"{u}>{v}", f"wavelength {w} outside grid", w))
        return violations
    if isinstance(state, Fabric):
        for link in state.links.values():
            if link.load_gbps > link.capacity_gbps:
                violations.append(Violation("capacity", link.id,
                                            f"load {link.load_gbps} > capacity {link.capacity_gbps}",
                                            link.load_gbps - link.capacity_gbps))
        return violations
    if isinstance(state, FlowAllocation):
        if fabric is None:
            raise InputError("a fabric is required to check a flow allocation")
        loads = _loads_of(state.flows)
        for lid in sorted(loads, key=_link_sort_key):
            if lid not in fabric.links:
                violations.append(Violation("unknown-link", lid, "flow uses a link not in the fabric"))
                continue
            cap = fabric.links[lid].capacity_gbps
            if loads[lid] > cap:
                violations.append(Violation("capacity", lid, f"load {loads[lid]} > capacity {cap}",
                                            loads[lid] - cap))
        return violations
    raise InputError(f"cannot capacity-check {type(state).__name__}")


def backbone_request_needed(matrix: DemandMatrix, fabric: Fabric,
                            capacity_fraction: float = CAPACITY_FRACTION) -> dict:
    """Trigger for requesting backbone spectrum: local allocation infeasible,
    or aggregate demand above ``capacity_fraction`` of fabric bisection."""
    aggregate = matrix.total_gbps
    threshold = capacity_fraction * fabric.bisection_gbps
    reasons = []
    try:
        alloc = allocate_intra_dc(matrix, fabric)
        if not alloc.feasible:
            reasons.append("allocation violates link capacity")
    except InfeasibleDemandError as exc:
        reasons.append(str(exc))
    if aggregate > threshold:
        reasons.append(f"aggregate {aggregate:g} Gbps > {capacity_fraction:g} x bisection {fabric.bisection_gbps:g} Gbps")
    return {"needed": bool(reasons), "reasons": reasons, "aggregate_gbps": aggregate,
            "threshold_gbps": threshold}


# -- metro RWA ---------------------------------------------------------------


@dataclass(frozen=True)
class LightpathDemand:
    id: str
    src: str
    dst: str
    gbps: float = 100.0


def _path_length(graph: nx.Graph, path: Sequence[str]) -> float:
    return sum(graph[u][v]["length"] for u, v in zip(path, path[1:]))


def k_shortest_paths(metro: MetroTopology, src: str, dst: str, k: int = DEFAULT_K_PATHS,
                     graph: nx.Graph | None = None) -> list[tuple[str, ...]]:
    """Up to ``k`` loop-free paths by length; equal lengths ordered by node ordinals."""
    graph = metro.graph if graph is None else graph
    if src not in graph or dst not in graph:
        return []
    collected = []
    kth = None
    try:
        for path in nx.shortest_simple_paths(graph, src, dst, weight="length"):
            length = round(_path_length(graph, path), 9)
            if kth is not None and length > kth:
                break
            collected.append((length, tuple(metro.ordinal[n] for n in path), tuple(path)))
            if kth is None and len(collected) == k:
                kth = length
    except nx.NetworkXNoPath:
        return []
    collected.sort()
    return [p for _, _, p in collected[:k]]


def rwa_first_fit(demand: LightpathDemand, metro: MetroTopology, k: int = DEFAULT_K_PATHS, *,
                  commit: bool = True, graph: nx.Graph | None = None) -> LightpathAssignment:
    """First (path, wavelength) with the wavelength free on every hop.

    Paths are tried in k-shortest order and wavelengths ascending; wavelength
    continuity is enforced end to end.
    """
    if demand.src == demand.dst:
        raise InputError("demand source and destination must differ")
    if k < 1:
        raise InputError("k must be >= 1")
    for node in (demand.src, demand.dst):
        if node not in metro.graph:
            raise NotFoundError(f"metro node {node!r} not found")
    for path in k_shortest_paths(metro, demand.src, demand.dst, k, graph):
        hops = list(zip(path, path[1:]))
        for w in range(metro.n_wavelengths):
            if all(metro.is_free(u, v, w) for u, v in hops):
                assignment = LightpathAssignment(demand.id, path, w, demand.gbps)
                if commit:
                    metro.commit(assignment)
                return assignment
    raise BlockedError(f"demand {demand.id} ({demand.src}->{demand.dst}) blocked")


# -- rerouting ---------------------------------------------------------------


@dataclass
class ReplanResult:
    moved: list = field(default_factory=list)  # (old, new) pairs
    unmovable: list = field(default_factory=list)
    assignments: object = None  # new lightpath list or FlowAllocation
    metro: MetroTopology | None = None

    def to_dict(self) -> dict:
        def enc(x):
            return x.to_dict() if hasattr(x, "to_dict") else x
        out = {"moved": [{"old": enc(a), "new": enc(b)} for a, b in self.moved],
               "unmovable": [enc(a) for a in self.unmovable]}
        if isinstance(self.assignments, FlowAllocation):
            out["allocation"] = self.assignments.to_dict()
        elif self.assignments is not None:
            out["lightpaths"] = [enc(a) for a in self.assignments]
        return out


def _metro_failure(metro: MetroTopology, failed: str):
    """(edges, nodes) removed by a metro failure reference ``U--V`` or ``U``."""
    if "--" in failed:
        u, v = failed.split("--", 1)
        return {frozenset((u, v))}, set()
    if failed in metro.graph:
        return set(), {failed}
    return set(), set()


def reroute_avoiding(assignments, failed_element: str, world: "World") -> ReplanResult:
    """Re-solve every assignment that traverses ``failed_element``.

    ``assignments`` is either a FlowAllocation on the intra-DC fabric or a
    sequence of metro LightpathAssignments.  Assignments not touching the
    element are returned unchanged; demands without an alternative are listed
    as unmovable.
    """
    if isinstance(assignments, FlowAllocation):
        return _reroute_flows(assignments, failed_element, world.fabric)
    return _reroute_lightpaths(list(assignments), failed_element, world.metro)


def _reroute_flows(alloc: FlowAllocation, failed_link: str, fabric: Fabric) -> ReplanResult:
    hit = [f for f in alloc.flows if failed_link in f.links]
    kept = [f for f in alloc.flows if failed_link not in f.links]
    loads = {lid: 0.0 for lid in fabric.links}
    for lid, g in _loads_of(kept).items():
        loads[lid] = loads.get(lid, 0.0) + g
    result = ReplanResult()
    new_for: dict[int, Flow] = {}
    for f in hit:
        src_leaf, dst_leaf = fabric.leaves[f.src], fabric.leaves[f.dst]
        choice = _choose_spine(fabric, loads, src_leaf, dst_leaf, f.gbps, avoid=failed_link, must_fit=True)
        if choice is None:
            result.unmovable.append(f)
            continue
        _, spine, links = choice
        for lid in links:
            loads[lid] += f.gbps
        nf = Flow(f.src, f.dst, f.gbps, spine, links)
        new_for[id(f)] = nf
        result.moved.append((f, nf))
    flows = tuple(new_for.get(id(f), f) for f in alloc.flows if f not in result.unmovable)
    new_alloc = FlowAllocation(flows, _loads_of(flows), (), alloc.epoch)
    result.assignments = FlowAllocation(flows, new_alloc.loads,
                                        tuple(capacity_check(new_alloc, fabric)), alloc.epoch)
    return result


def _reroute_lightpaths(lightpaths: list[LightpathAssignment], failed: str,
                        metro: MetroTopology) -> ReplanResult:
    dead_edges, dead_nodes = _metro_failure(metro, failed)

    def traverses(a: LightpathAssignment) -> bool:
        return (any(n in dead_nodes for n in a.path)
                or any(frozenset(h) in dead_edges for h in a.hops()))

    work = metro.copy()
    hit = [a for a in lightpaths if traverses(a)]
    for a in hit:
        if a in work.lightpaths:
            work.release(a)
    graph = work.graph.copy()
    graph.remove_edges_from([tuple(e) for e in dead_edges if len(e) == 2 and graph.has_edge(*tuple(e))])
    graph.remove_nodes_from([n for n in dead_nodes if n in graph])
    result = ReplanResult(metro=work)
    replaced: dict[int, LightpathAssignment] = {}
    for a in hit:
        demand = LightpathDemand(a.demand_id, a.path[0], a.path[-1], a.gbps)
        try:
            if demand.src not in graph or demand.dst not in graph:
                raise BlockedError("endpoint failed")
            new = rwa_first_fit(demand, work, DEFAULT_K_PATHS, graph=graph)
        except BlockedError:
            result.unmovable.append(a)
            continue
        replaced[id(a)] = new
        result.moved.append((a, new))
    result.assignments = [replaced.get(id(a), a) for a in lightpaths if a not in result.unmovable]
    return result

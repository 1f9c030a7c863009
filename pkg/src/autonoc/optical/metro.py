"""DCI metro network: an undirected graph with per-direction wavelength occupancy."""

from __future__ import annotations

import copy
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import networkx as nx
import yaml

from autonoc.errors import ConfigurationError, NotFoundError

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
DEFAULT_TOPOLOGY = DATA_DIR / "metro_14node.yaml"


@dataclass(frozen=True)
class MetroEdge:
    u: str
    v: str
    length_km: float

    @property
    def key(self) -> frozenset:
        return frozenset((self.u, self.v))


@dataclass(frozen=True)
class LightpathAssignment:
    demand_id: str
    path: tuple[str, ...]
    wavelength_index: int
    gbps: float = 0.0

    def hops(self) -> list[tuple[str, str]]:
        return list(zip(self.path, self.path[1:]))

    def to_dict(self) -> dict:
        return {"demand_id": self.demand_id, "path": list(self.path),
                "wavelength_index": self.wavelength_index, "gbps": self.gbps}

    @classmethod
    def from_dict(cls, data: Mapping) -> "LightpathAssignment":
        return cls(str(data["demand_id"]), tuple(data["path"]), int(data["wavelength_index"]),
                   float(data.get("gbps", 0.0)))


class MetroTopology:
    """Nodes, edges and the committed lightpaths.

    Occupancy is tracked per direction: a lightpath traversing u->v holds its
    wavelength on (u, v) only.  Occupancy changes only through ``commit`` and
    ``release``.
    """

    def __init__(self, nodes: Sequence[str], edges: Iterable[MetroEdge], n_wavelengths: int = 30):
        self.nodes = tuple(nodes)
        self.edges = tuple(edges)
        self.n_wavelengths = n_wavelengths
        if len(set(self.nodes)) != len(self.nodes):
            raise ConfigurationError("metro.nodes", "duplicate node id")
        if n_wavelengths < 1:
            raise ConfigurationError("metro.n_wavelengths", "must be >= 1")
        graph = nx.Graph()
        graph.add_nodes_from(self.nodes)
        for i, e in enumerate(self.edges):
            if e.u not in graph or e.v not in graph:
                raise ConfigurationError(f"metro.edges[{i}]", f"unknown endpoint in {e.u}-{e.v}")
            if e.u == e.v or graph.has_edge(e.u, e.v):
                raise ConfigurationError(f"metro.edges[{i}]", f"self-loop or duplicate edge {e.u}-{e.v}")
            if not e.length_km > 0:
                raise ConfigurationError(f"metro.edges[{i}].length_km", "must be > 0")
            graph.add_edge(e.u, e.v, length=float(e.length_km))
        if self.nodes and not nx.is_connected(graph):
            raise ConfigurationError("metro.edges", "topology is not connected")
        self.graph = graph
        self.ordinal = {n: i for i, n in enumerate(self.nodes)}
        self.lightpaths: list[LightpathAssignment] = []
        self._busy: Counter = Counter()

    @classmethod
    def from_mapping(cls, data: Mapping, base_dir: Path | None = None) -> "MetroTopology":
        if "topology" in data and "nodes" not in data:
            path = Path(data["topology"])
            if not path.is_absolute():
                path = (base_dir or DATA_DIR) / path
            with open(path) as fh:
                merged = dict(yaml.safe_load(fh))
            merged.update({k: v for k, v in data.items() if k != "topology"})
            data = merged
        nodes = [str(n) for n in data.get("nodes") or []]
        if not nodes:
            raise ConfigurationError("metro.nodes", "must be a non-empty list")
        edges = []
        for i, raw in enumerate(data.get("edges") or []):
            try:
                edges.append(MetroEdge(str(raw["u"]), str(raw["v"]), float(raw["length_km"])))
            except (KeyError, TypeError, ValueError):
                raise ConfigurationError(f"metro.edges[{i}]", "needs u, v, length_km") from None
        return cls(nodes, edges, int(data.get("n_wavelengths", 30)))

    @classmethod
    def default(cls, n_wavelengths: int = 30) -> "MetroTopology":
        with open(DEFAULT_TOPOLOGY) as fh:
            data = yaml.safe_load(fh)
        data["n_wavelengths"] = n_wavelengths
        return cls.from_mapping(data)

    def copy(self) -> "MetroTopology":
        return copy.deepcopy(self)

    def has_edge(self, u: str, v: str) -> bool:
        return self.graph.has_edge(u, v)

    def is_free(self, u: str, v: str, wavelength: int) -> bool:
        return self._busy[(u, v, wavelength)] == 0

    def busy(self, u: str, v: str) -> list[int]:
        return sorted(w for w in range(self.n_wavelengths) if self._busy[(u, v, w)])

    def usage(self) -> Counter:
        return Counter(self._busy)

    def commit(self, assignment: LightpathAssignment) -> None:
        """Record a lightpath.  No feasibility check; see ``capacity_check``."""
        for u, v in assignment.hops():
            if not self.graph.has_edge(u, v):
                raise NotFoundError(f"edge {u}--{v} not in metro topology")
        for u, v in assignment.hops():
            self._busy[(u, v, assignment.wavelength_index)] += 1
        self.lightpaths.append(assignment)

    def release(self, assignment: LightpathAssignment) -> None:
        self.lightpaths.remove(assignment)
        for u, v in assignment.hops():
            key = (u, v, assignment.wavelength_index)
            self._busy[key] -= 1
            if self._busy[key] <= 0:
                del self._busy[key]

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "n_wavelengths": self.n_wavelengths,
            "edges": [{"u": e.u, "v": e.v, "length_km": e.length_km,
                       "busy": {f"{e.u}>{e.v}": self.busy(e.u, e.v),
                                f"{e.v}>{e.u}": self.busy(e.v, e.u)}}
                      for e in self.edges],
            "lightpaths": [lp.to_dict() for lp in self.lightpaths],
        }

"""Two-tier spine-leaf intra-DC fabric and its IMDD optical links."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from autonoc.errors import ConfigurationError, InvalidImpairmentError, NotFoundError

IMDD_BITRATE_GBPS = 53.0  # PAM-4


@dataclass
class FabricLink:
    id: str
    leaf: str
    spine: str
    capacity_gbps: float
    load_gbps: float = 0.0

    def to_dict(self) -> dict:
        return {"id": self.id, "leaf": self.leaf, "spine": self.spine,
                "capacity_gbps": self.capacity_gbps, "load_gbps": self.load_gbps}


@dataclass
class Fabric:
    """Leaf ``i`` hosts server group ``i``; every leaf connects to every spine."""

    leaves: tuple[str, ...]
    spines: tuple[str, ...]
    servers: dict[str, tuple[str, ...]]
    links: dict[str, FabricLink] = field(default_factory=dict)

    @classmethod
    def build(cls, n_leaves: int = 8, n_spines: int = 4, servers_per_leaf: int = 8,
              capacity_gbps: float = 400.0) -> "Fabric":
        if n_leaves < 1:
            raise ConfigurationError("fabric.leaves", "must be >= 1")
        if n_spines < 1:
            raise ConfigurationError("fabric.spines", "must be >= 1")
        if capacity_gbps <= 0:
            raise ConfigurationError("fabric.capacity_gbps", "must be > 0")
        leaves = tuple(f"leaf{i}" for i in range(n_leaves))
        spines = tuple(f"spine{j}" for j in range(n_spines))
        servers = {leaf: tuple(f"{leaf}-srv{k}" for k in range(servers_per_leaf)) for leaf in leaves}
        links = {}
        for i, leaf in enumerate(leaves):
            for j, spine in enumerate(spines):
                lid = f"dc-link-{i * n_spines + j}"
                links[lid] = FabricLink(lid, leaf, spine, float(capacity_gbps))
        return cls(leaves, spines, servers, links)

    @classmethod
    def from_mapping(cls, data: Mapping | None) -> "Fabric":
        data = data or {}
        return cls.build(int(data.get("leaves", 8)), int(data.get("spines", 4)),
                         int(data.get("servers_per_leaf", 8)), float(data.get("capacity_gbps", 400.0)))

    def link_between(self, leaf: str, spine: str) -> FabricLink:
        i, j = self.leaves.index(leaf), self.spines.index(spine)
        return self.links[f"dc-link-{i * len(self.spines) + j}"]

    def link(self, link_id: str) -> FabricLink:
        try:
            return self.links[link_id]
        except KeyError:
            raise NotFoundError(f"fabric link {link_id!r} not found") from None

    def leaf_of(self, server: str) -> str:
        for leaf, hosted in self.servers.items():
            if server in hosted:
                return leaf
        raise NotFoundError(f"server {server!r} not found")

    @property
    def bisection_gbps(self) -> float:
        cap = next(iter(self.links.values())).capacity_gbps if self.links else 0.0
        return (len(self.leaves) // 2) * len(self.spines) * cap

    def to_dict(self) -> dict:
        return {
            "leaves": list(self.leaves),
            "spines": list(self.spines),
            "servers_per_leaf": len(next(iter(self.servers.values()), ())),
            "links": [link.to_dict() for link in self.links.values()],
        }


@dataclass(frozen=True)
class ImddLinkState:
    link_id: str
    bitrate_gbps: float = IMDD_BITRATE_GBPS
    mpi_ratio_db: float | None = None

    def __post_init__(self):
        if self.mpi_ratio_db is not None and not self.mpi_ratio_db < 0:
            raise InvalidImpairmentError(
                f"{self.link_id}: MPI ratio must be < 0 dB, got {self.mpi_ratio_db}")


@dataclass(frozen=True)
class QualityReport:
    link_id: str
    penalty_db: float
    bitrate_gbps: float

    def to_dict(self) -> dict:
        return {"link": self.link_id, "penalty_db": self.penalty_db, "bitrate_gbps": self.bitrate_gbps}

    @classmethod
    def from_dict(cls, data: Mapping) -> "QualityReport":
        return cls(data["link"], float(data["penalty_db"]), float(data.get("bitrate_gbps", IMDD_BITRATE_GBPS)))


def mpi_penalty_db(ratio_db: float) -> float:
    """Worst-case interferometric eye-closure penalty for a reflected copy."""
    if not ratio_db < 0:
        raise InvalidImpairmentError(f"MPI ratio must be < 0 dB, got {ratio_db}")
    a = math.sqrt(10 ** (ratio_db / 10))
    return 10 * math.log10((1 + a) / (1 - a))


def imdd_quality(link: ImddLinkState) -> QualityReport:
    if link.mpi_ratio_db is None:
        return QualityReport(link.link_id, 0.0, link.bitrate_gbps)
    return QualityReport(link.link_id, mpi_penalty_db(link.mpi_ratio_db), link.bitrate_gbps)

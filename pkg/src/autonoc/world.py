"""Scenario loading and the mutable-by-replacement World container."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Mapping

import yaml

from autonoc.errors import ConfigurationError, SetupError
from autonoc.optical.backbone import (
    BackboneConfig,
    BackboneModel,
    build_backbone,
    compute_osnr,
    received_channel_power_dbm,
)
from autonoc.optical.fabric import IMDD_BITRATE_GBPS, Fabric, ImddLinkState, imdd_quality
from autonoc.optical.metro import DATA_DIR, MetroTopology

if TYPE_CHECKING:
    from autonoc.failures import FailureSpec
    from autonoc.traffic import FlowAllocation

DEFAULT_SCENARIO = DATA_DIR / "scenarios" / "default.yaml"


@dataclass(frozen=True)
class DetectionSettings:
    tol_db: float = 1.0
    quality_tol_db: float = 0.5
    monitor_noise_db: float = 0.0

    @classmethod
    def from_mapping(cls, data: Mapping | None) -> "DetectionSettings":
        data = data or {}
        settings = cls(float(data.get("tol_db", 1.0)), float(data.get("quality_tol_db", 0.5)),
                       float(data.get("monitor_noise_db", 0.0)))
        if settings.tol_db <= 0:
            raise ConfigurationError("detection.tol_db", "must be > 0")
        if settings.monitor_noise_db < 0:
            raise ConfigurationError("detection.monitor_noise_db", "must be >= 0")
        return settings


@dataclass
class Scenario:
    backbone: BackboneConfig
    metro: Mapping
    fabric: Mapping
    detection: DetectionSettings = field(default_factory=DetectionSettings)
    base_dir: Path = DATA_DIR

    @classmethod
    def from_mapping(cls, data: Mapping, base_dir: Path = DATA_DIR) -> "Scenario":
        if not isinstance(data, Mapping) or "backbone" not in data:
            raise ConfigurationError("backbone", "missing section")
        return cls(
            backbone=BackboneConfig.from_mapping(data["backbone"]),
            metro=dict(data.get("metro") or {"topology": "metro_14node.yaml"}),
            fabric=dict(data.get("fabric") or {}),
            detection=DetectionSettings.from_mapping(data.get("detection")),
            base_dir=base_dir,
        )

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        path = Path(path)
        if not path.exists():
            raise SetupError(f"scenario file {path} not found")
        with open(path) as fh:
            data = yaml.safe_load(fh)
        # topology references resolve next to the scenario first, then in package data
        base = path.parent
        metro = (data or {}).get("metro") or {}
        if "topology" in metro and not (base / metro["topology"]).exists():
            base = DATA_DIR
        return cls.from_mapping(data, base)

    @classmethod
    def default(cls) -> "Scenario":
        return cls.load(DEFAULT_SCENARIO)


@dataclass
class World:
    """Everything the controllers act on.

    Operations that "change" a world return a new World (``copy`` first);
    a controller swaps its reference only once a change fully succeeds.
    """

    backbone: BackboneModel
    metro: MetroTopology
    fabric: Fabric
    imdd: dict[str, ImddLinkState]
    allocation: "FlowAllocation | None" = None
    failures: "tuple[FailureSpec, ...]" = ()
    tick: int = 0

    def copy(self) -> "World":
        return copy.deepcopy(self)

    def snapshot(self) -> dict:
        """JSON-ready view used by trial logs and checkpoint predicates."""
        channels = []
        for ch in self.backbone.channels:
            entry = {"index": ch.index, "kind": ch.kind, "enabled": ch.enabled,
                     "transponder": ch.transponder, "bitrate_gbps": ch.bitrate_gbps}
            if ch.kind == "live" and ch.enabled:
                entry["osnr_db"] = compute_osnr(self.backbone, ch.index)
                entry["rx_power_dbm"] = received_channel_power_dbm(self.backbone, ch.index)
            channels.append(entry)
        return {
            "tick": self.tick,
            "backbone": {
                "spans": [{"id": s.id, "domain": s.domain.value, "extra_loss_db": s.extra_loss_db}
                          for s in self.backbone.spans],
                "transponders": [{"id": t.id, "channel": t.channel, "rx_channel": t.rx_channel,
                                  "rate_gbps": t.rate_gbps} for t in self.backbone.transponders],
                "channels": channels,
            },
            "fabric": self.fabric.to_dict(),
            "imdd": {lid: imdd_quality(s).penalty_db for lid, s in sorted(self.imdd.items())},
            "allocation": None if self.allocation is None else self.allocation.to_dict(),
            "metro": {"lightpaths": [lp.to_dict() for lp in self.metro.lightpaths]},
            "failures": [f.to_dict() for f in self.failures],
        }


def build_world(scenario: Scenario | None = None) -> World:
    scenario = scenario or Scenario.default()
    backbone = build_backbone(scenario.backbone)
    metro = MetroTopology.from_mapping(scenario.metro, scenario.base_dir)
    fabric = Fabric.from_mapping(scenario.fabric)
    bitrate = float(scenario.fabric.get("imdd_bitrate_gbps", IMDD_BITRATE_GBPS))
    imdd = {lid: ImddLinkState(lid, bitrate) for lid in fabric.links}
    return World(backbone, metro, fabric, imdd)

"""Static topology and analytic physical-layer models."""

from autonoc.optical.backbone import (
    BackboneConfig,
    BackboneModel,
    Edfa,
    MonitorReading,
    Span,
    Transponder,
    WavelengthChannel,
    build_backbone,
    compute_osnr,
    compute_power_profile,
    default_backbone_config,
    received_channel_power_dbm,
)
from autonoc.optical.fabric import Fabric, FabricLink, ImddLinkState, QualityReport, imdd_quality
from autonoc.optical.metro import LightpathAssignment, MetroEdge, MetroTopology

__all__ = [
    "BackboneConfig", "BackboneModel", "Edfa", "MonitorReading", "Span", "Transponder",
    "WavelengthChannel", "build_backbone", "compute_osnr", "compute_power_profile",
    "default_backbone_config", "received_channel_power_dbm", "Fabric", "FabricLink",
    "ImddLinkState", "QualityReport", "imdd_quality", "LightpathAssignment", "MetroEdge",
    "MetroTopology",
]

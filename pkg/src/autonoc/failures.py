"""Inject, detect, classify and localize physical-layer failures."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence, Union

from autonoc.errors import (
    AmbiguousClassificationError,
    CannotLocalizeError,
    ConflictError,
    InputError,
    InvalidImpairmentError,
    NotFoundError,
)
from autonoc.optical.backbone import BackboneModel, MonitorReading, Span
from autonoc.optical.fabric import QualityReport
from autonoc.world import World

DEFAULT_TOL_DB = 1.0
DEFAULT_QUALITY_TOL_DB = 0.5


@dataclass(frozen=True)
class FiberAging:
    span_id: str
    delta_db: float

    @property
    def element(self) -> str:
        return self.span_id

    def to_dict(self) -> dict:
        return {"kind": "fiber_aging", "span_id": self.span_id, "delta_db": self.delta_db}


@dataclass(frozen=True)
class Mpi:
    link_id: str
    ratio_db: float

    @property
    def element(self) -> str:
        return self.link_id

    def to_dict(self) -> dict:
        return {"kind": "mpi", "link_id": self.link_id, "ratio_db": self.ratio_db}


@dataclass(frozen=True)
class TransponderOutage:
    transponder_id: str

    @property
    def element(self) -> str:
        return self.transponder_id

    def to_dict(self) -> dict:
        return {"kind": "transponder_outage", "transponder_id": self.transponder_id}


FailureSpec = Union[FiberAging, Mpi, TransponderOutage]


def failure_from_dict(data: Mapping) -> FailureSpec:
    kind = data.get("kind")
    try:
        if kind == "fiber_aging":
            return FiberAging(str(data["span_id"]), float(data["delta_db"]))
        if kind == "mpi":
            return Mpi(str(data["link_id"]), float(data["ratio_db"]))
        if kind == "transponder_outage":
            return TransponderOutage(str(data["transponder_id"]))
    except KeyError as exc:
        raise InputError(f"failure spec of kind {kind!r} is missing {exc.args[0]!r}") from None
    raise InputError(f"unknown failure kind {kind!r}")


def inject_failure(world: World, spec: FailureSpec) -> World:
    """Return a new world with ``spec`` applied; ``world`` is left untouched."""
    if any(f.element == spec.element for f in world.failures):
        raise ConflictError(f"a failure is already active on {spec.element}")
    new = world.copy()
    if isinstance(spec, FiberAging):
        if not spec.delta_db > 0:
            raise InvalidImpairmentError("aging delta must be > 0 dB")
        span = new.backbone.span(spec.span_id)
        new.backbone = new.backbone.with_span_extra_loss(span.id, span.extra_loss_db + spec.delta_db)
    elif isinstance(spec, Mpi):
        if spec.link_id not in new.imdd:
            raise NotFoundError(f"IMDD link {spec.link_id!r} not found")
        new.imdd[spec.link_id] = replace(new.imdd[spec.link_id], mpi_ratio_db=spec.ratio_db)
    elif isinstance(spec, TransponderOutage):
        t = new.backbone.transponder(spec.transponder_id)
        if t.channel is None:
            raise ConflictError(f"transponder {t.id} is not transmitting")
        new.backbone = new.backbone.with_channel_enabled(t.channel, False)
    else:
        raise InputError(f"unsupported failure spec {spec!r}")
    new.failures = world.failures + (spec,)
    return new


def remove_failure(world: World, spec: FailureSpec) -> World:
    if spec not in world.failures:
        raise NotFoundError(f"failure {spec} is not active")
    new = world.copy()
    if isinstance(spec, FiberAging):
        span = new.backbone.span(spec.span_id)
        new.backbone = new.backbone.with_span_extra_loss(span.id, span.extra_loss_db - spec.delta_db)
    elif isinstance(spec, Mpi):
        new.imdd[spec.link_id] = replace(new.imdd[spec.link_id], mpi_ratio_db=None)
    else:
        t = new.backbone.transponder(spec.transponder_id)
        new.backbone = new.backbone.with_channel_enabled(t.channel, True)
    new.failures = tuple(f for f in world.failures if f != spec)
    return new


@dataclass(frozen=True)
class Evidence:
    kind: str  # "power" | "quality" | "channel"
    element: str
    port: str | None
    observed: float | None
    baseline: float | None
    delta: float | None

    @property
    def label(self) -> str:
        return f"{self.element} {self.port}" if self.port else self.element

    def to_dict(self) -> dict:
        return {"kind": self.kind, "element": self.element, "port": self.port,
                "observed": self.observed, "baseline": self.baseline, "delta": self.delta}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Evidence":
        return cls(data["kind"], data["element"], data.get("port"), data.get("observed"),
                   data.get("baseline"), data.get("delta"))


@dataclass(frozen=True)
class Anomaly:
    evidence: tuple[Evidence, ...]
    tol_db: float = DEFAULT_TOL_DB

    def __post_init__(self):
        if not self.evidence:
            raise InputError("an anomaly needs at least one piece of evidence")

    @property
    def first_affected(self) -> str:
        return self.evidence[0].label

    def to_dict(self) -> dict:
        return {"first_affected": self.first_affected, "tol_db": self.tol_db,
                "evidence": [e.to_dict() for e in self.evidence]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Anomaly":
        return cls(tuple(Evidence.from_dict(e) for e in data.get("evidence", ())),
                   float(data.get("tol_db", DEFAULT_TOL_DB)))


def detect_anomaly(
    readings: Sequence[MonitorReading],
    baseline: Sequence[MonitorReading],
    tol_db: float = DEFAULT_TOL_DB,
    *,
    imdd_reports: Iterable[QualityReport] = (),
    quality_tol_db: float = DEFAULT_QUALITY_TOL_DB,
    channels: Sequence | None = None,
    baseline_channels: Sequence | None = None,
) -> Anomaly | None:
    """Compare monitor readings against a baseline profile.

    Power evidence follows the baseline's propagation order.  Optional IMDD
    quality reports and channel listings add quality and missing-channel
    evidence.
    """
    if not tol_db > 0:
        raise InputError("tol_db must be > 0")
    observed = {r.key: r for r in readings}
    if set(observed) != {b.key for b in baseline} or len(observed) != len(readings):
        raise InputError("readings and baseline cover different monitor sets")
    evidence = []
    for b in baseline:
        r = observed[b.key]
        delta = r.total_power_dbm - b.total_power_dbm
        if abs(delta) > tol_db:
            evidence.append(Evidence("power", b.element_id, b.port, r.total_power_dbm,
                                     b.total_power_dbm, delta))
    if channels is not None and baseline_channels is not None:
        now = {c["index"] if isinstance(c, Mapping) else c.index: c for c in channels}
        for c in baseline_channels:
            idx, kind, enabled = _channel_fields(c)
            if kind != "live" or not enabled:
                continue
            cur = now.get(idx)
            if cur is None or not _channel_fields(cur)[2]:
                evidence.append(Evidence("channel", f"ch{idx}", None, None, None, None))
    for rep in imdd_reports:
        if rep.penalty_db > quality_tol_db:
            evidence.append(Evidence("quality", rep.link_id, None, rep.penalty_db, 0.0, rep.penalty_db))
    if not evidence:
        return None
    return Anomaly(tuple(evidence), tol_db)


def _channel_fields(c) -> tuple[int, str, bool]:
    if isinstance(c, Mapping):
        return int(c["index"]), c["kind"], bool(c.get("enabled", True))
    return c.index, c.kind, c.enabled


@dataclass(frozen=True)
class FailureClass:
    label: str  # "PowerLoss" | "Interference" | "TransmitterFault"
    confidence: float

    def to_dict(self) -> dict:
        return {"label": self.label, "confidence": self.confidence}


_PRECEDENCE = ("TransmitterFault", "PowerLoss", "Interference")


def classify_failure(anomaly: Anomaly | None, imdd_reports: Iterable[QualityReport] = (),
                     quality_tol_db: float = DEFAULT_QUALITY_TOL_DB) -> FailureClass:
    """Decision table over evidence signatures.

    power drop -> PowerLoss; quality penalty without power drop ->
    Interference; live channel missing -> TransmitterFault.  One signature
    gives confidence 1.0, two give the higher-precedence label at 0.0, all
    three are contradictory.
    """
    kinds = {e.kind for e in anomaly.evidence} if anomaly else set()
    if any(r.penalty_db > quality_tol_db for r in imdd_reports):
        kinds.add("quality")
    if not kinds:
        raise InputError("no failure evidence to classify")
    signature = {"channel": "TransmitterFault", "power": "PowerLoss", "quality": "Interference"}
    labels = {signature[k] for k in kinds}
    if len(labels) == 3:
        raise AmbiguousClassificationError(sorted(labels))
    ordered = [lab for lab in _PRECEDENCE if lab in labels]
    return FailureClass(ordered[0], 1.0 if len(ordered) == 1 else 0.0)


def _propagation_order(topology) -> list[tuple[str, str]]:
    if isinstance(topology, BackboneModel):
        return [(el.id, "span" if isinstance(el, Span) else "edfa") for el in topology.elements()]
    if isinstance(topology, Mapping):
        topology = topology.get("elements", ())
    return [(el["id"], el["kind"]) for el in topology]


def localize_failure(anomaly: Anomaly | None, topology) -> str:
    """Element most likely at fault.

    Power loss maps to the span immediately upstream of the first deviating
    monitor.  Without power evidence, quality evidence names the worst IMDD
    link and channel evidence names the silent channel.
    """
    if anomaly is None or not anomaly.evidence:
        raise CannotLocalizeError("no evidence")
    tol = anomaly.tol_db
    power = [e for e in anomaly.evidence if e.kind == "power" and e.delta is not None and abs(e.delta) > tol]
    if power:
        order = _propagation_order(topology)
        position = {eid: i for i, (eid, _) in enumerate(order)}
        known = [e for e in power if e.element in position]
        if not known:
            raise CannotLocalizeError("deviating monitors are not in the given topology")
        first = min(known, key=lambda e: (position[e.element], e.port != "input"))
        for eid, kind in reversed(order[:position[first.element]]):
            if kind == "span":
                return eid
        raise CannotLocalizeError(f"no span upstream of {first.label}")
    quality = [e for e in anomaly.evidence if e.kind == "quality"]
    if quality:
        return max(quality, key=lambda e: e.observed or 0.0).element
    channel = [e for e in anomaly.evidence if e.kind == "channel"]
    if channel:
        if isinstance(topology, BackboneModel):
            idx = int(channel[0].element[2:])
            for t in topology.transponders:
                if t.channel == idx:
                    return t.id
        return channel[0].element
    raise CannotLocalizeError("no monitor exceeds tolerance")

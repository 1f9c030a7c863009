"""Long-haul backbone: spans, EDFAs, transponders and the 30-slot grid.

Power and OSNR are computed analytically in the dB domain.  Channels are
spectrally flat, so every channel sees the same net gain along the line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from autonoc.domains import DomainId
from autonoc.errors import ConfigurationError, NotFoundError, UnsupportedChannelError

GRID_SPACING_GHZ = 50.0
OSNR_CONSTANT_DB = 58.0  # 10*log10(1 mW / (h*nu*B_ref)) at 1550 nm, 0.1 nm
POWER_FLOOR_DBM = -99.0
LIVE_BAUD_GBD = 63.9
RATES_GBPS = (200, 400)
G652D_LOSS_DB_PER_KM = 0.2


@dataclass(frozen=True)
class Span:
    id: str
    domain: DomainId
    length_km: float
    loss_coeff_db_per_km: float = G652D_LOSS_DB_PER_KM
    extra_loss_db: float = 0.0

    @property
    def loss_db(self) -> float:
        return self.length_km * self.loss_coeff_db_per_km + self.extra_loss_db


@dataclass(frozen=True)
class Edfa:
    id: str
    domain: DomainId
    gain_db: float
    nf_db: float
    after_span: str
    position: int = 0


@dataclass(frozen=True)
class Transponder:
    """A transponder pair unit.

    ``channel`` is the transmit tuning at the backbone-A end; ``rx_channel``
    is the receive tuning at the backbone-B end.  A slot is live when a
    transmitter is tuned to it.
    """

    id: str
    channel: int | None
    rx_channel: int | None
    rate_gbps: int = 400


@dataclass(frozen=True)
class WavelengthChannel:
    index: int
    center_offset: int
    kind: str  # "live" | "dummy"
    launch_power_dbm: float
    baud_gbd: float | None = None
    bitrate_gbps: int | None = None
    transponder: str | None = None
    enabled: bool = True


@dataclass(frozen=True)
class MonitorReading:
    element_id: str
    port: str  # "input" | "output"
    total_power_dbm: float
    timestamp: int = 0

    @property
    def key(self) -> tuple[str, str]:
        return (self.element_id, self.port)

    def to_dict(self) -> dict:
        return {
            "element_id": self.element_id,
            "port": self.port,
            "total_power_dbm": self.total_power_dbm,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MonitorReading":
        return cls(data["element_id"], data["port"], float(data["total_power_dbm"]),
                   int(data.get("timestamp", 0)))


@dataclass(frozen=True)
class BackboneConfig:
    spans: Sequence[Span]
    edfas: Sequence[Edfa]
    transponders: Sequence[Transponder]
    n_channels: int = 30
    launch_power_dbm: float = 0.0
    baud_gbd: float = LIVE_BAUD_GBD
    disabled_channels: frozenset[int] = frozenset()

    @classmethod
    def from_mapping(cls, data: Mapping) -> "BackboneConfig":
        """Parse the ``backbone`` section of a scenario file."""
        spans = []
        for i, raw in enumerate(_list(data, "spans")):
            where = f"spans[{i}]"
            spans.append(Span(
                id=str(_req(raw, "id", where)),
                domain=_domain(_req(raw, "domain", where), f"{where}.domain"),
                length_km=_num(_req(raw, "length_km", where), f"{where}.length_km"),
                loss_coeff_db_per_km=_num(raw.get("loss_coeff_db_per_km", G652D_LOSS_DB_PER_KM),
                                          f"{where}.loss_coeff_db_per_km"),
                extra_loss_db=_num(raw.get("extra_loss_db", 0.0), f"{where}.extra_loss_db"),
            ))
        edfas = []
        for i, raw in enumerate(_list(data, "edfas")):
            where = f"edfas[{i}]"
            edfas.append(Edfa(
                id=str(_req(raw, "id", where)),
                domain=_domain(_req(raw, "domain", where), f"{where}.domain"),
                gain_db=_num(_req(raw, "gain_db", where), f"{where}.gain_db"),
                nf_db=_num(_req(raw, "nf_db", where), f"{where}.nf_db"),
                after_span=str(_req(raw, "after_span", where)),
            ))
        transponders = []
        for i, raw in enumerate(data.get("transponders") or []):
            where = f"transponders[{i}]"
            channel = raw.get("channel")
            transponders.append(Transponder(
                id=str(_req(raw, "id", where)),
                channel=None if channel is None else int(channel),
                rx_channel=None if raw.get("rx_channel", channel) is None
                else int(raw.get("rx_channel", channel)),
                rate_gbps=int(raw.get("rate_gbps", 400)),
            ))
        return cls(
            spans=tuple(spans),
            edfas=tuple(edfas),
            transponders=tuple(transponders),
            n_channels=int(data.get("n_channels", 30)),
            launch_power_dbm=_num(data.get("launch_power_dbm", 0.0), "launch_power_dbm"),
            baud_gbd=_num(data.get("baud_gbd", LIVE_BAUD_GBD), "baud_gbd"),
            disabled_channels=frozenset(int(c) for c in data.get("disabled_channels", ())),
        )


def _list(data: Mapping, key: str) -> list:
    value = data.get(key)
    if not isinstance(value, list) or not value:
        raise ConfigurationError(key, "must be a non-empty list")
    return value


def _req(raw: Mapping, key: str, where: str):
    if not isinstance(raw, Mapping) or key not in raw:
        raise ConfigurationError(f"{where}.{key}", "missing")
    return raw[key]


def _num(value, where: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(where, f"expected a number, got {value!r}") from None


def _domain(value, where: str) -> DomainId:
    try:
        return DomainId.parse(value)
    except ValueError:
        raise ConfigurationError(where, f"unknown domain {value!r}") from None


@dataclass(frozen=True)
class BackboneModel:
    """Validated backbone; immutable, derive variants with the ``with_*`` helpers."""

    spans: tuple[Span, ...]
    edfas: tuple[Edfa, ...]
    transponders: tuple[Transponder, ...]
    n_channels: int
    launch_power_dbm: float
    baud_gbd: float
    disabled_channels: frozenset[int] = field(default_factory=frozenset)

    def elements(self) -> list[Span | Edfa]:
        """Spans and EDFAs in propagation order."""
        order: list[Span | Edfa] = []
        for span in self.spans:
            order.append(span)
            order.extend(e for e in self.edfas if e.after_span == span.id)
        return order

    @property
    def channels(self) -> tuple[WavelengthChannel, ...]:
        tx = {t.channel: t for t in self.transponders if t.channel is not None}
        out = []
        for idx in range(self.n_channels):
            t = tx.get(idx)
            enabled = idx not in self.disabled_channels
            if t is None:
                out.append(WavelengthChannel(idx, idx, "dummy", self.launch_power_dbm, enabled=enabled))
            else:
                out.append(WavelengthChannel(idx, idx, "live", self.launch_power_dbm,
                                             baud_gbd=self.baud_gbd, bitrate_gbps=t.rate_gbps,
                                             transponder=t.id, enabled=enabled))
        return tuple(out)

    def live_indices(self) -> list[int]:
        return sorted(t.channel for t in self.transponders if t.channel is not None)

    def span(self, span_id: str) -> Span:
        for s in self.spans:
            if s.id == span_id:
                return s
        raise NotFoundError(f"span {span_id!r} not found")

    def edfa(self, edfa_id: str) -> Edfa:
        for e in self.edfas:
            if e.id == edfa_id:
                return e
        raise NotFoundError(f"EDFA {edfa_id!r} not found")

    def transponder(self, tid: str) -> Transponder:
        for t in self.transponders:
            if t.id == tid:
                return t
        raise NotFoundError(f"transponder {tid!r} not found")

    def domain_of(self, element_id: str) -> DomainId:
        for el in self.elements():
            if el.id == element_id:
                return el.domain
        raise NotFoundError(f"element {element_id!r} not found")

    def with_span_extra_loss(self, span_id: str, extra_loss_db: float) -> "BackboneModel":
        self.span(span_id)
        spans = tuple(replace(s, extra_loss_db=extra_loss_db) if s.id == span_id else s
                      for s in self.spans)
        return replace(self, spans=spans)

    def with_transponder(self, tid: str, **changes) -> "BackboneModel":
        self.transponder(tid)
        trs = tuple(replace(t, **changes) if t.id == tid else t for t in self.transponders)
        model = replace(self, transponders=trs)
        _check_transponders(model.transponders, model.n_channels)
        return model

    def with_channel_enabled(self, index: int, enabled: bool) -> "BackboneModel":
        if not 0 <= index < self.n_channels:
            raise NotFoundError(f"channel {index} not in grid of {self.n_channels}")
        disabled = set(self.disabled_channels)
        (disabled.discard if enabled else disabled.add)(index)
        return replace(self, disabled_channels=frozenset(disabled))


def default_backbone_config(
    n_spans_per_domain: int = 2,
    span_km: float = 110.0,
    loss_db_per_km: float = G652D_LOSS_DB_PER_KM,
    nf_db: float = 5.0,
    live_channels: Sequence[int] = (0, 5, 10, 15, 20, 25),
) -> BackboneConfig:
    """440 km over 4 x 110 km spans, three EDFAs per domain.

    Each domain ends with a pre-amplifier/booster pair; the pair splits the
    preceding span loss so that every inter-span gain group compensates its
    span exactly.
    """
    span_loss = span_km * loss_db_per_km
    spans, edfas = [], []
    n = 0
    for d, domain in enumerate((DomainId.BACKBONE_A, DomainId.BACKBONE_B)):
        for k in range(n_spans_per_domain):
            sid = f"span{d * n_spans_per_domain + k + 1}"
            spans.append(Span(sid, domain, span_km, loss_db_per_km))
            if k < n_spans_per_domain - 1:
                n += 1
                edfas.append(Edfa(f"EDFA-{n}", domain, span_loss, nf_db, sid))
            else:
                booster = min(6.0, span_loss)
                n += 1
                edfas.append(Edfa(f"EDFA-{n}", domain, span_loss - booster, nf_db, sid))
                n += 1
                edfas.append(Edfa(f"EDFA-{n}", domain, booster, nf_db, sid))
    transponders = [Transponder(f"t{i + 1}", ch, ch, 400) for i, ch in enumerate(live_channels)]
    return BackboneConfig(tuple(spans), tuple(edfas), tuple(transponders))


def _check_transponders(transponders: Iterable[Transponder], n_channels: int) -> None:
    seen_tx: dict[int, str] = {}
    seen_rx: dict[int, str] = {}
    for i, t in enumerate(transponders):
        if t.rate_gbps not in RATES_GBPS:
            raise ConfigurationError(f"transponders[{i}].rate_gbps", f"must be one of {RATES_GBPS}")
        for attr, seen in (("channel", seen_tx), ("rx_channel", seen_rx)):
            ch = getattr(t, attr)
            if ch is None:
                continue
            if not 0 <= ch < n_channels:
                raise ConfigurationError(f"transponders[{i}].{attr}", f"index {ch} outside grid")
            if ch in seen:
                raise ConfigurationError(f"transponders[{i}].{attr}",
                                         f"duplicate channel index {ch} (also {seen[ch]})")
            seen[ch] = t.id


def build_backbone(config: BackboneConfig) -> BackboneModel:
    """Validate ``config`` and return a model with EDFA positions assigned."""
    if config.n_channels < 0:
        raise ConfigurationError("n_channels", "must be >= 0")
    if not config.spans:
        raise ConfigurationError("spans", "at least one span required")
    span_ids: set[str] = set()
    for i, s in enumerate(config.spans):
        if not s.length_km > 0:
            raise ConfigurationError(f"spans[{i}].length_km", f"must be > 0, got {s.length_km}")
        if s.loss_coeff_db_per_km < 0:
            raise ConfigurationError(f"spans[{i}].loss_coeff_db_per_km", "must be >= 0")
        if s.extra_loss_db < 0:
            raise ConfigurationError(f"spans[{i}].extra_loss_db", "must be >= 0")
        if s.id in span_ids:
            raise ConfigurationError(f"spans[{i}].id", f"duplicate id {s.id!r}")
        span_ids.add(s.id)
    edfa_ids: set[str] = set()
    for i, e in enumerate(config.edfas):
        if not 0 <= e.gain_db <= 35:
            raise ConfigurationError(f"edfas[{i}].gain_db", "must be in [0, 35]")
        if e.after_span not in span_ids:
            raise ConfigurationError(f"edfas[{i}].after_span", f"unknown span {e.after_span!r}")
        if e.id in edfa_ids or e.id in span_ids:
            raise ConfigurationError(f"edfas[{i}].id", f"duplicate id {e.id!r}")
        edfa_ids.add(e.id)
    _check_transponders(config.transponders, config.n_channels)
    for c in config.disabled_channels:
        if not 0 <= c < config.n_channels:
            raise ConfigurationError("disabled_channels", f"index {c} outside grid")

    ordered: list[Edfa] = []
    for span in config.spans:
        ordered.extend(e for e in config.edfas if e.after_span == span.id)
    edfas = tuple(replace(e, position=pos) for pos, e in enumerate(ordered, start=1))
    return BackboneModel(
        spans=tuple(config.spans),
        edfas=edfas,
        transponders=tuple(config.transponders),
        n_channels=config.n_channels,
        launch_power_dbm=config.launch_power_dbm,
        baud_gbd=config.baud_gbd,
        disabled_channels=frozenset(config.disabled_channels),
    )


def total_launch_power_dbm(model: BackboneModel) -> float | None:
    present = [ch.launch_power_dbm for ch in model.channels if ch.enabled]
    if not present:
        return None
    return 10 * math.log10(sum(10 ** (p / 10) for p in present))


def compute_power_profile(model: BackboneModel, timestamp: int = 0) -> list[MonitorReading]:
    """Total power at every EDFA input and output, in propagation order."""
    elements = model.elements()
    p = total_launch_power_dbm(model)
    readings = []
    for el in elements:
        if isinstance(el, Span):
            if p is not None:
                p -= el.loss_db
            continue
        readings.append(MonitorReading(el.id, "input", POWER_FLOOR_DBM if p is None else p, timestamp))
        if p is not None:
            p += el.gain_db
        readings.append(MonitorReading(el.id, "output", POWER_FLOOR_DBM if p is None else p, timestamp))
    return readings


def _live_channel(model: BackboneModel, index: int) -> WavelengthChannel:
    if not 0 <= index < model.n_channels:
        raise NotFoundError(f"channel {index} not in grid")
    ch = model.channels[index]
    if ch.kind != "live":
        raise UnsupportedChannelError(f"channel {index} is a dummy (ASE) channel")
    if not ch.enabled:
        raise UnsupportedChannelError(f"channel {index} transmitter is dark")
    return ch


def compute_osnr(model: BackboneModel, channel: int) -> float:
    """OSNR (dB, 0.1 nm) of a live channel at the end of the line.

    Each amplifier contributes ASE referred to its own input; contributions
    add as inverse linear OSNRs.  A line with no amplifier is noise free.
    """
    p = _live_channel(model, channel).launch_power_dbm
    inverse = 0.0
    for el in model.elements():
        if isinstance(el, Span):
            p -= el.loss_db
        else:
            inverse += 10 ** (-(OSNR_CONSTANT_DB + p - el.nf_db) / 10)
            p += el.gain_db
    if inverse == 0.0:
        return math.inf
    return -10 * math.log10(inverse)


def received_channel_power_dbm(model: BackboneModel, channel: int) -> float:
    p = _live_channel(model, channel).launch_power_dbm
    for el in model.elements():
        p += -el.loss_db if isinstance(el, Span) else el.gain_db
    return p

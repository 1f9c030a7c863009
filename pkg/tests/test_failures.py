import pytest
from hypothesis import given, settings, strategies as st

import oracles
import suites
from autonoc.errors import (
    AmbiguousClassificationError,
    CannotLocalizeError,
    ConflictError,
    InputError,
    NotFoundError,
)
from autonoc.failures import (
    Anomaly,
    Evidence,
    FiberAging,
    Mpi,
    TransponderOutage,
    classify_failure,
    detect_anomaly,
    failure_from_dict,
    inject_failure,
    localize_failure,
    remove_failure,
)
from autonoc.optical.backbone import compute_power_profile
from autonoc.optical.fabric import imdd_quality
from autonoc.world import build_world


@pytest.fixture(scope="module")
def world():
    return build_world()


def profile(w):
    return compute_power_profile(w.backbone)


def reports(w):
    return [imdd_quality(s) for s in w.imdd.values()]


def full_detect(w, healthy):
    return detect_anomaly(profile(w), profile(healthy), imdd_reports=reports(w),
                          channels=w.backbone.channels, baseline_channels=healthy.backbone.channels)


# -- inject_failure ----------------------------------------------------------------


def test_aging_shifts_downstream_monitors(world):
    aged = inject_failure(world, FiberAging("span3", 3.0))
    before = {r.key: r.total_power_dbm for r in profile(world)}
    for r in profile(aged):
        shift = -3.0 if r.element_id in ("EDFA-4", "EDFA-5", "EDFA-6") else 0.0
        assert r.total_power_dbm - before[r.key] == pytest.approx(shift, abs=1e-12)


def test_mpi_changes_quality_only(world):
    hit = inject_failure(world, Mpi("dc-link-5", -20.0))
    assert imdd_quality(hit.imdd["dc-link-5"]).penalty_db == pytest.approx(oracles.mpi_penalty(-20), abs=1e-12)
    assert profile(hit) == profile(world)
    assert world.imdd["dc-link-5"].mpi_ratio_db is None  # original untouched


def test_unknown_span(world):
    with pytest.raises(NotFoundError):
        inject_failure(world, FiberAging("span9", 3.0))


def test_duplicate_failure_conflicts(world):
    aged = inject_failure(world, FiberAging("span2", 3.0))
    with pytest.raises(ConflictError):
        inject_failure(aged, FiberAging("span2", 1.0))


@pytest.mark.parametrize("spec", [FiberAging("span4", 2.0), Mpi("dc-link-9", -15.0), TransponderOutage("t3")])
def test_injection_is_reversible(world, spec):
    back = remove_failure(inject_failure(world, spec), spec)
    assert back.snapshot() == world.snapshot()


def test_failure_spec_round_trip():
    for spec in (FiberAging("span1", 1.5), Mpi("dc-link-0", -20.0), TransponderOutage("t1")):
        assert failure_from_dict(spec.to_dict()) == spec
    with pytest.raises(InputError):
        failure_from_dict({"kind": "lightning"})


# -- detect_anomaly ----------------------------------------------------------------


def test_no_failure_no_anomaly(world):
    assert full_detect(world, world) is None


def test_span3_aging_first_affected_edfa4_input(world):
    a = detect_anomaly(profile(inject_failure(world, FiberAging("span3", 3.0))), profile(world), 1.0)
    assert a.first_affected == "EDFA-4 input"


def test_sub_threshold_aging_is_invisible(world):
    assert detect_anomaly(profile(inject_failure(world, FiberAging("span3", 0.5))), profile(world), 1.0) is None


def test_mismatched_monitor_sets(world):
    with pytest.raises(InputError):
        detect_anomaly(profile(world)[:-1], profile(world))


@settings(max_examples=60, deadline=None)
@given(span=st.sampled_from(["span1", "span2", "span3", "span4"]), delta=st.floats(0.01, 10),
       tol=st.floats(0.1, 3))
def test_detect_none_iff_within_tolerance(world, span, delta, tol):
    now, base = profile(inject_failure(world, FiberAging(span, delta))), profile(world)
    deltas = [abs(a.total_power_dbm - b.total_power_dbm) for a, b in zip(now, base)]
    assert (detect_anomaly(now, base, tol) is None) == all(d <= tol for d in deltas)


# -- classify_failure ----------------------------------------------------------------


@pytest.mark.parametrize("spec,label", [
    (FiberAging("span2", 3.0), "PowerLoss"),
    (Mpi("dc-link-3", -20.0), "Interference"),
    (TransponderOutage("t4"), "TransmitterFault"),
])
def test_classification_is_signature_faithful(world, spec, label):
    out = classify_failure(full_detect(inject_failure(world, spec), world))
    assert out.label == label and out.confidence == 1.0


def test_every_single_failure_classifies(world):
    specs = [FiberAging(s.id, d) for s in world.backbone.spans for d in suites.DELTAS_DB]
    specs += [Mpi(lid, r) for lid in sorted(world.imdd) for r in (-20.0, -13.0)]
    specs += [TransponderOutage(t.id) for t in world.backbone.transponders]
    want = {FiberAging: "PowerLoss", Mpi: "Interference", TransponderOutage: "TransmitterFault"}
    for spec in specs:
        assert classify_failure(full_detect(inject_failure(world, spec), world)).label == want[type(spec)]


def test_three_signatures_are_ambiguous():
    ev = (Evidence("power", "EDFA-1", "input", -10.0, -7.0, -3.0), Evidence("channel", "ch0", None, None, None, None),
          Evidence("quality", "dc-link-1", None, 0.9, 0.0, 0.9))
    with pytest.raises(AmbiguousClassificationError) as exc:
        classify_failure(Anomaly(ev))
    assert set(exc.value.candidates) == {"PowerLoss", "Interference", "TransmitterFault"}


# -- localize_failure ----------------------------------------------------------------


def test_localization_sweep_is_exact():
    out = suites.localization_sweep()
    assert out["correct"] == out["total"] == 12
    assert out["seconds"] < 1.0


def test_edfa1_input_maps_to_span1(world):
    a = detect_anomaly(profile(inject_failure(world, FiberAging("span1", 3.0))), profile(world))
    assert a.first_affected == "EDFA-1 input"
    assert localize_failure(a, world.backbone) == "span1"


def test_empty_anomaly_cannot_localize(world):
    with pytest.raises(CannotLocalizeError):
        localize_failure(None, world.backbone)


@settings(max_examples=40, deadline=None)
@given(span=st.sampled_from(["span1", "span2", "span3", "span4"]), delta=st.floats(1.5, 15))
def test_round_trip_above_detectability(world, span, delta):
    aged = inject_failure(world, FiberAging(span, delta))
    assert localize_failure(detect_anomaly(profile(aged), profile(world)), aged.backbone) == span


def test_localize_from_serialized_topology(world):
    aged = inject_failure(world, FiberAging("span4", 3.0))
    a = Anomaly.from_dict(detect_anomaly(profile(aged), profile(world)).to_dict())
    elements = [{"id": el.id, "kind": "span" if el.id.startswith("span") else "edfa"}
                for el in world.backbone.elements()]
    assert localize_failure(a, elements) == "span4"


def test_mpi_and_outage_localize_to_element(world):
    mpi = inject_failure(world, Mpi("dc-link-7", -20.0))
    assert localize_failure(full_detect(mpi, world), mpi.backbone) == "dc-link-7"
    out = inject_failure(world, TransponderOutage("t2"))
    assert localize_failure(full_detect(out, world), out.backbone) == "t2"

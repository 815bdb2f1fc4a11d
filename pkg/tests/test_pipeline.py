import math

import numpy as np
import pytest

from collapsesim import (
    AxisBinDetector,
    ComponentKind,
    DetectorMiss,
    EntanglementRegistry,
    FieldObject,
    MajorityDetector,
    ValidationError,
    epr_scenario,
    marginal_probabilities,
    repeated_projection_apparatus,
    run_interaction,
    run_measurement,
    spin_half_input,
    stern_gerlach_scenario,
)
from collapsesim.pipeline import _run_measurement_ex
from collapsesim.rng import TraceRng

from oracles import binomial_3sigma

SQ2 = 2 ** -0.5
Z = (0.0, 0.0, 1.0)


def fresh_sg(amplitudes, **kw):
    registry = EntanglementRegistry()
    apparatus = stern_gerlach_scenario(amplitudes, Z, **kw)
    pw = spin_half_input(registry, amplitudes)
    return registry, apparatus, pw


# --- FieldObject ---------------------------------------------------------------

def test_field_default_is_sharp():
    f = FieldObject(Z)
    assert f.mapping(0.5) == [(1.0, (1 + 0j))]
    assert f.mapping(-0.5) == [(-1.0, (1 + 0j))]


def test_field_peak_threshold_enforced():
    with pytest.raises(ValidationError):
        FieldObject(Z, peak=0.8)          # sqrt(0.8) < 0.999 default threshold
    soft = FieldObject(Z, peak=0.8, peak_threshold=None)
    amps = dict(soft.mapping(0.5))
    assert amps[1.0] == pytest.approx(math.sqrt(0.8))
    assert amps[-1.0] == pytest.approx(math.sqrt(0.2))


def test_field_peak_range_validated():
    with pytest.raises(ValueError):
        FieldObject(Z, peak=0.0, peak_threshold=None)


# --- run_measurement -------------------------------------------------------------

def test_single_stage_identity_mapping():
    # eigenstate in, sharp one-stage apparatus: outcome equals the input value
    registry = EntanglementRegistry()
    apparatus = repeated_projection_apparatus(1, 1.0, Z)
    pw = spin_half_input(registry, (1.0, 0.0))
    rec = run_measurement(apparatus, pw, registry, TraceRng(1))
    assert rec.detector_label == "up"
    assert rec.outcome[-1]["spin"] == 0.5


def test_two_stage_bin_forced_by_first_draw():
    for i in range(200):
        registry, apparatus, pw = fresh_sg((SQ2, SQ2))
        rec = run_measurement(apparatus, pw, registry, TraceRng((3, i)))
        spin = rec.outcome[0]["spin"]          # stage 1's realized entry spin
        assert rec.detector_label == ("up" if spin > 0 else "down")
        # screen stage is deterministic: final position sign matches deflection
        defl = rec.outcome[0]["momentum"][2]
        assert math.copysign(1.0, rec.outcome[-1]["position"][2]) == math.copysign(1.0, defl)


def test_sg_plus_x_born_frequencies():
    n = 20000
    ups = 0
    registry_proto = None
    apparatus = stern_gerlach_scenario((SQ2, SQ2), Z)
    for i in range(n):
        registry = EntanglementRegistry()
        pw = spin_half_input(registry, (SQ2, SQ2))
        rec = run_measurement(apparatus, pw, registry, TraceRng((11, i)))
        ups += rec.detector_bin == 0
    assert abs(ups / n - 0.5) <= binomial_3sigma(0.5, n)


def test_eigenstate_certainty():
    apparatus = stern_gerlach_scenario((1.0, 0.0), Z)
    n = 10 ** 4
    for i in range(n):
        registry = EntanglementRegistry()
        pw = spin_half_input(registry, (1.0, 0.0))
        rec = run_measurement(apparatus, pw, registry, TraceRng((21, i)))
        assert rec.detector_label == "up"


def test_eigenstate_down_symmetric():
    apparatus = stern_gerlach_scenario((0.0, 1.0), Z)
    for i in range(500):
        registry = EntanglementRegistry()
        pw = spin_half_input(registry, (0.0, 1.0))
        rec = run_measurement(apparatus, pw, registry, TraceRng((22, i)))
        assert rec.detector_label == "down"


def test_repeat_measurement_same_bin_every_trial():
    apparatus = stern_gerlach_scenario((SQ2, SQ2), Z)
    for i in range(1000):
        registry = EntanglementRegistry()
        pw = spin_half_input(registry, (SQ2, SQ2))
        rec1, survivor = _run_measurement_ex(apparatus, pw, registry, TraceRng((31, i)))
        rec2 = run_measurement(apparatus, survivor, registry, TraceRng((32, i)))
        assert rec1.detector_bin == rec2.detector_bin


def test_record_replays_bit_exactly():
    registry, apparatus, pw = fresh_sg((0.6, 0.8))
    rec1 = run_measurement(apparatus, pw, registry, TraceRng((7, 0)))
    registry2, _, pw2 = fresh_sg((0.6, 0.8))
    rec2 = run_measurement(apparatus, pw2, registry2, TraceRng((7, 0)))
    assert rec1 == rec2


def test_record_contains_only_definite_values():
    registry, apparatus, pw = fresh_sg((SQ2, SQ2))
    rec = run_measurement(apparatus, pw, registry, TraceRng(5))
    for values in rec.outcome:
        for key, v in values.items():
            assert key in ("position", "momentum", "spin")
            if isinstance(v, tuple):
                assert all(isinstance(x, float) for x in v)
            else:
                assert isinstance(v, float)
    assert isinstance(rec.detector_bin, int)
    assert all(isinstance(u, float) for u in rec.draws)


def test_pre_interaction_collection_dead_after_first_stage():
    registry, apparatus, pw = fresh_sg((SQ2, SQ2))
    before = pw.collection_ref
    stage = apparatus.stages[0]
    run_interaction(pw, stage.ma_object, stage.config, registry, TraceRng(9))
    assert all(c.id != before for c in registry.live_collections())
    assert pw.collection_ref is None


def test_detector_miss_on_boundary():
    det = AxisBinDetector(Z)
    with pytest.raises(DetectorMiss):
        det.classify([{"position": (1.0, 0.0, 0.0)}])
    maj = MajorityDetector(Z)
    with pytest.raises(DetectorMiss):
        maj.classify([{"momentum": (1.0, 0.0, 0.0)}])
    with pytest.raises(DetectorMiss):
        maj.classify([{"spin": 0.5}])


# --- EPR --------------------------------------------------------------------------

ANTI = ((0.5, -0.5, SQ2), (-0.5, 0.5, SQ2))


def test_epr_requires_aligned_bases():
    registry = EntanglementRegistry()
    with pytest.raises(ValidationError):
        epr_scenario(ANTI, Z, (1.0, 0.0, 0.0), registry)


def test_epr_anticorrelated_every_trial():
    for i in range(1000):
        registry = EntanglementRegistry()
        setup = epr_scenario(ANTI, Z, Z, registry)
        rec_a = run_measurement(setup.apparatus_a, setup.particle_a, registry, TraceRng((41, i)))
        rec_b = run_measurement(setup.apparatus_b, setup.particle_b, registry, TraceRng((42, i)))
        assert rec_a.detector_bin != rec_b.detector_bin


def test_epr_order_irrelevant_statistics():
    n = 4000
    ups_first = {"AB": 0, "BA": 0}
    anti = {"AB": 0, "BA": 0}
    for order in ("AB", "BA"):
        for i in range(n):
            registry = EntanglementRegistry()
            setup = epr_scenario(ANTI, Z, Z, registry)
            rng = TraceRng((51, i))
            if order == "AB":
                ra = run_measurement(setup.apparatus_a, setup.particle_a, registry, rng)
                rb = run_measurement(setup.apparatus_b, setup.particle_b, registry, rng)
            else:
                rb = run_measurement(setup.apparatus_b, setup.particle_b, registry, rng)
                ra = run_measurement(setup.apparatus_a, setup.particle_a, registry, rng)
            ups_first[order] += ra.detector_bin == 0
            anti[order] += ra.detector_bin != rb.detector_bin
    assert anti == {"AB": n, "BA": n}
    for order in ("AB", "BA"):
        assert abs(ups_first[order] / n - 0.5) <= binomial_3sigma(0.5, n)


def test_epr_remeasure_a_replay_oracle():
    # A measured twice gives identical outcomes; B stays anticorrelated
    n = 10 ** 4
    for i in range(n):
        registry = EntanglementRegistry()
        setup = epr_scenario(ANTI, Z, Z, registry)
        rng = TraceRng((61, i))
        rec_a1, survivor = _run_measurement_ex(setup.apparatus_a, setup.particle_a,
                                               registry, rng)
        rec_a2 = run_measurement(setup.apparatus_a, survivor, registry, rng)
        rec_b = run_measurement(setup.apparatus_b, setup.particle_b, registry, rng)
        assert rec_a1.detector_bin == rec_a2.detector_bin
        assert rec_b.detector_bin != rec_a1.detector_bin


def test_epr_locality_bookkeeping():
    # measuring A changes B's marginal although B never interacted
    registry = EntanglementRegistry()
    setup = epr_scenario(ANTI, Z, Z, registry)
    before = marginal_probabilities(registry.collection_of(setup.particle_b),
                                    setup.particle_b.member_index, ComponentKind.SPIN)
    assert before[0.5] == pytest.approx(0.5) and before[-0.5] == pytest.approx(0.5)
    rec_a = run_measurement(setup.apparatus_a, setup.particle_a, registry, TraceRng(71))
    after = marginal_probabilities(registry.collection_of(setup.particle_b),
                                   setup.particle_b.member_index, ComponentKind.SPIN)
    expected_b = -0.5 if rec_a.detector_bin == 0 else 0.5
    assert after == {expected_b: 1.0}
    assert all(len(c.members) == 1 for c in registry.live_collections())


# --- repeated projections ----------------------------------------------------------

def test_majority_detector_tie_goes_to_first_stage():
    det = MajorityDetector(Z)
    up = {"momentum": (0.0, 0.0, 1.0)}
    down = {"momentum": (0.0, 0.0, -1.0)}
    assert det.classify([up, down]) == (0, "up")
    assert det.classify([down, up]) == (1, "down")
    assert det.classify([down, up, up]) == (0, "up")


def test_repeated_apparatus_shares_field():
    app = repeated_projection_apparatus(4, 0.8)
    assert len(app.stages) == 4
    assert all(s.ma_object is app.stages[0].ma_object for s in app.stages)

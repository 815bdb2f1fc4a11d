import math

import numpy as np
import pytest

from collapsesim import (
    BhabhaProjection,
    ComponentKind,
    EmptySupport,
    EntanglementRegistry,
    ExitGrid,
    ForceMismatch,
    InteractionConfig,
    MappingProjection,
    NoOpenExitStates,
    ParticleType,
    audit_registry,
    bhabha_amplitude,
    born_probabilities,
    four_momentum,
    marginal_probabilities,
    particle,
    path_state,
    probabilistic_projection,
    run_interaction,
    sample_fluctuation_position,
    select_partner,
)
from collapsesim.constants import Constants, DEFAULT_CONSTANTS, Force
from collapsesim.engine import _check_conservation
from collapsesim.pathspace import ParticleWave, register_single
from collapsesim.qft import SpinLabel, cm_entry_momenta
from collapsesim.rng import TraceRng

from oracles import binomial_3sigma

CELL = (0.0, 0.0, 0.0)
CELL_B = (1.0, 0.0, 0.0)


def localized(reg, cell=CELL, spin=0.5, ptype=ParticleType.ELECTRON, momentum=None):
    pw = particle(ptype)
    register_single(reg, pw, [(path_state(position=cell, spin=spin, momentum=momentum), 1.0)])
    return pw


def beam_pair(reg, sqrt_s=2000.0, s1=0.5, s2=-0.5):
    pz = math.sqrt((sqrt_s / 2.0) ** 2 - DEFAULT_CONSTANTS.m_e ** 2)
    e = localized(reg, CELL, s1, ParticleType.ELECTRON, momentum=(0.0, 0.0, pz))
    p = localized(reg, CELL, s2, ParticleType.POSITRON, momentum=(0.0, 0.0, -pz))
    return e, p


def bhabha_config(**kw):
    grid = ExitGrid(n_cos_bins=kw.pop("n_cos_bins", 64))
    return InteractionConfig(model=BhabhaProjection(grid), **kw)


# --- sample_fluctuation_position -------------------------------------------------

def test_position_single_cell_forced():
    reg = EntanglementRegistry()
    pw = localized(reg)
    rng = TraceRng(0)
    for _ in range(20):
        assert sample_fluctuation_position([pw], reg, rng) == CELL
    assert len(rng.draws) == 20


def test_position_two_cell_binomial():
    reg = EntanglementRegistry()
    pw = particle(ParticleType.ELECTRON)
    register_single(reg, pw, [(path_state(position=CELL, spin=0.5), 0.5),
                              (path_state(position=CELL_B, spin=0.5), math.sqrt(0.75))])
    rng = TraceRng(77)
    n = 10 ** 5
    hits = sum(sample_fluctuation_position([pw], reg, rng) == CELL_B for _ in range(n))
    assert abs(hits / n - 0.75) <= binomial_3sigma(0.75, n)


def test_position_two_disjoint_particles_symmetric():
    reg = EntanglementRegistry()
    a = localized(reg, CELL)
    b = localized(reg, CELL_B)
    rng = TraceRng(5)
    n = 10 ** 4
    hits = sum(sample_fluctuation_position([a, b], reg, rng) == CELL for _ in range(n))
    assert abs(hits / n - 0.5) <= binomial_3sigma(0.5, n)


def test_position_empty_support():
    reg = EntanglementRegistry()
    pw = particle(ParticleType.ELECTRON)
    register_single(reg, pw, [(path_state(spin=0.5), 1.0)])  # no position at all
    with pytest.raises(EmptySupport):
        sample_fluctuation_position([pw], reg, TraceRng(0))


# --- select_partner ---------------------------------------------------------------

def test_partner_absent_when_no_support():
    reg = EntanglementRegistry()
    far = localized(reg, CELL_B)
    assert select_partner(CELL, [far], Force.ELECTRO_WEAK, reg, TraceRng(0)) is None


def test_partner_single_candidate_forced():
    reg = EntanglementRegistry()
    near = localized(reg, CELL)
    rng = TraceRng(1)
    for _ in range(10):
        assert select_partner(CELL, [near], Force.ELECTRO_WEAK, reg, rng) is near


def test_partner_two_candidates_uniform():
    reg = EntanglementRegistry()
    a = localized(reg, CELL)
    b = localized(reg, CELL)
    rng = TraceRng(13)
    n = 10 ** 4
    hits = sum(select_partner(CELL, [a, b], Force.ELECTRO_WEAK, reg, rng) is a
               for _ in range(n))
    assert abs(hits / n - 0.5) <= binomial_3sigma(0.5, n)


# --- probabilistic_projection ------------------------------------------------------

def entry_states_for(reg, e, p):
    ce, cp = reg.collection_of(e), reg.collection_of(p)
    return (ce.rows[0][0][0], cp.rows[0][0][0])


def test_projection_zero_coupling_no_open_exits():
    c0 = Constants(alpha_em=0.0)
    reg = EntanglementRegistry()
    e, p = beam_pair(reg)
    cfg = InteractionConfig(model=BhabhaProjection(ExitGrid(), c0),
                            channel_policy="e-e+", constants=c0)
    with pytest.raises(NoOpenExitStates):
        probabilistic_projection(entry_states_for(reg, e, p), "e-e+", cfg, CELL, (e, p))


def test_projection_uniform_fallback():
    c0 = Constants(alpha_em=0.0)
    reg = EntanglementRegistry()
    e, p = beam_pair(reg)
    cfg = InteractionConfig(model=BhabhaProjection(ExitGrid(n_cos_bins=4), c0),
                            channel_policy="e-e+", constants=c0, uniform_fallback=True)
    rows = probabilistic_projection(entry_states_for(reg, e, p), "e-e+", cfg, CELL, (e, p))
    weights = [abs(a) ** 2 for _, a in rows]
    assert len(rows) == 4 * 4
    assert all(w == pytest.approx(weights[0]) for w in weights)


def test_projection_rows_match_per_cell_reevaluation():
    # every grid cell's amplitude equals a direct scalar evaluation there
    reg = EntanglementRegistry()
    e, p = beam_pair(reg, sqrt_s=1000.0)
    cfg = bhabha_config(channel_policy="e-e+")
    states = entry_states_for(reg, e, p)
    rows = probabilistic_projection(states, "e-e+", cfg, CELL, (e, p))
    p1 = four_momentum(e.mass, states[0].value_of(ComponentKind.MOMENTUM))
    p2 = four_momentum(p.mass, states[1].value_of(ComponentKind.MOMENTUM))
    axis = cfg.model.grid.spin_axis
    for states_out, amp in rows[:40] + rows[-12:]:
        st1, st2 = states_out
        p3 = four_momentum(e.mass, st1.value_of(ComponentKind.MOMENTUM))
        p4 = four_momentum(p.mass, st2.value_of(ComponentKind.MOMENTUM))
        direct = bhabha_amplitude(
            ((p1, SpinLabel(states[0].value_of(ComponentKind.SPIN), axis)),
             (p2, SpinLabel(states[1].value_of(ComponentKind.SPIN), axis))),
            ((p3, SpinLabel(st1.value_of(ComponentKind.SPIN), axis)),
             (p4, SpinLabel(st2.value_of(ComponentKind.SPIN), axis))),
            exit_channel="e-e+")
        assert amp == pytest.approx(direct, rel=1e-9)


def test_projection_two_cell_toy_symmetry():
    def toy(entry, position):
        return [(entry.replace(ComponentKind.MOMENTUM, (0.0, 0.0, 1.0)), 1.0 + 0.0j),
                (entry.replace(ComponentKind.MOMENTUM, (0.0, 0.0, -1.0)), 0.0 + 1.0j)]

    reg = EntanglementRegistry()
    pw = localized(reg)
    cfg = InteractionConfig(model=MappingProjection(toy), channel_policy="field")
    state = reg.collection_of(pw).rows[0][0][0]
    rows = probabilistic_projection((state,), "field", cfg, CELL, (pw,))
    w = [abs(a) ** 2 for _, a in rows]
    assert np.allclose(np.array(w) / sum(w), [0.5, 0.5])


# --- run_interaction ----------------------------------------------------------------

class OneCellModel:
    """Toy projection with a single open exit row over two fresh particles."""

    conserves = False

    def channel_distribution(self, entry_states, entry_particles):
        return {"e-e+": 1.0}

    def exit_members(self, channel, entry_particles):
        return [particle(ParticleType.ELECTRON), particle(ParticleType.POSITRON)]

    def rows(self, entry_states, entry_particles, channel, position):
        st = path_state(position=position, spin=0.5)
        return [((st, st.replace(ComponentKind.SPIN, -0.5)), 1.0 + 0.0j)]


def test_run_interaction_deterministic_when_forced():
    outcomes = []
    for seed in (1, 2, 3):
        reg = EntanglementRegistry()
        e, p = beam_pair(reg)
        cfg = InteractionConfig(model=OneCellModel(), channel_policy="e-e+")
        res = run_interaction(e, p, cfg, reg, TraceRng(seed))
        exit_c = reg.get(res.exit_collection_id)
        outcomes.append((res.fluctuation.position, res.channel, tuple(exit_c.rows[0][0])))
    assert outcomes[0] == outcomes[1] == outcomes[2]


def test_run_interaction_position_superposition_symmetry():
    n = 2000
    hits = 0
    for i in range(n):
        reg = EntanglementRegistry()
        e = particle(ParticleType.ELECTRON)
        register_single(reg, e, [(path_state(position=CELL, spin=0.5), 2 ** -0.5),
                                 (path_state(position=CELL_B, spin=0.5), 2 ** -0.5)])
        p = particle(ParticleType.POSITRON)
        register_single(reg, p, [(path_state(position=CELL, spin=-0.5), 2 ** -0.5),
                                 (path_state(position=CELL_B, spin=-0.5), 2 ** -0.5)])
        cfg = InteractionConfig(model=OneCellModel(), channel_policy="e-e+")
        res = run_interaction(e, p, cfg, reg, TraceRng((9, i)))
        hits += res.fluctuation.position == CELL
    assert abs(hits / n - 0.5) <= binomial_3sigma(0.5, n)


def test_run_interaction_full_bhabha_bookkeeping():
    reg = EntanglementRegistry()
    e, p = beam_pair(reg)
    ids_before = (e.collection_ref, p.collection_ref)
    cfg = bhabha_config(channel_policy="dynamic", audit=True)
    res = run_interaction(e, p, cfg, reg, TraceRng(42))
    exit_c = reg.get(res.exit_collection_id)
    assert sum(abs(a) ** 2 for _, a in exit_c.rows) == pytest.approx(1.0, abs=1e-12)
    m1, m2 = exit_c.members
    assert m1.collection_ref == m2.collection_ref == exit_c.id
    assert set(res.collapsed_ids) == set(ids_before)
    assert e.collection_ref is None and p.collection_ref is None
    audit_registry(reg)


def test_run_interaction_three_decisions_and_draw_counts():
    reg = EntanglementRegistry()
    e, p = beam_pair(reg)
    cfg = bhabha_config(channel_policy="dynamic")
    rng = TraceRng(4)
    res = run_interaction(e, p, cfg, reg, rng)
    kinds = [d.kind for d in res.decisions]
    assert kinds == ["position", "path", "channel"]
    assert len(res.decisions[0].draws) == 1
    assert len(res.decisions[1].draws) == 2   # two separate entry collections
    assert len(res.decisions[2].draws) == 1
    assert len(rng.draws) == 4
    # fixed channel policy consumes no channel draw
    reg2 = EntanglementRegistry()
    e2, p2 = beam_pair(reg2)
    rng2 = TraceRng(4)
    res2 = run_interaction(e2, p2, bhabha_config(channel_policy="e-e+"), reg2, rng2)
    assert res2.decisions[2].draws == ()
    assert len(rng2.draws) == 3


def test_run_interaction_log_lines_order():
    reg = EntanglementRegistry()
    e, p = beam_pair(reg)
    res = run_interaction(e, p, bhabha_config(channel_policy="e-e+"), reg, TraceRng(2))
    lines = res.log_lines()
    actions = [l.split("\t")[0] for l in lines]
    assert actions == ["position", "path-reduction", "channel", "projection",
                       "entangle-exit", "collapse-entry"]
    assert actions.index("entangle-exit") < actions.index("collapse-entry")


def test_run_interaction_force_mismatch():
    reg = EntanglementRegistry()
    e, p = beam_pair(reg)
    odd = ParticleWave(ParticleType.ELECTRON, DEFAULT_CONSTANTS.m_e, frozenset())
    register_single(reg, odd, [(path_state(position=CELL, spin=0.5), 1.0)])
    with pytest.raises(ForceMismatch):
        run_interaction(odd, p, bhabha_config(channel_policy="e-e+"), reg, TraceRng(0))


def test_run_interaction_partner_without_support():
    reg = EntanglementRegistry()
    pz = math.sqrt(1000.0 ** 2 - DEFAULT_CONSTANTS.m_e ** 2)
    e = localized(reg, CELL, 0.5, ParticleType.ELECTRON, momentum=(0, 0, pz))
    p = localized(reg, CELL_B, -0.5, ParticleType.POSITRON, momentum=(0, 0, -pz))
    cfg = bhabha_config(channel_policy="e-e+")
    with pytest.raises(EmptySupport):
        # wherever the fluctuation lands, one participant has no amplitude
        run_interaction(e, p, cfg, reg, TraceRng(1))


def test_reduction_first_exit_table_ignores_discarded_rows():
    def run_with_phase(phase):
        reg = EntanglementRegistry()
        pz = math.sqrt(1000.0 ** 2 - DEFAULT_CONSTANTS.m_e ** 2)
        e = particle(ParticleType.ELECTRON)
        register_single(reg, e, [
            (path_state(position=CELL, spin=0.5, momentum=(0, 0, pz)), 0.6),
            (path_state(position=CELL, spin=-0.5, momentum=(0, 0, pz)), 0.8 * phase),
        ])
        p = localized(reg, CELL, -0.5, ParticleType.POSITRON, momentum=(0, 0, -pz))
        cfg = bhabha_config(channel_policy="e-e+", n_cos_bins=16)
        res = run_interaction(e, p, cfg, reg, TraceRng(123))
        exit_c = reg.get(res.exit_collection_id)
        return res.selected_entry_rows, list(exit_c.rows)

    sel_a, rows_a = run_with_phase(1.0 + 0.0j)
    # same Born weights, different phase on the row the draw discards
    sel_b, rows_b = run_with_phase(np.exp(0.7j))
    assert sel_a == sel_b == ((("pwc1", 0),) + sel_a[1:])  # row 0 selected under this seed
    assert len(rows_a) == len(rows_b)
    for (st_a, amp_a), (st_b, amp_b) in zip(rows_a, rows_b):
        assert st_a == st_b
        assert amp_a == amp_b  # bit-identical


def test_conservation_check_rejects_bad_rows():
    reg = EntanglementRegistry()
    e, p = beam_pair(reg, sqrt_s=1000.0)
    states = entry_states_for(reg, e, p)
    cfg = bhabha_config(channel_policy="e-e+")
    good = probabilistic_projection(states, "e-e+", cfg, CELL, (e, p))
    bad = [((st1.replace(ComponentKind.MOMENTUM,
                         tuple(2.0 * m for m in st1.value_of(ComponentKind.MOMENTUM))), st2), a)
           for (st1, st2), a in good]
    with pytest.raises(NoOpenExitStates):
        _check_conservation(states, (e, p), bad, "e-e+", cfg)
    kept = _check_conservation(states, (e, p), good, "e-e+", cfg)
    assert len(kept) == len(good)


def test_fluctuation_participants_share_force_and_position():
    reg = EntanglementRegistry()
    e, p = beam_pair(reg)
    res = run_interaction(e, p, bhabha_config(channel_policy="e-e+"), reg, TraceRng(8))
    assert res.fluctuation.force == Force.ELECTRO_WEAK
    assert res.fluctuation.participants == (e, p)
    assert res.fluctuation.position == CELL

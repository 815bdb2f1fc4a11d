"""The six-action interaction: position, reduction, channel, projection,
entanglement of the exit pair, collapse of the entries.

Each interaction makes exactly three stochastic decisions (position, path,
channel); their uniform draws are recorded so a seeded run can be replayed
and audited.  Exit tables are built only from the single selected entry row.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence, runtime_checkable

import numpy as np

from . import pathspace, qft
from .constants import Constants, DEFAULT_CONSTANTS, Force, ParticleType
from .errors import EmptySupport, ForceMismatch, NoOpenExitStates
from .pathspace import (
    ComponentKind,
    EntanglementRegistry,
    ParticleWave,
    PathState,
    PwCollection,
    Row,
    StateComponent,
    born_probabilities,
    particle,
)

GridCell = tuple[float, float, float]


@dataclass(frozen=True)
class PwFluctuation:
    """A force-typed amplification event at one grid cell; the participants
    are guaranteed by the engine to carry amplitude at the position."""

    position: GridCell
    force: Force
    participants: tuple[ParticleWave, ...]


@dataclass(frozen=True)
class Decision:
    """One transition from probabilities to facts, with the uniforms it used."""

    kind: str                    # "position" | "path" | "channel"
    draws: tuple[float, ...]
    outcome: object


@dataclass(frozen=True)
class ExitGrid:
    """Discretized exit kinematics: angular bins x spin labels per particle."""

    n_cos_bins: int = 64
    cos_cutoff: float = 0.999    # e-e+ exchange divergence regulator
    phi: float = 0.0
    spin_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.n_cos_bins < 1:
            raise ValueError("exit grid needs at least one angular bin")
        if not (0.0 < self.cos_cutoff <= 1.0):
            raise ValueError("cos cutoff must lie in (0, 1]")

    def cos_centers(self, channel: str) -> np.ndarray:
        cut = self.cos_cutoff if channel == "e-e+" else 1.0
        edges = np.linspace(-cut, cut, self.n_cos_bins + 1)
        return 0.5 * (edges[:-1] + edges[1:])


@runtime_checkable
class ProjectionModel(Protocol):
    """Supplies the amplitude law and exit particles of an interaction."""

    conserves: bool

    def channel_distribution(self, entry_states, entry_particles) -> dict[str, float]: ...

    def exit_members(self, channel: str, entry_particles) -> list[ParticleWave]: ...

    def rows(self, entry_states, entry_particles, channel: str,
             position: GridCell) -> list[Row]: ...


@dataclass
class BhabhaProjection:
    """Eq.-(1)-backed exit tables over an angular x spin grid (CM frame)."""

    grid: ExitGrid = field(default_factory=ExitGrid)
    constants: Constants = DEFAULT_CONSTANTS
    quad_nodes: int = 64
    conserves: bool = True

    def _entry_momenta(self, entry_states, entry_particles):
        by_type = {}
        for state, pw in zip(entry_states, entry_particles):
            by_type[pw.ptype] = (state, pw)
        if set(by_type) != {ParticleType.ELECTRON, ParticleType.POSITRON}:
            raise ForceMismatch(f"Bhabha projection needs e- and e+ entries, got {list(by_type)}")
        out = []
        for ptype in (ParticleType.ELECTRON, ParticleType.POSITRON):
            state, pw = by_type[ptype]
            p3 = state.value_of(ComponentKind.MOMENTUM)
            spin = state.value_of(ComponentKind.SPIN)
            p4 = qft.four_momentum(pw.mass, p3)
            out.append((p4, qft.SpinLabel(spin, self.grid.spin_axis)))
        total = out[0][0] + out[1][0]
        if math.sqrt(sum(x * x for x in total.p)) > 1e-6 * total.E:
            raise NoOpenExitStates("entry momenta are not in the CM frame; no grid cell conserves")
        return out, total

    def channel_distribution(self, entry_states, entry_particles) -> dict[str, float]:
        _, total = self._entry_momenta(entry_states, entry_particles)
        return qft.channel_weights(
            (ParticleType.ELECTRON, ParticleType.POSITRON), total.invariant_mass(),
            self.constants, n_nodes=self.quad_nodes, cos_cutoff=self.grid.cos_cutoff)

    def exit_members(self, channel: str, entry_particles) -> list[ParticleWave]:
        t1, t2 = qft.CHANNEL_TYPES[channel]
        return [particle(t1, self.constants), particle(t2, self.constants)]

    def rows(self, entry_states, entry_particles, channel: str,
             position: GridCell) -> list[Row]:
        entry, total = self._entry_momenta(entry_states, entry_particles)
        sqrt_s = total.invariant_mass()
        m_out = qft.channel_mass(channel, self.constants)
        E_out = sqrt_s / 2.0
        p_out = math.sqrt(E_out ** 2 - m_out ** 2)
        centers = self.grid.cos_centers(channel)
        amps = qft.bhabha_exit_table(entry, centers, self.grid.phi, channel,
                                     self.constants, self.grid.spin_axis)
        dirs = qft.exit_directions(centers, self.grid.phi)
        # components are shared across rows; order matches path_state()
        pos_c = StateComponent(ComponentKind.POSITION, position)
        spin_c = {s: StateComponent(ComponentKind.SPIN, s) for s in (0.5, -0.5)}
        rows: list[Row] = []
        for i, d in enumerate(dirs):
            mom1 = StateComponent(ComponentKind.MOMENTUM, tuple(p_out * d))
            mom2 = StateComponent(ComponentKind.MOMENTUM, tuple(-p_out * d))
            states1 = {s: PathState((mom1, pos_c, spin_c[s])) for s in (0.5, -0.5)}
            states2 = {s: PathState((mom2, pos_c, spin_c[s])) for s in (0.5, -0.5)}
            for i3, s3 in enumerate((0.5, -0.5)):
                for i4, s4 in enumerate((0.5, -0.5)):
                    rows.append(((states1[s3], states2[s4]), complex(amps[i, i3, i4])))
        return rows


@dataclass
class MappingProjection:
    """Scenario-declared amplitude function for one-particle (field) stages."""

    row_fn: Callable[[PathState, GridCell], list[tuple[PathState, complex]]]
    channel_label: str = "field"
    conserves: bool = False

    def channel_distribution(self, entry_states, entry_particles) -> dict[str, float]:
        return {self.channel_label: 1.0}

    def exit_members(self, channel: str, entry_particles) -> list[ParticleWave]:
        src = entry_particles[0]
        fresh = ParticleWave(src.ptype, src.mass, src.force_tags)
        return [fresh]

    def rows(self, entry_states, entry_particles, channel: str,
             position: GridCell) -> list[Row]:
        return [((state,), complex(a)) for state, a in self.row_fn(entry_states[0], position)]


@dataclass
class InteractionConfig:
    """Everything an interaction needs besides its participants."""

    model: object                       # ProjectionModel
    channel_policy: str = "dynamic"     # "dynamic" | a channel label | "field"
    constants: Constants = DEFAULT_CONSTANTS
    conservation_rtol: float = 1e-6
    uniform_fallback: bool = False
    audit: bool = False


@dataclass
class InteractionResult:
    """Record of one full interaction, ordered as executed."""

    fluctuation: PwFluctuation
    selected_entry_rows: tuple[tuple[str, int], ...]   # (collection id, row)
    channel: str
    exit_collection_id: str
    collapsed_ids: tuple[str, ...]
    decisions: tuple[Decision, ...]
    exit_members: tuple[ParticleWave, ...]
    entry_states: tuple[PathState, ...]                # definite, per participant

    def log_lines(self) -> list[str]:
        d = {dec.kind: dec for dec in self.decisions}
        fmt = lambda dec: ",".join(f"{u:.17g}" for u in dec.draws) or "-"
        return [
            f"position\tdraws={fmt(d['position'])}\tcell={self.fluctuation.position}",
            f"path-reduction\tdraws={fmt(d['path'])}\trows={self.selected_entry_rows}",
            f"channel\tdraws={fmt(d['channel'])}\tchoice={self.channel}",
            f"projection\tdraws=-\texit_rows>=1",
            f"entangle-exit\tdraws=-\tcollection={self.exit_collection_id}",
            f"collapse-entry\tdraws=-\tdiscarded={list(self.collapsed_ids)}",
        ]


def positional_marginal(c: PwCollection, member_index: int) -> dict[GridCell, float]:
    """Born mass per position cell for one member; rows without a position
    component contribute nothing (sub-normalized is fine)."""
    p = pathspace._born_list(c.rows)
    out: dict[GridCell, float] = {}
    for (states, _), prob in zip(c.rows, p):
        st = states[member_index]
        if st.has(ComponentKind.POSITION):
            cell = st.value_of(ComponentKind.POSITION)
            out[cell] = out.get(cell, 0.0) + prob
    return out


def sample_fluctuation_position(particles: Sequence[ParticleWave],
                                registry: EntanglementRegistry, rng) -> GridCell:
    """Sample one grid cell from the summed positional densities of the
    participants.  Consumes exactly one uniform."""
    cells: list[GridCell] = []
    weights: list[float] = []
    index: dict[GridCell, int] = {}
    for pw in particles:
        c = registry.collection_of(pw)
        for cell, w in positional_marginal(c, pw.member_index).items():
            if cell in index:
                weights[index[cell]] += w
            else:
                index[cell] = len(cells)
                cells.append(cell)
                weights.append(w)
    total = sum(weights)
    if total <= 0.0:
        raise EmptySupport("no participant carries positional amplitude")
    probs = [w / total for w in weights]
    u = rng.random()
    return cells[pathspace._pick_index(pathspace._cumulative(probs), probs, u)]


def select_partner(position: GridCell, candidates: Sequence[ParticleWave],
                   force: Force, registry: EntanglementRegistry, rng) -> Optional[ParticleWave]:
    """Uniform choice among candidates with support at `position` and the
    matching force tag; None when nobody qualifies."""
    qualifying = []
    for pw in candidates:
        if force not in pw.force_tags:
            continue
        c = registry.collection_of(pw)
        if positional_marginal(c, pw.member_index).get(position, 0.0) > 0.0:
            qualifying.append(pw)
    if not qualifying:
        return None
    u = rng.random()
    n = len(qualifying)
    probs = [1.0 / n] * n
    return qualifying[pathspace._pick_index(pathspace._cumulative(probs), probs, u)]


def _conditioned_select(c: PwCollection, member_indices: Sequence[int],
                        position: GridCell, rng) -> int:
    """Path selection conditioned on the fluctuation position: rows where a
    participating member has zero positional amplitude at the cell are
    excluded, survivors renormalized proportionally.  One uniform."""
    cond = pathspace._born_list(c.rows)
    for i, (states, _) in enumerate(c.rows):
        for mi in member_indices:
            st = states[mi]
            if st.has(ComponentKind.POSITION) and st.value_of(ComponentKind.POSITION) != position:
                cond[i] = 0.0
                break
    total = sum(cond)
    u = rng.random()
    if total <= 0.0:
        raise EmptySupport(
            "participant has no amplitude at the fluctuation position "
            "(single-particle fluctuation; nothing durable happens)")
    cond = [x / total for x in cond]
    return pathspace._pick_index(pathspace._cumulative(cond), cond, u)


def probabilistic_projection(entry_states: Sequence[PathState], channel: str,
                             config: InteractionConfig, position: GridCell,
                             entry_particles: Sequence[ParticleWave]) -> list[Row]:
    """Exit row table for definite entry states under the config's model.

    Zero-amplitude rows are dropped; an entirely zero table is an error
    unless the uniform fallback was declared.
    """
    rows = config.model.rows(entry_states, entry_particles, channel, position)
    live = [(states, a) for states, a in rows if a != 0]
    if not live:
        if config.uniform_fallback and rows:
            amp = complex(1.0 / math.sqrt(len(rows)))
            return [(states, amp) for states, _ in rows]
        raise NoOpenExitStates("every exit row has zero amplitude")
    return live


def _check_conservation(entry_states, entry_particles, rows, channel,
                        config: InteractionConfig) -> list[Row]:
    """Keep only rows whose exit total four-momentum matches the entry total
    within the per-component tolerance (scaled by the total entry energy)."""
    masses = [config.constants.mass_of(t) for t in qft.CHANNEL_TYPES[channel]]
    entry_total = None
    for state, pw in zip(entry_states, entry_particles):
        p4 = qft.four_momentum(pw.mass, state.value_of(ComponentKind.MOMENTUM))
        entry_total = p4 if entry_total is None else entry_total + p4
    tol = config.conservation_rtol * entry_total.E
    mom = np.array([[st.value_of(ComponentKind.MOMENTUM) for st in states]
                    for states, _ in rows])                       # (n, k, 3)
    energies = np.sqrt(np.array(masses) ** 2 + np.sum(mom ** 2, axis=2))
    delta_e = energies.sum(axis=1) - entry_total.E
    delta_p = mom.sum(axis=1) - np.array(entry_total.p)
    ok = (np.abs(delta_e) <= tol) & np.all(np.abs(delta_p) <= tol, axis=1)
    kept = [row for row, good in zip(rows, ok) if good]
    if not kept:
        raise NoOpenExitStates("four-momentum conservation excludes the whole exit grid")
    return kept


def run_interaction(measured: ParticleWave, ma_object, config: InteractionConfig,
                    registry: EntanglementRegistry, rng) -> InteractionResult:
    """Execute the six actions in order and return the audited record.

    `ma_object` is either a second ParticleWave or a field-like object with a
    `force` attribute (its amplitude mapping lives in config.model).
    """
    field_like = not isinstance(ma_object, ParticleWave)
    force = Force.ELECTRO_WEAK
    if force not in measured.force_tags:
        raise ForceMismatch(f"{measured.ptype.value} does not couple electro-weak")
    if field_like:
        if getattr(ma_object, "force", force) != force:
            raise ForceMismatch("field object does not couple electro-weak")
        participants = (measured,)
    else:
        if force not in ma_object.force_tags:
            raise ForceMismatch(f"{ma_object.ptype.value} does not couple electro-weak")
        participants = (measured, ma_object)

    # (1) position determination
    mark = len(rng.draws)
    position = sample_fluctuation_position(participants, registry, rng)
    d_position = Decision("position", tuple(rng.draws[mark:]), position)
    fluct = PwFluctuation(position, force, participants)

    # (2) reduction: one conditioned path draw per distinct entry collection
    collections: list[PwCollection] = []
    members_in: list[list[int]] = []
    slot: dict[int, int] = {}
    for pw in participants:
        c = registry.collection_of(pw)
        if id(c) not in slot:
            slot[id(c)] = len(collections)
            collections.append(c)
            members_in.append([])
        members_in[slot[id(c)]].append(pw.member_index)
    mark = len(rng.draws)
    selected = [_conditioned_select(c, mi, position, rng)
                for c, mi in zip(collections, members_in)]
    d_path = Decision("path", tuple(rng.draws[mark:]),
                      tuple((c.id, s) for c, s in zip(collections, selected)))

    entry_states = []
    for pw in participants:
        c = registry.collection_of(pw)
        entry_states.append(c.rows[selected[slot[id(c)]]][0][pw.member_index])

    # (3) channel determination
    mark = len(rng.draws)
    if config.channel_policy == "dynamic":
        dist = config.model.channel_distribution(entry_states, participants)
        labels = [c for c in qft.CHANNELS if dist.get(c, 0.0) > 0.0]
        probs = [dist[c] for c in labels]
        u = rng.random()
        channel = labels[pathspace._pick_index(np.cumsum(probs), probs, u)]
    else:
        channel = config.channel_policy
    d_channel = Decision("channel", tuple(rng.draws[mark:]), channel)

    # (4) probabilistic projection (information exchange)
    rows = probabilistic_projection(entry_states, channel, config, position, participants)
    if config.model.conserves:
        rows = _check_conservation(entry_states, participants, rows, channel, config)

    # (5) exit collection: common rows entangle the exit pair
    exit_members = config.model.exit_members(channel, participants)
    exit_collection = pathspace.join_entangled(exit_members, rows, registry)

    # (6) collapse: entry collections discarded, participants consumed
    collapsed_ids = []
    for c, row in zip(collections, selected):
        collapsed_ids.append(c.id)
        pathspace.collapse(c, row, registry)
        for pw in c.members:
            if any(pw is q for q in participants) and pw.collection_ref is not None:
                registry.remove(pw.collection_ref)
                pw.collection_ref = None
                pw.member_index = None

    if config.audit:
        pathspace.audit_registry(registry)

    return InteractionResult(
        fluctuation=fluct,
        selected_entry_rows=d_path.outcome,
        channel=channel,
        exit_collection_id=exit_collection.id,
        collapsed_ids=tuple(collapsed_ids),
        decisions=(d_position, d_path, d_channel),
        exit_members=tuple(exit_members),
        entry_states=tuple(entry_states),
    )

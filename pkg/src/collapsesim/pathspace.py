"""Path collections: superposition, Born sampling, collapse, entanglement.

A particle/wave owns a reference into a joint path table (one complex
amplitude per row; rows span every member of the table).  Entanglement is
nothing but shared rows; collapse is row selection plus destruction of the
table.  The registry is the global, deliberately location-free bookkeeping
of which tables are live.
"""
from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from enum import Enum
from itertools import count
from typing import Iterable, Optional, Sequence

import numpy as np

from .constants import FORCE_TAGS, SPIN_MAGNITUDE, Constants, DEFAULT_CONSTANTS, Force, ParticleType
from .errors import (
    AllAmplitudesZero,
    MemberAlreadyEntangled,
    ShapeMismatch,
    StaleCollection,
    UnknownComponentKind,
)

NORMALIZATION_TOL = 1e-12


class ComponentKind(str, Enum):
    POSITION = "position"
    MOMENTUM = "momentum"
    SPIN = "spin"


_ALLOWED_SPIN = (-1.0, -0.5, 0.5, 1.0)


@dataclass(frozen=True, slots=True)
class StateComponent:
    """One observable's definite value inside a path.

    Position and momentum are 3-tuples (natural-unit length / MeV); spin is a
    projection label along the scenario's declared axis.
    """

    kind: ComponentKind
    value: tuple[float, float, float] | float

    def __post_init__(self):
        if self.kind is ComponentKind.SPIN:
            if self.value not in _ALLOWED_SPIN:
                raise ValueError(f"spin projection must be one of {_ALLOWED_SPIN}, got {self.value}")
        else:
            v = self.value
            if not (isinstance(v, tuple) and len(v) == 3
                    and math.isfinite(v[0]) and math.isfinite(v[1]) and math.isfinite(v[2])):
                raise ValueError(f"{self.kind.value} value must be a finite 3-tuple, got {v!r}")


@dataclass(frozen=True, slots=True)
class PathState:
    """Definite values for every declared observable of one particle."""

    components: tuple[StateComponent, ...]

    def __post_init__(self):
        kinds = [c.kind for c in self.components]
        if len(set(kinds)) != len(kinds):
            raise ValueError("duplicated component kind within one path state")

    def value_of(self, kind: ComponentKind):
        for c in self.components:
            if c.kind is kind:
                return c.value
        raise UnknownComponentKind(f"path state has no {kind.value} component")

    def has(self, kind: ComponentKind) -> bool:
        return any(c.kind is kind for c in self.components)

    def replace(self, kind: ComponentKind, value) -> "PathState":
        """Copy with one component's value swapped (adding it if absent)."""
        comps = [c for c in self.components if c.kind is not kind]
        comps.append(StateComponent(kind, value))
        comps.sort(key=lambda c: c.kind.value)
        return PathState(tuple(comps))


def path_state(position=None, momentum=None, spin=None) -> PathState:
    """Convenience builder; components stored in a fixed kind order."""
    comps = []
    if momentum is not None:
        comps.append(StateComponent(ComponentKind.MOMENTUM, tuple(float(x) for x in momentum)))
    if position is not None:
        comps.append(StateComponent(ComponentKind.POSITION, tuple(float(x) for x in position)))
    if spin is not None:
        comps.append(StateComponent(ComponentKind.SPIN, float(spin)))
    comps.sort(key=lambda c: c.kind.value)
    return PathState(tuple(comps))


class ParticleWave:
    """A typed quantum object; its state lives in exactly one collection."""

    __slots__ = ("ptype", "mass", "force_tags", "collection_ref", "member_index")

    def __init__(self, ptype: ParticleType, mass: float, force_tags: frozenset[Force]):
        self.ptype = ptype
        self.mass = float(mass)
        self.force_tags = force_tags
        self.collection_ref: Optional[str] = None
        self.member_index: Optional[int] = None

    def __repr__(self):
        return f"ParticleWave({self.ptype.value}, m={self.mass}, ref={self.collection_ref})"


def particle(ptype: ParticleType, constants: Constants = DEFAULT_CONSTANTS) -> ParticleWave:
    """Create a particle with its mass and force tags from the constants table."""
    return ParticleWave(ptype, constants.mass_of(ptype), FORCE_TAGS[ptype])


Row = tuple[tuple[PathState, ...], complex]


class PwCollection:
    """Joint path table: rows of per-member states, one amplitude per row."""

    __slots__ = ("id", "members", "rows", "normalized")

    def __init__(self, members: Sequence[ParticleWave], rows: Sequence[Row], normalized: bool = False):
        self.id: Optional[str] = None
        self.members = list(members)
        self.rows = [(tuple(states), complex(a)) for states, a in rows]
        self.normalized = normalized

    def amplitudes(self) -> np.ndarray:
        return np.array([a for _, a in self.rows], dtype=complex)

    def member_states(self, row_index: int) -> tuple[PathState, ...]:
        return self.rows[row_index][0]

    def __len__(self):
        return len(self.rows)

    def __repr__(self):
        return f"PwCollection(id={self.id}, members={len(self.members)}, rows={len(self.rows)})"


def _validate_rows(members: Sequence[ParticleWave], rows: Sequence[Row]):
    if not rows:
        raise ShapeMismatch("a collection needs at least one row")
    n = len(members)
    for states, a in rows:
        if len(states) != n:
            raise ShapeMismatch(f"row has {len(states)} states for {n} members")
        if not (math.isfinite(a.real) and math.isfinite(a.imag)):
            raise ValueError(f"non-finite amplitude {a}")
        for member, state in zip(members, states):
            if state.has(ComponentKind.SPIN):
                want = SPIN_MAGNITUDE[member.ptype]
                if abs(state.value_of(ComponentKind.SPIN)) != want:
                    raise ShapeMismatch(
                        f"{member.ptype.value} spin projection magnitude must be {want}")


def normalized_rows(rows: Sequence[Row]) -> list[Row]:
    """Scale amplitudes so the modulus-squared sum is exactly one."""
    total = sum(abs(a) ** 2 for _, a in rows)
    if total == 0.0:
        raise AllAmplitudesZero("cannot normalize a table whose amplitudes are all zero")
    scale = 1.0 / math.sqrt(total)
    return [(states, a * scale) for states, a in rows]


class EntanglementRegistry:
    """Live collections by id; every particle resolves to exactly one."""

    def __init__(self):
        self._live: dict[str, PwCollection] = {}
        self._ids = count(1)

    def register(self, c: PwCollection) -> str:
        c.id = f"pwc{next(self._ids)}"
        self._live[c.id] = c
        for i, m in enumerate(c.members):
            m.collection_ref = c.id
            m.member_index = i
        return c.id

    def remove(self, cid: str):
        del self._live[cid]

    def get(self, cid: str) -> PwCollection:
        try:
            return self._live[cid]
        except KeyError:
            raise StaleCollection(f"collection {cid} is not live") from None

    def is_live(self, c: PwCollection) -> bool:
        return c.id is not None and self._live.get(c.id) is c

    def collection_of(self, p: ParticleWave) -> PwCollection:
        if p.collection_ref is None:
            raise StaleCollection("particle is not attached to any live collection")
        return self.get(p.collection_ref)

    def live_collections(self) -> list[PwCollection]:
        return list(self._live.values())

    def __len__(self):
        return len(self._live)


def register_single(registry: EntanglementRegistry, member: ParticleWave,
                    rows: Sequence[Row]) -> PwCollection:
    """Register a one-member collection with normalized rows."""
    wrapped = [((s,) if isinstance(s, PathState) else tuple(s), a) for s, a in rows]
    _validate_rows([member], wrapped)
    c = PwCollection([member], normalized_rows(wrapped), normalized=True)
    registry.register(c)
    return c


def _born_list(rows: Sequence[Row]) -> list[float]:
    """Normalized Born weights as a plain list (scalar-path fast lane)."""
    w = [a.real * a.real + a.imag * a.imag for _, a in rows]
    total = sum(w)
    if total == 0.0:
        raise AllAmplitudesZero(f"all {len(w)} row amplitudes are zero")
    return [x / total for x in w]


def born_probabilities(c: PwCollection) -> np.ndarray:
    """Row probabilities |a_i|^2 / sum_j |a_j|^2, in row order."""
    return np.array(_born_list(c.rows))


def _pick_index(cum: Sequence[float], probs: Sequence[float], u: float) -> int:
    """Inverse-CDF pick; exact boundary hits go to the lower row and
    zero-probability rows are never returned."""
    i = bisect_left(cum, u)
    n = len(probs)
    if i >= n:
        i = n - 1
    while probs[i] == 0.0:
        i += 1
        if i == n:  # trailing zero rows after a boundary rounding hit
            i = max(j for j in range(n) if probs[j] > 0.0)
            break
    return i


def _cumulative(p: Sequence[float]) -> list[float]:
    out = []
    run = 0.0
    for x in p:
        run += x
        out.append(run)
    return out


def select_path(c: PwCollection, rng) -> int:
    """Draw one row index by Born weight.  Consumes exactly one uniform."""
    p = _born_list(c.rows)
    u = rng.random()
    return _pick_index(_cumulative(p), p, u)


def sample_rows(c: PwCollection, n: int, gen: np.random.Generator) -> np.ndarray:
    """Vectorized Born sampling of n row indices (one uniform per draw)."""
    p = born_probabilities(c)
    cum = np.cumsum(p)
    u = gen.random(n)
    idx = np.searchsorted(cum, u, side="left")
    idx = np.minimum(idx, len(p) - 1)
    if np.any(p == 0.0):
        # boundary hits on zero-mass rows advance to the next nonzero row
        nz = np.flatnonzero(p > 0.0)
        pos = np.minimum(np.searchsorted(nz, idx, side="left"), len(nz) - 1)
        idx = nz[pos]
    return idx


def collapse(c: PwCollection, selected: int, registry: EntanglementRegistry) -> PwCollection:
    """Reduce a live collection to one definite row and discard it.

    Every member (including entangled partners that never interacted) ends up
    in its own live one-member collection holding its definite state: the
    joint state is a product after selection, so entanglement terminates here.
    Returns the definite-outcome table; for a one-member input that is the
    member's new live collection, for a joint input it is an unregistered
    snapshot of the selected row.
    """
    if not registry.is_live(c):
        raise StaleCollection(f"collection {c.id!r} is not live")
    if not (0 <= selected < len(c.rows)):
        raise IndexError(f"row {selected} out of range for {len(c.rows)} rows")
    states = c.rows[selected][0]
    registry.remove(c.id)
    outcome = PwCollection(c.members, [(states, 1.0 + 0.0j)], normalized=True)
    if len(c.members) == 1:
        registry.register(outcome)
        return outcome
    for i, m in enumerate(c.members):
        single = PwCollection([m], [((states[i],), 1.0 + 0.0j)], normalized=True)
        registry.register(single)
    return outcome


def join_entangled(members: Sequence[ParticleWave], rows: Sequence[Row],
                   registry: EntanglementRegistry) -> PwCollection:
    """Register a normalized joint collection over `members`.

    Members must be unattached or live in single-member collections; the old
    collections are removed and every member re-pointed.
    """
    members = list(members)
    if len(set(map(id, members))) != len(members):
        raise ShapeMismatch("duplicate member in join")
    _validate_rows(members, rows)
    old: list[str] = []
    for m in members:
        if m.collection_ref is None:
            continue
        current = registry.get(m.collection_ref)
        if len(current.members) > 1:
            raise MemberAlreadyEntangled(
                f"{m.ptype.value} is entangled in {current.id} ({len(current.members)} members)")
        old.append(current.id)
    joint = PwCollection(members, normalized_rows(rows), normalized=True)
    for cid in old:
        registry.remove(cid)
    registry.register(joint)
    return joint


def marginal_probabilities(c: PwCollection, member_index: int, kind: ComponentKind) -> dict:
    """Distribution of one member's component values, keyed in row order."""
    if not (0 <= member_index < len(c.members)):
        raise IndexError(f"member index {member_index} out of range")
    p = born_probabilities(c)
    out: dict = {}
    for (states, _), prob in zip(c.rows, p):
        v = states[member_index].value_of(kind)
        out[v] = out.get(v, 0.0) + float(prob)
    return out


def audit_registry(registry: EntanglementRegistry):
    """Full-scan coherence check; raises AssertionError on the first defect."""
    seen: dict[int, str] = {}
    for cid, c in registry._live.items():
        assert c.id == cid, f"collection id {c.id} filed under {cid}"
        assert len(c.members) >= 1, f"{cid} has no members"
        for i, m in enumerate(c.members):
            assert m.collection_ref == cid, f"member {i} of {cid} points to {m.collection_ref}"
            assert m.member_index == i, f"member {i} of {cid} carries index {m.member_index}"
            assert id(m) not in seen, f"particle in both {seen[id(m)]} and {cid}"
            seen[id(m)] = cid
        total = float(np.sum(np.abs(c.amplitudes()) ** 2))
        assert total > 0.0, f"{cid} has all-zero amplitudes"
        assert abs(total - 1.0) <= NORMALIZATION_TOL, f"{cid} norm {total} != 1"
        n = len(c.members)
        for states, _ in c.rows:
            assert len(states) == n, f"{cid} row arity {len(states)} != {n}"

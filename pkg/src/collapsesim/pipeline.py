"""Measurement pipelines: chained interactions ending in a detector bin.

A spin measurement needs two interactions (paper-style Stern-Gerlach): an
inhomogeneous-magnetic field projects the spin onto a momentum deflection,
and a screen maps the deflection onto an observable position.  The detector
performs the final readout reduction; only definite values ever reach the
MeasurementRecord.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

from . import pathspace
from .constants import Constants, DEFAULT_CONSTANTS, Force, ParticleType
from .engine import InteractionConfig, MappingProjection, run_interaction
from .errors import DetectorMiss, ShapeMismatch, ValidationError
from .pathspace import (
    ComponentKind,
    EntanglementRegistry,
    ParticleWave,
    PathState,
    particle,
    path_state,
)

DEFAULT_PEAK_THRESHOLD = 0.999


def _unit(axis) -> tuple[float, float, float]:
    n = math.sqrt(sum(x * x for x in axis))
    if n == 0:
        raise ValueError("zero axis")
    return tuple(float(x) / n for x in axis)


@dataclass(frozen=True)
class FieldObject:
    """Inhomogeneous magnetic field as a declared spin->deflection mapping.

    `peak` is the probability mass the mapping puts on the deflection bin
    matching the entry spin eigenstate.  When `peak_threshold` is declared
    the mapping's peak amplitude modulus must reach it (sharp-projection
    regime); the soft stages of the augmentation studies declare None.
    """

    axis: tuple[float, float, float]
    gradient_strength: float = 1.0
    peak: float = 1.0
    peak_threshold: Optional[float] = DEFAULT_PEAK_THRESHOLD
    force: Force = Force.ELECTRO_WEAK
    kind: str = "inhomogeneous-magnetic"

    def __post_init__(self):
        object.__setattr__(self, "axis", _unit(self.axis))
        if not (0.0 < self.peak <= 1.0):
            raise ValueError(f"peak mass must lie in (0, 1], got {self.peak}")
        if self.peak_threshold is not None and math.sqrt(self.peak) < self.peak_threshold:
            raise ValidationError(
                "field-peak-threshold",
                f"mapping peak amplitude {math.sqrt(self.peak):.6g} below "
                f"declared threshold {self.peak_threshold}")

    def mapping(self, spin: float) -> list[tuple[float, complex]]:
        """Amplitude per deflection sign for a definite entry projection."""
        match = 1.0 if spin > 0 else -1.0
        out = [(match, complex(math.sqrt(self.peak)))]
        if self.peak < 1.0:
            out.append((-match, complex(math.sqrt(1.0 - self.peak))))
        return out

    def projection_rows(self, entry: PathState, position) -> list[tuple[PathState, complex]]:
        spin = entry.value_of(ComponentKind.SPIN)
        rows = []
        for sign, amp in self.mapping(spin):
            kick = tuple(sign * self.gradient_strength * a for a in self.axis)
            rows.append((entry.replace(ComponentKind.MOMENTUM, kick), amp))
        return rows


@dataclass(frozen=True)
class ScreenObject:
    """Second interaction: deterministic deflection-sign -> screen-half map."""

    axis: tuple[float, float, float]
    force: Force = Force.ELECTRO_WEAK
    kind: str = "screen"

    def __post_init__(self):
        object.__setattr__(self, "axis", _unit(self.axis))

    def projection_rows(self, entry: PathState, position) -> list[tuple[PathState, complex]]:
        mom = entry.value_of(ComponentKind.MOMENTUM)
        d = sum(m * a for m, a in zip(mom, self.axis))
        sign = 1.0 if d > 0 else (-1.0 if d < 0 else 0.0)
        screen_cell = tuple(sign * a for a in self.axis)
        return [(entry.replace(ComponentKind.POSITION, screen_cell), complex(1.0))]


@dataclass(frozen=True)
class AxisBinDetector:
    """Two screen halves along an axis; a dead-center hit misses both."""

    axis: tuple[float, float, float]
    labels: tuple[str, str] = ("up", "down")

    def classify(self, outcomes: Sequence[dict]) -> tuple[int, str]:
        pos = outcomes[-1].get("position")
        if pos is None:
            raise DetectorMiss("final state carries no position")
        d = sum(p * a for p, a in zip(pos, self.axis))
        if d > 0:
            return 0, self.labels[0]
        if d < 0:
            return 1, self.labels[1]
        raise DetectorMiss("final position falls on the bin boundary")


@dataclass(frozen=True)
class MajorityDetector:
    """Majority of per-stage deflection readings; ties go to the first stage."""

    axis: tuple[float, float, float]
    labels: tuple[str, str] = ("up", "down")

    def classify(self, outcomes: Sequence[dict]) -> tuple[int, str]:
        signs = []
        for values in outcomes:
            mom = values.get("momentum")
            if mom is None:
                continue
            d = sum(m * a for m, a in zip(mom, self.axis))
            if d == 0:
                raise DetectorMiss("stage reading falls on the bin boundary")
            signs.append(1 if d > 0 else -1)
        if not signs:
            raise DetectorMiss("no stage produced a deflection reading")
        total = sum(signs)
        winner = signs[0] if total == 0 else (1 if total > 0 else -1)
        return (0, self.labels[0]) if winner > 0 else (1, self.labels[1])


@dataclass(frozen=True)
class ApparatusStage:
    ma_object: object
    config: InteractionConfig


@dataclass(frozen=True)
class Apparatus:
    stages: tuple[ApparatusStage, ...]
    detector: object

    def __post_init__(self):
        if not self.stages:
            raise ValueError("apparatus needs at least one stage")


@dataclass(frozen=True)
class MeasurementRecord:
    """Definite per-stage values plus the RNG trace needed for replay."""

    outcome: tuple[dict, ...]
    detector_bin: int
    detector_label: str
    seed: tuple
    draws: tuple[float, ...]


def _state_values(state: PathState) -> dict:
    out = {}
    for comp in state.components:
        out[comp.kind.value] = comp.value
    return out


def _stage_config(ma_object, constants: Constants, audit: bool) -> InteractionConfig:
    return InteractionConfig(
        model=MappingProjection(ma_object.projection_rows),
        channel_policy="field",
        constants=constants,
        audit=audit,
    )


def _run_measurement_ex(apparatus: Apparatus, pw: ParticleWave,
                        registry: EntanglementRegistry, rng):
    mark = len(rng.draws)
    results = []
    current = pw
    for stage in apparatus.stages:
        res = run_interaction(current, stage.ma_object, stage.config, registry, rng)
        results.append(res)
        current = res.exit_members[0]
    # A stage's measured value only becomes definite at the next reduction;
    # the detector supplies the final one.
    realized = [results[j + 1].entry_states[0] for j in range(len(results) - 1)]
    final_c = registry.collection_of(current)
    idx = pathspace.select_path(final_c, rng)
    final_state = final_c.rows[idx][0][current.member_index]
    pathspace.collapse(final_c, idx, registry)
    realized.append(final_state)
    outcomes = tuple(_state_values(st) for st in realized)
    bin_idx, label = apparatus.detector.classify(outcomes)
    record = MeasurementRecord(
        outcome=outcomes,
        detector_bin=bin_idx,
        detector_label=label,
        seed=rng.seed_key,
        draws=tuple(rng.draws[mark:]),
    )
    return record, current


def run_measurement(apparatus: Apparatus, pw: ParticleWave,
                    registry: EntanglementRegistry, rng) -> MeasurementRecord:
    """Run every stage in order, then the detector readout."""
    record, _ = _run_measurement_ex(apparatus, pw, registry, rng)
    return record


# --- scenario builders --------------------------------------------------------


def spin_half_input(registry: EntanglementRegistry, amplitudes: Sequence[complex],
                    *, position=(0.0, 0.0, 0.0), ptype: ParticleType = ParticleType.ELECTRON,
                    constants: Constants = DEFAULT_CONSTANTS) -> ParticleWave:
    """Register a localized particle with spin rows (up, down) amplitudes."""
    up, down = complex(amplitudes[0]), complex(amplitudes[1])
    pw = particle(ptype, constants)
    rows = []
    if up != 0:
        rows.append((path_state(position=position, spin=0.5), up))
    if down != 0:
        rows.append((path_state(position=position, spin=-0.5), down))
    if not rows:
        rows = [(path_state(position=position, spin=0.5), up)]
    pathspace.register_single(registry, pw, rows)
    return pw


def stern_gerlach_scenario(input_amplitudes: Sequence[complex], gradient_axis,
                           strength: float = 1.0, *, stage_peak: float = 1.0,
                           constants: Constants = DEFAULT_CONSTANTS,
                           audit: bool = False) -> Apparatus:
    """Two-stage spin measurement: field projects spin to deflection, screen
    maps deflection to a position, detector bins the screen halves."""
    if len(input_amplitudes) != 2:
        raise ShapeMismatch("spin-1/2 input needs exactly two amplitudes")
    if all(complex(a) == 0 for a in input_amplitudes):
        raise ValidationError("all-amplitudes-zero", "input spin state has zero norm")
    axis = _unit(gradient_axis)
    threshold = DEFAULT_PEAK_THRESHOLD if math.sqrt(stage_peak) >= DEFAULT_PEAK_THRESHOLD else None
    field = FieldObject(axis, strength, peak=stage_peak, peak_threshold=threshold)
    screen = ScreenObject(axis)
    stages = (
        ApparatusStage(field, _stage_config(field, constants, audit)),
        ApparatusStage(screen, _stage_config(screen, constants, audit)),
    )
    return Apparatus(stages, AxisBinDetector(axis))


def repeated_projection_apparatus(repetitions: int, stage_peak: float, axis=(0.0, 0.0, 1.0),
                                  strength: float = 1.0, *,
                                  constants: Constants = DEFAULT_CONSTANTS,
                                  audit: bool = False) -> Apparatus:
    """k identical soft projections of the same spin; majority readout."""
    if repetitions < 1:
        raise ValueError("need at least one repetition")
    axis = _unit(axis)
    field = FieldObject(axis, strength, peak=stage_peak, peak_threshold=None)
    stage = ApparatusStage(field, _stage_config(field, constants, audit))
    return Apparatus((stage,) * repetitions, MajorityDetector(axis))


@dataclass(frozen=True)
class EprSetup:
    apparatus_a: Apparatus
    apparatus_b: Apparatus
    collection: pathspace.PwCollection
    particle_a: ParticleWave
    particle_b: ParticleWave


def epr_scenario(joint_rows, axis_a, axis_b, registry: EntanglementRegistry, *,
                 position_a=(-1.0, 0.0, 0.0), position_b=(1.0, 0.0, 0.0),
                 constants: Constants = DEFAULT_CONSTANTS, audit: bool = False) -> EprSetup:
    """Shared anticorrelated table plus one Stern-Gerlach apparatus per side.

    joint_rows: iterable of (spin_a, spin_b, amplitude).  Measurement bases
    that differ from the table's basis are out of scope, so both axes must
    coincide.
    """
    axis_a = _unit(axis_a)
    axis_b = _unit(axis_b)
    if axis_a != axis_b:
        raise ValidationError("aligned-bases-only",
                              "rotated measurement bases are not modeled")
    pa = particle(ParticleType.ELECTRON, constants)
    pb = particle(ParticleType.ELECTRON, constants)
    rows = []
    for sa, sb, amp in joint_rows:
        sta = path_state(position=position_a, spin=sa)
        stb = path_state(position=position_b, spin=sb)
        rows.append(((sta, stb), complex(amp)))
    if len(rows) < 1:
        raise ShapeMismatch("joint table needs at least one row")
    collection = pathspace.join_entangled([pa, pb], rows, registry)
    app_a = stern_gerlach_scenario((1.0, 0.0), axis_a, constants=constants, audit=audit)
    app_b = stern_gerlach_scenario((1.0, 0.0), axis_b, constants=constants, audit=audit)
    return EprSetup(app_a, app_b, collection, pa, pb)

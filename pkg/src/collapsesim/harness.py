"""Seeded Monte Carlo ensembles over named scenarios, plus the statistics
used to check them: Pearson chi-square against embedded quantiles, peak
metrics, parameter sweeps, and outcome correlation.

Every harness output is a pure function of (scenario, parameters, n, seed).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import pathspace, pipeline
from .chi2_table import MAX_DF, critical_value
from .constants import Constants, DEFAULT_CONSTANTS, ParticleType
from .engine import BhabhaProjection, ExitGrid, InteractionConfig, run_interaction
from .errors import InsufficientCounts, UnknownScenario
from .pathspace import EntanglementRegistry, particle, path_state, register_single, sample_rows
from .rng import TraceRng, batch_generator
from .qft import CHANNELS


@dataclass(frozen=True)
class OutcomeHistogram:
    """Counts per outcome label; sum of counts equals total."""

    labels: tuple[str, ...]
    counts: tuple[int, ...]
    total: int

    def __post_init__(self):
        if sum(self.counts) != self.total:
            raise ValueError("histogram counts do not sum to total")

    @property
    def bins(self) -> list[tuple[str, int]]:
        return list(zip(self.labels, self.counts))

    def frequency(self, label: str) -> float:
        return self.counts[self.labels.index(label)] / self.total


@dataclass(frozen=True)
class PeakReport:
    """Peak metric across a parameter sweep, with a monotonicity flag."""

    parameter: str
    values: tuple[float, ...]
    metrics: tuple[float, ...]
    std_errors: tuple[float, ...]
    nondecreasing: bool


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    df: int
    alpha: float
    critical: float
    passed: bool


# --- scenario runners ---------------------------------------------------------


class CollectionRunner:
    """Raw Born sampling of a declared path table; vectorized draws."""

    def __init__(self, params: dict, constants: Constants):
        amplitudes = [complex(a) for a in params["amplitudes"]]
        pw = particle(ParticleType.ELECTRON, constants)
        rows = [((path_state(position=(float(i), 0.0, 0.0)),), a)
                for i, a in enumerate(amplitudes)]
        self._collection = pathspace.PwCollection([pw], rows)
        self.labels = tuple(str(i) for i in range(len(amplitudes)))

    def counts(self, n: int, master_seed: int) -> np.ndarray:
        idx = sample_rows(self._collection, n, batch_generator(master_seed))
        return np.bincount(idx, minlength=len(self.labels))

    def records0(self, master_seed: int) -> tuple:
        return ()


class _PipelineRunner:
    """Shared per-trial loop: one derived TraceRng per trial index."""

    labels: tuple[str, ...]

    def _run_one(self, rng: TraceRng) -> tuple[int, tuple]:
        """(outcome bin, measurement records of this trial)."""
        raise NotImplementedError

    def counts(self, n: int, master_seed: int) -> np.ndarray:
        out = np.zeros(len(self.labels), dtype=np.int64)
        for i in range(n):
            out[self._run_one(TraceRng((master_seed, i)))[0]] += 1
        return out

    def records0(self, master_seed: int) -> tuple:
        """Trial 0's measurement records (replayable from the same seed)."""
        return self._run_one(TraceRng((master_seed, 0)))[1]


class SternGerlachRunner(_PipelineRunner):
    def __init__(self, params: dict, constants: Constants):
        self.amps = tuple(complex(a) for a in params.get("amplitudes", (1.0, 1.0)))
        axis = tuple(params.get("axis", (0.0, 0.0, 1.0)))
        strength = float(params.get("strength", 1.0))
        peak = float(params.get("stage_peak", 1.0))
        self.constants = constants
        self.apparatus = pipeline.stern_gerlach_scenario(
            self.amps, axis, strength, stage_peak=peak, constants=constants)
        self.labels = self.apparatus.detector.labels

    def _run_one(self, rng: TraceRng) -> tuple[int, tuple]:
        registry = EntanglementRegistry()
        pw = pipeline.spin_half_input(registry, self.amps, constants=self.constants)
        rec = pipeline.run_measurement(self.apparatus, pw, registry, rng)
        return rec.detector_bin, (rec,)


class SternGerlachRepeatRunner(SternGerlachRunner):
    """Same apparatus twice; the second run consumes the collapsed particle."""

    def __init__(self, params: dict, constants: Constants):
        super().__init__(params, constants)
        first = self.apparatus.detector.labels
        self.labels = tuple(f"{a}|{b}" for a in first for b in first)

    def _run_one(self, rng: TraceRng) -> tuple[int, tuple]:
        registry = EntanglementRegistry()
        pw = pipeline.spin_half_input(registry, self.amps, constants=self.constants)
        rec1, survivor = pipeline._run_measurement_ex(self.apparatus, pw, registry, rng)
        rec2 = pipeline.run_measurement(self.apparatus, survivor, registry, rng)
        return rec1.detector_bin * 2 + rec2.detector_bin, (rec1, rec2)


class EprRunner(_PipelineRunner):
    def __init__(self, params: dict, constants: Constants):
        self.rows = tuple(params.get("rows", ((0.5, -0.5, 2 ** -0.5), (-0.5, 0.5, 2 ** -0.5))))
        self.axis = tuple(params.get("axis", (0.0, 0.0, 1.0)))
        self.order = params.get("order", "AB")
        if self.order not in ("AB", "BA"):
            raise ValueError(f"order must be AB or BA, got {self.order}")
        self.constants = constants
        self.labels = ("up|up", "up|down", "down|up", "down|down")

    def _run_one(self, rng: TraceRng) -> tuple[int, tuple]:
        registry = EntanglementRegistry()
        setup = pipeline.epr_scenario(self.rows, self.axis, self.axis, registry,
                                      constants=self.constants)
        if self.order == "AB":
            rec_a = pipeline.run_measurement(setup.apparatus_a, setup.particle_a, registry, rng)
            rec_b = pipeline.run_measurement(setup.apparatus_b, setup.particle_b, registry, rng)
        else:
            rec_b = pipeline.run_measurement(setup.apparatus_b, setup.particle_b, registry, rng)
            rec_a = pipeline.run_measurement(setup.apparatus_a, setup.particle_a, registry, rng)
        return rec_a.detector_bin * 2 + rec_b.detector_bin, (rec_a, rec_b)

    def pairs(self, n: int, master_seed: int) -> np.ndarray:
        """(n, 2) array of +/-1 outcomes (up -> +1) for correlation studies."""
        out = np.empty((n, 2), dtype=np.int64)
        for i in range(n):
            joint, _ = self._run_one(TraceRng((master_seed, i)))
            out[i] = (1 - 2 * (joint // 2), 1 - 2 * (joint % 2))
        return out


class RepeatedProjectionRunner(_PipelineRunner):
    def __init__(self, params: dict, constants: Constants):
        k = int(params.get("repetitions", 1))
        peak = float(params.get("stage_peak", 0.8))
        axis = tuple(params.get("axis", (0.0, 0.0, 1.0)))
        self.spin = float(params.get("input_spin", 0.5))
        self.constants = constants
        self.apparatus = pipeline.repeated_projection_apparatus(
            k, peak, axis, constants=constants)
        self.labels = self.apparatus.detector.labels

    def _run_one(self, rng: TraceRng) -> tuple[int, tuple]:
        registry = EntanglementRegistry()
        amps = (1.0, 0.0) if self.spin > 0 else (0.0, 1.0)
        pw = pipeline.spin_half_input(registry, amps, constants=self.constants)
        rec = pipeline.run_measurement(self.apparatus, pw, registry, rng)
        return rec.detector_bin, (rec,)


class AsymmetricProjectionRunner(RepeatedProjectionRunner):
    """Single-stage projection whose peak mass follows the declared law
    p = r / (1 + r) of the mass or energy asymmetry ratio r."""

    def __init__(self, params: dict, constants: Constants):
        ratio = float(params.get("mass_ratio", params.get("energy_ratio", 1.0)))
        if ratio <= 0:
            raise ValueError("asymmetry ratio must be positive")
        peak = ratio / (1.0 + ratio)
        super().__init__({"repetitions": 1, "stage_peak": max(peak, 1e-9),
                          "axis": params.get("axis", (0.0, 0.0, 1.0)),
                          "input_spin": params.get("input_spin", 0.5)}, constants)


class BhabhaRunner(_PipelineRunner):
    """One full scattering interaction per trial; outcome is the detector-
    selected exit channel and angular bin."""

    def __init__(self, params: dict, constants: Constants):
        self.sqrt_s = float(params.get("sqrt_s", 2000.0))
        self.grid = ExitGrid(
            n_cos_bins=int(params.get("angular_bins", 64)),
            cos_cutoff=float(params.get("cos_cutoff", 0.999)),
        )
        self.channel_policy = params.get("channel_policy", "dynamic")
        self.entry_spins = tuple(params.get("entry_spins", (0.5, -0.5)))
        self.constants = constants
        self.config = InteractionConfig(
            model=BhabhaProjection(self.grid, constants),
            channel_policy=self.channel_policy,
            constants=constants,
        )
        if self.channel_policy == "dynamic":
            chans = CHANNELS
        else:
            chans = (self.channel_policy,)
        self.labels = tuple(f"{c}:{i:03d}" for c in chans
                            for i in range(self.grid.n_cos_bins))
        self._results = None

    def _setup(self, registry):
        e = self.constants.m_e
        pz = math.sqrt((self.sqrt_s / 2.0) ** 2 - e * e)
        cell = (0.0, 0.0, 0.0)
        electron = particle(ParticleType.ELECTRON, self.constants)
        positron = particle(ParticleType.POSITRON, self.constants)
        register_single(registry, electron,
                        [(path_state(position=cell, momentum=(0, 0, pz),
                                     spin=self.entry_spins[0]), 1.0)])
        register_single(registry, positron,
                        [(path_state(position=cell, momentum=(0, 0, -pz),
                                     spin=self.entry_spins[1]), 1.0)])
        return electron, positron

    def interact(self, rng: TraceRng):
        """Run one interaction and resolve the exit row; returns
        (InteractionResult, exit row states)."""
        registry = EntanglementRegistry()
        electron, positron = self._setup(registry)
        result = run_interaction(electron, positron, self.config, registry, rng)
        exit_c = registry.get(result.exit_collection_id)
        idx = pathspace.select_path(exit_c, rng)
        states = exit_c.rows[idx][0]
        pathspace.collapse(exit_c, idx, registry)
        return result, states

    def _run_one(self, rng: TraceRng) -> tuple[int, tuple]:
        result, states = self.interact(rng)
        mom = states[0].value_of(pathspace.ComponentKind.MOMENTUM)
        norm = math.sqrt(sum(m * m for m in mom))
        cosv = mom[2] / norm
        cut = self.grid.cos_cutoff if result.channel == "e-e+" else 1.0
        width = 2.0 * cut / self.grid.n_cos_bins
        b = min(max(int((cosv + cut) / width), 0), self.grid.n_cos_bins - 1)
        return self.labels.index(f"{result.channel}:{b:03d}"), ()


SCENARIOS: dict[str, type] = {
    "collection": CollectionRunner,
    "stern_gerlach": SternGerlachRunner,
    "sg_repeat": SternGerlachRepeatRunner,
    "epr": EprRunner,
    "repeated_projection": RepeatedProjectionRunner,
    "asymmetric_projection": AsymmetricProjectionRunner,
    "bhabha": BhabhaRunner,
}

_PARAM_ALIASES = {"repetition_count": "repetitions"}


def make_runner(scenario: str, params: Optional[dict] = None,
                constants: Constants = DEFAULT_CONSTANTS):
    try:
        cls = SCENARIOS[scenario]
    except KeyError:
        raise UnknownScenario(f"no scenario named {scenario!r}; "
                              f"known: {sorted(SCENARIOS)}") from None
    return cls(dict(params or {}), constants)


def run_trials(scenario: str, params: Optional[dict], n: int, master_seed: int,
               constants: Constants = DEFAULT_CONSTANTS) -> OutcomeHistogram:
    """n independent seeded trials; bit-identical under identical inputs."""
    if n < 1:
        raise ValueError("n must be positive")
    runner = make_runner(scenario, params, constants)
    counts = runner.counts(n, master_seed)
    return OutcomeHistogram(tuple(runner.labels),
                            tuple(int(c) for c in counts), int(n))


def chi_square_test(observed: OutcomeHistogram, expected, alpha: float) -> ChiSquareResult:
    """Pearson statistic against the embedded chi-square quantile.

    `expected` maps labels to probabilities (or lists them in label order).
    Bins with zero expectation must carry zero counts and are excluded from
    the statistic.
    """
    if isinstance(expected, dict):
        probs = np.array([float(expected.get(l, 0.0)) for l in observed.labels])
    else:
        probs = np.asarray(list(expected), dtype=float)
        if len(probs) != len(observed.labels):
            raise ValueError("expected distribution length does not match histogram")
    counts = np.asarray(observed.counts, dtype=float)
    if np.any((probs <= 0.0) & (counts > 0)):
        raise ValueError("expected must be strictly positive on every observed bin")
    keep = probs > 0.0
    probs = probs[keep] / probs[keep].sum()
    counts = counts[keep]
    k = int(keep.sum())
    if k < 2:
        raise InsufficientCounts("need at least two bins with positive expectation")
    if observed.total < 5 * k:
        raise InsufficientCounts(
            f"total {observed.total} below 5 x {k} bins")
    exp_counts = observed.total * probs
    statistic = float(np.sum((counts - exp_counts) ** 2 / exp_counts))
    crit = critical_value(k - 1, alpha)
    return ChiSquareResult(statistic, k - 1, alpha, crit, statistic <= crit)


def peak_metric(h: OutcomeHistogram) -> float:
    """Max-bin probability mass in [0, 1]."""
    if h.total < 1:
        raise ValueError("empty histogram")
    return max(h.counts) / h.total


def asymmetry_sweep(scenario: str, parameter: str, values: Sequence[float],
                    n_per_value: int, master_seed: int,
                    params: Optional[dict] = None,
                    constants: Constants = DEFAULT_CONSTANTS) -> PeakReport:
    """Peak metric across parameter values (same master seed per value, so
    equal values give equal metrics)."""
    if len(values) < 2:
        raise ValueError("sweep needs at least two parameter values")
    key = _PARAM_ALIASES.get(parameter, parameter)
    metrics, errors = [], []
    for v in values:
        p = dict(params or {})
        p[key] = v
        h = run_trials(scenario, p, n_per_value, master_seed, constants)
        m = peak_metric(h)
        metrics.append(m)
        errors.append(math.sqrt(max(m * (1.0 - m), 0.0) / h.total))
    nondecreasing = all(
        metrics[i + 1] >= metrics[i] - math.hypot(errors[i], errors[i + 1])
        for i in range(len(metrics) - 1))
    return PeakReport(parameter, tuple(float(v) for v in values),
                      tuple(metrics), tuple(errors), nondecreasing)


def correlation(pairs) -> float:
    """Sample correlation of paired +/-1 outcomes."""
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise ValueError("need an (n, 2) array of paired outcomes, n >= 2")
    if not np.all(np.isin(arr, (-1.0, 1.0))):
        raise ValueError("outcomes must be +/-1 valued")
    a, b = arr[:, 0], arr[:, 1]
    sa, sb = a.std(), b.std()
    if sa == 0.0 or sb == 0.0:
        raise ValueError("degenerate margin: zero variance")
    return float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))

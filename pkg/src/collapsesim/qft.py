"""Dirac spinors, gamma algebra, and the tree-level Bhabha matrix element.

Dirac representation, metric (+,-,-,-), relativistic normalization
ubar u = 2m.  Natural units, MeV.  The matrix element is the photon-exchange
expression: annihilation term minus exchange term, the exchange term present
only for the e-e+ exit channel; mu/tau pair exits keep the annihilation term
alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constants import Constants, DEFAULT_CONSTANTS, ParticleType
from .errors import BelowThreshold, OffShell, PropagatorPole

POLE_TOL = 1e-12          # MeV^2, degenerate propagator denominator
ONSHELL_RTOL = 1e-9       # |E^2-|p|^2-m^2| <= rtol * E^2 (cancellation-safe)

_SIGMA = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)

_G0 = np.diag([1, 1, -1, -1]).astype(complex)
_GI = np.zeros((3, 4, 4), dtype=complex)
for _k in range(3):
    _GI[_k, :2, 2:] = _SIGMA[_k]
    _GI[_k, 2:, :2] = -_SIGMA[_k]
GAMMA = np.concatenate([_G0[None], _GI])          # (4,4,4): gamma^0..gamma^3
METRIC = np.diag([1.0, -1.0, -1.0, -1.0])
_METRIC_SIGNS = np.array([1.0, -1.0, -1.0, -1.0])
IDENTITY4 = np.eye(4, dtype=complex)


@dataclass(frozen=True)
class GammaBasis:
    """The four gamma matrices and the metric they anticommute against."""

    gamma: tuple = tuple(GAMMA)
    metric: tuple = tuple(map(tuple, METRIC))


DIRAC_BASIS = GammaBasis()


@dataclass(frozen=True)
class FourMomentum:
    """Energy and spatial momentum in MeV."""

    E: float
    p: tuple[float, float, float]

    def __add__(self, other: "FourMomentum") -> "FourMomentum":
        return FourMomentum(self.E + other.E,
                            tuple(a + b for a, b in zip(self.p, other.p)))

    def __sub__(self, other: "FourMomentum") -> "FourMomentum":
        return FourMomentum(self.E - other.E,
                            tuple(a - b for a, b in zip(self.p, other.p)))

    def mass_sq(self) -> float:
        return self.E ** 2 - sum(x * x for x in self.p)

    def invariant_mass(self) -> float:
        return math.sqrt(max(self.mass_sq(), 0.0))

    def as_array(self) -> np.ndarray:
        return np.array([self.E, *self.p])


def four_momentum(mass: float, p3) -> FourMomentum:
    """Exactly on-shell four-momentum from a mass and spatial momentum."""
    p3 = tuple(float(x) for x in p3)
    return FourMomentum(math.sqrt(mass * mass + sum(x * x for x in p3)), p3)


def require_on_shell(p: FourMomentum, mass: float, rtol: float = ONSHELL_RTOL):
    scale = max(p.E * p.E, mass * mass, 1.0)
    if abs(p.mass_sq() - mass * mass) > rtol * scale:
        raise OffShell(f"E^2-|p|^2 = {p.mass_sq():.6g} but m^2 = {mass * mass:.6g}")
    if p.E < 0:
        raise OffShell(f"negative energy {p.E}")


@dataclass(frozen=True)
class SpinLabel:
    """Spin-1/2 projection (+1/2 or -1/2) along a unit quantization axis."""

    s: float
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.s not in (0.5, -0.5):
            raise ValueError(f"spin projection must be +/-1/2, got {self.s}")
        norm = math.sqrt(sum(x * x for x in self.axis))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"quantization axis must be unit length, |axis| = {norm}")


SPIN_UP = SpinLabel(0.5)
SPIN_DOWN = SpinLabel(-0.5)


def chi_two_spinor(label: SpinLabel) -> np.ndarray:
    """Eigenvector of sigma.axis with eigenvalue 2s."""
    nx, ny, nz = label.axis
    theta = math.acos(max(-1.0, min(1.0, nz)))
    phi = math.atan2(ny, nx)
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    if label.s > 0:
        return np.array([c, s * np.exp(1j * phi)], dtype=complex)
    return np.array([-s * np.exp(-1j * phi), c], dtype=complex)


def _conjugate_two_spinor(chi: np.ndarray) -> np.ndarray:
    """-i sigma_y chi*: the antiparticle companion basis."""
    return np.array([-np.conj(chi[1]), np.conj(chi[0])], dtype=complex)


def _sigma_dot(pvec: np.ndarray) -> np.ndarray:
    return np.einsum("kij,...k->...ij", _SIGMA, pvec)


def spinor_u(p: FourMomentum, s: SpinLabel, mass: float) -> np.ndarray:
    """Positive-energy solution: (gamma.p - m) u = 0, ubar u = 2m."""
    require_on_shell(p, mass)
    chi = chi_two_spinor(s)
    pref = math.sqrt(p.E + mass)
    lower = (_sigma_dot(np.array(p.p)) @ chi) / (p.E + mass)
    return np.concatenate([chi, lower]) * pref


def spinor_v(p: FourMomentum, s: SpinLabel, mass: float) -> np.ndarray:
    """Negative-energy solution: (gamma.p + m) v = 0, vbar v = -2m."""
    require_on_shell(p, mass)
    eta = _conjugate_two_spinor(chi_two_spinor(s))
    pref = math.sqrt(p.E + mass)
    upper = (_sigma_dot(np.array(p.p)) @ eta) / (p.E + mass)
    return np.concatenate([upper, eta]) * pref


def dirac_adjoint(psi: np.ndarray) -> np.ndarray:
    """psi^dagger gamma^0, broadcasting over leading axes."""
    out = np.conj(psi).copy()
    out[..., 2:] *= -1.0
    return out


def slash(p: FourMomentum) -> np.ndarray:
    """gamma^mu p_mu as a 4x4 matrix."""
    return p.E * GAMMA[0] - sum(p.p[k] * GAMMA[1 + k] for k in range(3))


def _current(bar: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """J^mu = bar gamma^mu psi over leading batch axes: (...,4)."""
    return np.einsum("...i,mij,...j->...m", bar, GAMMA, psi)


def _lorentz_dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...m,...m->...", a * _METRIC_SIGNS, b)


def mandelstam(p1: FourMomentum, p2: FourMomentum, p3: FourMomentum) -> tuple[float, float, float]:
    """(s, t, u) for 1+2 -> 3+4 with p4 implied by conservation."""
    s = (p1 + p2).mass_sq()
    t = (p1 - p3).mass_sq()
    u = (p2 - p3).mass_sq()
    return s, t, u


# --- exit channels -----------------------------------------------------------

CHANNELS = ("e-e+", "mu-mu+", "tau-tau+")

CHANNEL_TYPES = {
    "e-e+": (ParticleType.ELECTRON, ParticleType.POSITRON),
    "mu-mu+": (ParticleType.MUON_MINUS, ParticleType.MUON_PLUS),
    "tau-tau+": (ParticleType.TAUON_MINUS, ParticleType.TAUON_PLUS),
}


def channel_mass(channel: str, constants: Constants) -> float:
    return constants.mass_of(CHANNEL_TYPES[channel][0])


def bhabha_matrix_element_from_spinors(u1, v2, u3bar, v4, s_den: float, t_den,
                                       e: float, include_exchange: bool) -> complex:
    """Eq.-level evaluation from explicit spinors (linearity checks use this).

    M = (-ie)^2 [v2bar g_mu u1] (-i g^{mu nu}/s_den) [u3bar g_nu v4]
      - (-ie)^2 [u3bar g_mu u1] (-i g^{mu nu}/t_den) [v2bar g_nu v4]
    """
    v2bar = dirac_adjoint(v2)
    coupling = (-1j * e) ** 2
    if abs(s_den) < POLE_TOL:
        raise PropagatorPole(f"(p1+p2)^2 = {s_den:.3g} MeV^2")
    annih = coupling * (-1j / s_den) * _lorentz_dot(_current(v2bar, u1), _current(u3bar, v4))
    if not include_exchange:
        return complex(annih)
    if abs(t_den) < POLE_TOL:
        raise PropagatorPole(f"(p1-p3)^2 = {t_den:.3g} MeV^2")
    exch = coupling * (-1j / t_den) * _lorentz_dot(_current(u3bar, u1), _current(v2bar, v4))
    return complex(annih - exch)


def bhabha_amplitude(entry, exit, constants: Constants = DEFAULT_CONSTANTS,
                     exit_channel: str = "e-e+") -> complex:
    """Scattering matrix element for e- e+ -> fermion antifermion.

    entry/exit are ((FourMomentum, SpinLabel), (FourMomentum, SpinLabel))
    pairs ordered (fermion, antifermion).  Four-momentum conservation is the
    caller's responsibility.
    """
    (p1, s1), (p2, s2) = entry
    (p3, s3), (p4, s4) = exit
    m_in = constants.m_e
    m_out = channel_mass(exit_channel, constants)
    u1 = spinor_u(p1, s1, m_in)
    v2 = spinor_v(p2, s2, m_in)
    u3bar = dirac_adjoint(spinor_u(p3, s3, m_out))
    v4 = spinor_v(p4, s4, m_out)
    s_den = (p1 + p2).mass_sq()
    include_exchange = exit_channel == "e-e+"
    t_den = (p1 - p3).mass_sq() if include_exchange else None
    return bhabha_matrix_element_from_spinors(
        u1, v2, u3bar, v4, s_den, t_den, constants.e, include_exchange)


# --- vectorized evaluation over angular grids --------------------------------

def _u_batch(E: float, pvec: np.ndarray, chi: np.ndarray, m: float) -> np.ndarray:
    """u spinors for momenta pvec (...,3) sharing one energy and 2-spinor."""
    pref = math.sqrt(E + m)
    lower = np.einsum("...ij,j->...i", _sigma_dot(pvec), chi) / (E + m)
    upper = np.broadcast_to(chi, lower.shape)
    return np.concatenate([upper, lower], axis=-1) * pref


def _v_batch(E: float, pvec: np.ndarray, eta: np.ndarray, m: float) -> np.ndarray:
    pref = math.sqrt(E + m)
    upper = np.einsum("...ij,j->...i", _sigma_dot(pvec), eta) / (E + m)
    lower = np.broadcast_to(eta, upper.shape)
    return np.concatenate([upper, lower], axis=-1) * pref


def cm_entry_momenta(sqrt_s: float, constants: Constants) -> tuple[FourMomentum, FourMomentum]:
    """Beam-frame e- and e+ momenta along +/-z."""
    E = sqrt_s / 2.0
    if E <= constants.m_e:
        raise BelowThreshold(f"sqrt_s = {sqrt_s} MeV is not above 2 m_e")
    pz = math.sqrt(E * E - constants.m_e ** 2)
    return FourMomentum(E, (0.0, 0.0, pz)), FourMomentum(E, (0.0, 0.0, -pz))


def exit_directions(cos_values: np.ndarray, phi: float) -> np.ndarray:
    """Unit vectors (n,3) at polar cosines `cos_values`, azimuth `phi`."""
    cos_values = np.asarray(cos_values, dtype=float)
    sin_theta = np.sqrt(np.clip(1.0 - cos_values ** 2, 0.0, None))
    return np.stack([sin_theta * math.cos(phi),
                     sin_theta * math.sin(phi),
                     cos_values], axis=-1)


def bhabha_exit_table(entry, cos_values, phi: float, exit_channel: str,
                      constants: Constants = DEFAULT_CONSTANTS,
                      spin_axis: tuple = (0.0, 0.0, 1.0)) -> np.ndarray:
    """Amplitudes over an exit angular grid for fixed entry states.

    Returns complex array (n_cos, 2, 2); the trailing axes run over the exit
    fermion/antifermion spin labels in the order (+1/2, -1/2) along spin_axis.
    Entry states are ((p1,s1),(p2,s2)) with p1+p2 purely timelike (CM frame).
    """
    (p1, s1), (p2, s2) = entry
    m_in = constants.m_e
    m_out = channel_mass(exit_channel, constants)
    total = p1 + p2
    sqrt_s = total.invariant_mass()
    if sqrt_s <= 2.0 * m_out:
        raise BelowThreshold(f"sqrt_s = {sqrt_s:.4g} below 2 m = {2 * m_out:.4g} for {exit_channel}")
    E_out = sqrt_s / 2.0
    p_out = math.sqrt(E_out ** 2 - m_out ** 2)
    dirs = exit_directions(cos_values, phi)
    p3vec = p_out * dirs
    p4vec = -p3vec

    u1 = spinor_u(p1, s1, m_in)
    v2 = spinor_v(p2, s2, m_in)
    v2bar = dirac_adjoint(v2)
    e = constants.e
    coupling = (-1j * e) ** 2
    s_den = total.mass_sq()
    if abs(s_den) < POLE_TOL:
        raise PropagatorPole(f"(p1+p2)^2 = {s_den:.3g} MeV^2")
    include_exchange = exit_channel == "e-e+"

    labels = (SpinLabel(0.5, spin_axis), SpinLabel(-0.5, spin_axis))
    n = len(dirs)
    out = np.zeros((n, 2, 2), dtype=complex)
    Ja = _current(v2bar, u1)                      # (4,)
    if include_exchange:
        p1arr = np.array(p1.p)
        t_den = (p1.E - E_out) ** 2 - np.sum((p1arr - p3vec) ** 2, axis=-1)
        if np.any(np.abs(t_den) < POLE_TOL):
            raise PropagatorPole("exchange propagator vanished on the exit grid")
    for i3, lab3 in enumerate(labels):
        chi3 = chi_two_spinor(lab3)
        u3bar = dirac_adjoint(_u_batch(E_out, p3vec, chi3, m_out))   # (n,4)
        for i4, lab4 in enumerate(labels):
            eta4 = _conjugate_two_spinor(chi_two_spinor(lab4))
            v4 = _v_batch(E_out, p4vec, eta4, m_out)                 # (n,4)
            amp = coupling * (-1j / s_den) * _lorentz_dot(_current(u3bar, v4), Ja)
            if include_exchange:
                exch = coupling * (-1j / t_den) * _lorentz_dot(
                    _current(u3bar, u1), _current(v2bar, v4))
                amp = amp - exch
            out[:, i3, i4] = amp
    return out


def spin_averaged_msq(sqrt_s: float, cos_values, exit_channel: str,
                      constants: Constants = DEFAULT_CONSTANTS) -> np.ndarray:
    """(1/4) sum over the 16 spin assignments of |M|^2, per exit cosine."""
    p1, p2 = cm_entry_momenta(sqrt_s, constants)
    cos_values = np.asarray(cos_values, dtype=float)
    total = np.zeros(cos_values.shape, dtype=float)
    for s1 in (SPIN_UP, SPIN_DOWN):
        for s2 in (SPIN_UP, SPIN_DOWN):
            table = bhabha_exit_table(((p1, s1), (p2, s2)), cos_values, 0.0,
                                      exit_channel, constants)
            total += np.sum(np.abs(table) ** 2, axis=(1, 2))
    return total / 4.0


@lru_cache(maxsize=64)
def _channel_weights_cached(sqrt_s: float, constants: Constants, n_nodes: int,
                            cos_cutoff: float) -> tuple[tuple[str, float], ...]:
    open_channels = [c for c in CHANNELS if sqrt_s > 2.0 * channel_mass(c, constants)]
    if not open_channels:
        raise BelowThreshold(f"no exit channel open at sqrt_s = {sqrt_s} MeV")
    raw = []
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    for c in open_channels:
        cut = cos_cutoff if c == "e-e+" else 1.0
        x = nodes * cut
        w = weights * cut
        msq = spin_averaged_msq(sqrt_s, x, c, constants)
        m_out = channel_mass(c, constants)
        beta = math.sqrt(max(0.0, 1.0 - (2.0 * m_out / sqrt_s) ** 2))
        raw.append(beta * float(np.dot(w, msq)))
    total = sum(raw)
    if total <= 0.0:
        raise BelowThreshold("all channel weights vanished (zero coupling?)")
    return tuple((c, r / total) for c, r in zip(open_channels, raw))


def channel_weights(entry_types, sqrt_s: float,
                    constants: Constants = DEFAULT_CONSTANTS, *,
                    n_nodes: int = 64, cos_cutoff: float = 0.999) -> dict[str, float]:
    """Normalized exit-channel distribution at the given collision energy.

    Each open channel's weight is the exit-velocity-weighted angular integral
    of the spin-averaged |M|^2 (fixed-order Gauss-Legendre; the e-e+ exchange
    divergence is regulated by |cos theta| <= cos_cutoff).  Channels below
    mass threshold get zero.
    """
    if tuple(entry_types) != (ParticleType.ELECTRON, ParticleType.POSITRON):
        raise ValueError(f"entry must be (e-, e+), got {entry_types}")
    if sqrt_s <= 2.0 * constants.m_e:
        raise BelowThreshold(f"sqrt_s = {sqrt_s} MeV is not above 2 m_e")
    pairs = _channel_weights_cached(float(sqrt_s), constants, int(n_nodes), float(cos_cutoff))
    out = {c: 0.0 for c in CHANNELS}
    out.update(dict(pairs))
    return out

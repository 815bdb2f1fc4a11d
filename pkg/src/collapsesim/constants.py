"""Particle constants and electromagnetic coupling.

Natural units throughout (hbar = c = 1); energies, masses and momenta in MeV.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

ALPHA_EM_DEFAULT = 1.0 / 137.035999


class Force(str, Enum):
    ELECTRO_WEAK = "electro-weak"
    STRONG = "strong"
    GRAVITY = "gravity"


class ParticleType(str, Enum):
    ELECTRON = "electron"
    POSITRON = "positron"
    MUON_MINUS = "muon-"
    MUON_PLUS = "muon+"
    TAUON_MINUS = "tauon-"
    TAUON_PLUS = "tauon+"
    PHOTON = "photon"


@dataclass(frozen=True)
class Constants:
    """Mass table and coupling, overridable from a scenario file."""

    alpha_em: float = ALPHA_EM_DEFAULT
    m_e: float = 0.5110
    m_mu: float = 105.66
    m_tau: float = 1776.9

    @property
    def e(self) -> float:
        """Electric coupling sqrt(4 pi alpha)."""
        return math.sqrt(4.0 * math.pi * self.alpha_em)

    def mass_of(self, ptype: ParticleType) -> float:
        return {
            ParticleType.ELECTRON: self.m_e,
            ParticleType.POSITRON: self.m_e,
            ParticleType.MUON_MINUS: self.m_mu,
            ParticleType.MUON_PLUS: self.m_mu,
            ParticleType.TAUON_MINUS: self.m_tau,
            ParticleType.TAUON_PLUS: self.m_tau,
            ParticleType.PHOTON: 0.0,
        }[ptype]


DEFAULT_CONSTANTS = Constants()

# Spin-projection magnitude allowed per type: 1/2 for leptons, helicity 1 for photons.
SPIN_MAGNITUDE = {ptype: 0.5 for ptype in ParticleType}
SPIN_MAGNITUDE[ParticleType.PHOTON] = 1.0

# Only the electro-weak channel is modeled; the other labels exist for typing.
FORCE_TAGS = {ptype: frozenset({Force.ELECTRO_WEAK}) for ptype in ParticleType}

"""Independent oracles the tests check the implementation against.

Nothing here imports from the code paths it verifies: the trace formula is
closed form, the compounding law is plain binomial algebra.
"""
import math


def bhabha_msq_massless(s: float, t: float, e: float) -> float:
    """Spin-averaged |M|^2 for e-e+ -> e-e+ in the massless limit, from the
    standard spin-sum traces: 2e^4 [(s^2+u^2)/t^2 + 2u^2/(st) + (t^2+u^2)/s^2]."""
    u = -s - t
    return 2.0 * e ** 4 * ((s * s + u * u) / (t * t)
                           + 2.0 * u * u / (s * t)
                           + (t * t + u * u) / (s * s))


def annihilation_msq_massless(s: float, t: float, e: float) -> float:
    """s-channel-only spin average (mu/tau exits at E >> m): 2e^4 (t^2+u^2)/s^2."""
    u = -s - t
    return 2.0 * e ** 4 * (t * t + u * u) / (s * s)


def majority_peak(k: int, p: float) -> float:
    """P(majority of k iid readings is correct), ties resolved by the first
    reading (analytically a fair tie-break)."""
    q = 1.0 - p
    total = sum(math.comb(k, j) * p ** j * q ** (k - j)
                for j in range(k // 2 + 1, k + 1))
    if k % 2 == 0:
        total += 0.5 * math.comb(k, k // 2) * p ** (k // 2) * q ** (k // 2)
    return total


def binomial_3sigma(p: float, n: int) -> float:
    return 3.0 * math.sqrt(p * (1.0 - p) / n)

"""Photon-number statistics of the two source kinds.

Both sources are treated as classical mixtures over photon number (no
photon-number coherence). A weak coherent pulse (WCP) is Poissonian; a
single-photon source (SPS) is described by its mean photon number and
its g2(0) value, truncated at two photons.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SourceKind",
    "SourceSpec",
    "PhotonStatistics",
    "poisson_pn",
    "sps_statistics",
    "wcp_statistics",
    "statistics_for",
    "prob_multiphoton",
    "sample_photon_number",
]

_NORM_TOL = 1e-12


class SourceKind(str, enum.Enum):
    WCP = "WCP"
    SPS = "SPS"


@dataclass(frozen=True)
class SourceSpec:
    kind: SourceKind
    mu: float
    g2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SourceKind(self.kind))
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ValueError(f"mu must be finite and > 0, got {self.mu}")
        if self.kind is SourceKind.SPS and not (0.0 <= self.g2 < 1.0):
            raise ValueError(f"g2 must lie in [0, 1) for an SPS, got {self.g2}")

    def statistics(self) -> "PhotonStatistics":
        return statistics_for(self)


@dataclass(frozen=True)
class PhotonStatistics:
    """Probabilities for n = 0, 1, 2 photons plus the mass at n >= 3.

    ``tail`` is zero for an SPS; for a WCP it is the exact Poisson tail.
    """

    p: tuple[float, float, float]
    tail: float = 0.0

    def __post_init__(self):
        probs = (*self.p, self.tail)
        if any(x < 0 or x > 1 for x in probs):
            raise ValueError(f"photon-number probabilities out of range: {probs}")
        if abs(math.fsum(probs) - 1.0) > _NORM_TOL:
            raise ValueError(f"photon-number distribution not normalised: {probs}")

    @property
    def p0(self) -> float:
        return self.p[0]

    @property
    def p1(self) -> float:
        return self.p[1]

    @property
    def p2(self) -> float:
        return self.p[2]

    def survival_generating(self, eta: float) -> float:
        """Sum over n of p[n] * (1 - eta)**n, i.e. the probability no photon survives."""
        loss = 1.0 - eta
        s = self.p[0] + self.p[1] * loss + self.p[2] * loss**2
        if self.tail:
            # WCP tail: exact remainder of exp(-mu*eta) after n = 0, 1, 2
            s += self._wcp_tail_generating(loss)
        return s

    def _wcp_tail_generating(self, loss: float) -> float:
        mu = self.p[1] / self.p[0]
        x = mu * loss
        # sum_{n>=3} e^-mu mu^n loss^n / n! = e^-mu (e^x - 1 - x - x^2/2)
        return math.exp(-mu) * _exp_remainder3(x)


def _exp_remainder3(x: float) -> float:
    """e^x - 1 - x - x^2/2 without cancellation for small x."""
    if abs(x) < 1e-2:
        term, total = x**3 / 6.0, 0.0
        k = 3
        while abs(term) > 1e-300 and k < 40:
            total += term
            k += 1
            term *= x / k
        return total
    return math.expm1(x) - x - 0.5 * x * x


def poisson_pn(mu: float, n: int) -> float:
    """Poisson probability of exactly ``n`` photons at mean ``mu``."""
    if not (math.isfinite(mu) and mu > 0):
        raise ValueError(f"mu must be finite and > 0, got {mu}")
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    return math.exp(-mu + n * math.log(mu) - math.lgamma(n + 1))


def sps_statistics(mu: float, g2: float) -> PhotonStatistics:
    """SPS statistics with p1 = mu and the two-photon bound taken with equality."""
    if not (math.isfinite(mu) and 0 < mu < 1):
        raise ValueError(f"mu must lie in (0, 1) for an SPS, got {mu}")
    if not (0.0 <= g2 < 1.0):
        raise ValueError(f"g2 must lie in [0, 1), got {g2}")
    p2 = 0.5 * mu * mu * g2
    p0 = 1.0 - mu - p2
    if p0 < 0:
        raise ValueError(f"mu={mu}, g2={g2} give a negative vacuum probability")
    return PhotonStatistics((p0, mu, p2))


def wcp_statistics(mu: float) -> PhotonStatistics:
    p0, p1, p2 = (poisson_pn(mu, n) for n in range(3))
    tail = math.exp(-mu) * _exp_remainder3(mu)
    # absorb rounding so the four masses add to one
    tail = max(0.0, tail + (1.0 - math.fsum((p0, p1, p2, tail))))
    return PhotonStatistics((p0, p1, p2), tail)


def statistics_for(spec: SourceSpec) -> PhotonStatistics:
    if spec.kind is SourceKind.WCP:
        return wcp_statistics(spec.mu)
    return sps_statistics(spec.mu, spec.g2)


def prob_multiphoton(stats: PhotonStatistics) -> float:
    """P(n >= 2) for one pulse."""
    if stats.tail:
        mu = stats.p1 / stats.p0
        # 1 - e^-mu (1 + mu), written to avoid cancellation
        return -math.expm1(-mu) - mu * math.exp(-mu)
    return stats.p2


def sample_photon_number(stats: PhotonStatistics, rng: np.random.Generator, size=None):
    """Draw photon numbers. Values >= 3 (WCP tail) are drawn from the Poisson tail."""
    u = rng.random(size)
    c0 = stats.p0
    c1 = c0 + stats.p1
    c2 = c1 + stats.p2
    n = np.where(u < c0, 0, np.where(u < c1, 1, np.where(u < c2, 2, 3)))
    if stats.tail:
        flat = np.atleast_1d(n).copy()
        big = np.flatnonzero(flat >= 3)
        if big.size:
            mu = stats.p1 / stats.p0
            for i in big:
                flat[i] = _sample_poisson_tail(mu, rng)
            n = flat.reshape(np.shape(n))
    if size is None:
        return int(n)
    return n


def _sample_poisson_tail(mu: float, rng: np.random.Generator) -> int:
    # inverse CDF of Poisson(mu) conditioned on n >= 3
    target = rng.random() * _exp_remainder3(mu)
    k, term, acc = 3, mu**3 / 6.0, 0.0
    while True:
        acc += term
        if acc >= target or term == 0.0:
            return k
        k += 1
        term *= mu / k

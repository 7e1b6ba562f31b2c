"""Analytic cheating bounds, honest abort probability and quantum gain.

* Alice: 3/4 + 1/2 sqrt(a(1-a)), independent of the source.
* Bob: he wins outright if any of the K pulses carries two or more photons,
  otherwise he guesses from one copy with probability a.
* Honest abort: no click in K slots, or a same-basis error caught half the time.
* Classical equivalent with the same honest abort H: 1 - 6H.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .link_model import LinkBudget, no_detection_prob, per_pulse_click_prob
from .photon_source import PhotonStatistics, SourceKind, SourceSpec, prob_multiphoton

__all__ = [
    "KITAEV_FLOOR",
    "InfeasibleFairness",
    "SecurityReport",
    "GainCell",
    "GainMap",
    "alice_cheat_prob",
    "bob_cheat_prob",
    "multiphoton_exposure",
    "honest_abort_prob",
    "classical_cheat_bound",
    "coin_flip_rate",
    "quantum_gain",
    "solve_fair_a",
    "minmax_a",
    "sweep_gain",
]

KITAEV_FLOOR = 1.0 / math.sqrt(2.0)

# keeps the bracket off the degenerate a = 0.5 crossing
_BRACKET_EPS = 1e-6
_XTOL = 1e-12


class InfeasibleFairness(ValueError):
    pass


def alice_cheat_prob(a: float) -> float:
    if not (0.5 < a < 1.0):
        raise ValueError(f"state parameter a must lie in (0.5, 1), got {a}")
    return 0.75 + 0.5 * math.sqrt(a * (1.0 - a))


def multiphoton_exposure(stats: PhotonStatistics, K: int) -> float:
    """Probability that at least one of K pulses has two or more photons."""
    q = prob_multiphoton(stats)
    if q >= 1.0:
        return 1.0
    return -math.expm1(K * math.log1p(-q))


def bob_cheat_prob(a: float, stats: PhotonStatistics, K: int) -> float:
    p_multi = multiphoton_exposure(stats, K)
    return p_multi + (1.0 - p_multi) * a


def _bob_from_exposure(a: float, p_multi: float) -> float:
    return p_multi + (1.0 - p_multi) * a


def honest_abort_prob(qber: float, p_click: float, K: int) -> float:
    z = no_detection_prob(p_click, K)
    return z + (1.0 - z) * qber / 2.0


def classical_cheat_bound(H: float) -> float:
    if not (0.0 <= H <= 1.0):
        raise ValueError(f"honest abort probability must lie in [0, 1], got {H}")
    return max(0.0, 1.0 - 6.0 * H)


def coin_flip_rate(clock_hz: float, K: int, H: float) -> float:
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    return clock_hz / K * (1.0 - H)


def solve_fair_a(stats_or_exposure, K: Optional[int] = None) -> float:
    """State parameter at which Alice's and Bob's bounds coincide.

    Accepts either photon statistics plus K, or a precomputed multi-photon
    exposure (float) with ``K=None``.
    """
    if K is None:
        p_multi = float(stats_or_exposure)
    else:
        p_multi = multiphoton_exposure(stats_or_exposure, K)

    def gap(a):
        return alice_cheat_prob(a) - _bob_from_exposure(a, p_multi)

    lo, hi = 0.5 + _BRACKET_EPS, 1.0 - _BRACKET_EPS
    g_lo, g_hi = gap(lo), gap(hi)
    if not (g_lo > 0 > g_hi):
        raise InfeasibleFairness(
            f"no fair state parameter in ({lo}, {hi}) for multi-photon exposure {p_multi:.6g}"
        )
    return brentq(gap, lo, hi, xtol=_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)


def minmax_a(p_multi: float, grid: int = 20_001) -> float:
    """a minimising max(P_A, P_B) on a uniform grid over (0.5, 1)."""
    a = np.linspace(0.5, 1.0, grid)[1:-1]
    pa = 0.75 + 0.5 * np.sqrt(a * (1 - a))
    pb = p_multi + (1 - p_multi) * a
    return float(a[np.argmin(np.maximum(pa, pb))])


@dataclass
class SecurityReport:
    a: float
    p_alice: float
    p_bob: float
    p_click: float
    p_no_detection: float
    p_honest_abort: float
    p_classical: float
    gain_pp: float
    gain_rel: float
    rate_hz: float
    p_multi: float

    @property
    def p_quantum(self) -> float:
        return max(self.p_alice, self.p_bob)

    def to_dict(self) -> dict:
        return asdict(self)


def _report(a: float, stats: PhotonStatistics, link: LinkBudget, K: int, clock_hz: float) -> SecurityReport:
    p_multi = multiphoton_exposure(stats, K)
    p_click = per_pulse_click_prob(stats, link)
    z = no_detection_prob(p_click, K)
    H = honest_abort_prob(link.qber, p_click, K)
    p_cl = classical_cheat_bound(H)
    p_a = alice_cheat_prob(a)
    p_b = _bob_from_exposure(a, p_multi)
    gain = p_cl - max(p_a, p_b)
    return SecurityReport(
        a=a,
        p_alice=p_a,
        p_bob=p_b,
        p_click=p_click,
        p_no_detection=z,
        p_honest_abort=H,
        p_classical=p_cl,
        gain_pp=100.0 * gain,
        gain_rel=100.0 * gain / p_cl if p_cl > 0 else float("nan"),
        rate_hz=coin_flip_rate(clock_hz, K, H),
        p_multi=p_multi,
    )


def quantum_gain(scenario) -> SecurityReport:
    """All bounds for a scenario at its configured state parameter."""
    return _report(scenario.a, scenario.stats, scenario.link, scenario.K, scenario.clock_hz)


@dataclass
class GainCell:
    K: int
    mu: float
    a_star: float
    p_alice: float
    p_bob: float
    H: float
    p_classical: float
    gain: float
    reason: str = ""

    @classmethod
    def failed(cls, K, mu, reason) -> "GainCell":
        nan = float("nan")
        return cls(K, mu, nan, nan, nan, nan, nan, nan, reason)


@dataclass
class GainMap:
    kind: SourceKind
    K_grid: list[int]
    mu_grid: list[float]
    cells: list[GainCell] = field(default_factory=list)

    def __post_init__(self):
        for name, grid in (("K", self.K_grid), ("mu", self.mu_grid)):
            if len(grid) == 0 or any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError(f"{name} grid must be non-empty and strictly increasing")

    def gain_array(self) -> np.ndarray:
        """gain in percentage points, shape (len(K_grid), len(mu_grid))."""
        g = np.array([c.gain for c in self.cells], dtype=float)
        return g.reshape(len(self.K_grid), len(self.mu_grid))

    def cell(self, K: int, mu: float) -> GainCell:
        for c in self.cells:
            if c.K == K and math.isclose(c.mu, mu, rel_tol=1e-12):
                return c
        raise KeyError((K, mu))

    COLUMNS = ("K", "mu", "a_star", "p_alice", "p_bob", "H", "p_classical", "gain", "reason")


def _gain_cell(args) -> GainCell:
    kind, K, mu, g2, link, fixed_a = args
    try:
        stats = SourceSpec(kind, mu, g2).statistics()
        if fixed_a is not None:
            a = fixed_a
        else:
            try:
                a = solve_fair_a(stats, K)
            except InfeasibleFairness:
                a = minmax_a(multiphoton_exposure(stats, K))
        r = _report(a, stats, link, K, 1.0)
    except (ValueError, ArithmeticError) as exc:
        return GainCell.failed(K, mu, str(exc))
    return GainCell(K, mu, a, r.p_alice, r.p_bob, r.p_honest_abort, r.p_classical, r.gain_pp)


def sweep_gain(
    kind: SourceKind,
    K_grid: Sequence[int],
    mu_grid: Sequence[float],
    link: LinkBudget,
    g2: float = 0.03,
    fixed_a: Optional[float] = None,
    jobs: int = 1,
) -> GainMap:
    """Gain (percentage points) over a (K, mu) grid, row-major in K.

    Each cell uses the fair state parameter, or the min-max parameter when
    no fair point exists; ``fixed_a`` skips the optimisation.
    """
    gmap = GainMap(SourceKind(kind), [int(k) for k in K_grid], [float(m) for m in mu_grid])
    tasks = [(gmap.kind, K, mu, g2, link, fixed_a) for K in gmap.K_grid for mu in gmap.mu_grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            gmap.cells = list(pool.map(_gain_cell, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        gmap.cells = [_gain_cell(t) for t in tasks]
    return gmap

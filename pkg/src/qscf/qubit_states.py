"""The four tilted BB84-like protocol states and their measurement statistics.

Labels are ordered by ``index = 2 * alpha + c``, so the four columns of an
I/O table are (0,0), (0,1), (1,0), (1,1).
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

__all__ = [
    "StateLabel",
    "LABELS",
    "check_state_parameter",
    "state_amplitudes",
    "overlap_prob",
    "expected_io_table",
    "helstrom_guess_prob",
]


class StateLabel(NamedTuple):
    alpha: int
    c: int

    @property
    def index(self) -> int:
        return 2 * self.alpha + self.c

    @classmethod
    def from_index(cls, i: int) -> "StateLabel":
        return LABELS[i]


LABELS = tuple(StateLabel(al, c) for al in (0, 1) for c in (0, 1))


def check_state_parameter(a: float) -> float:
    if not (0.5 < a < 1.0):
        raise ValueError(f"state parameter a must lie in (0.5, 1), got {a}")
    return float(a)


def _amplitudes(a: float, label: StateLabel) -> tuple[float, float]:
    sign = -1.0 if label.alpha else 1.0
    if label.c == 0:
        return math.sqrt(a), sign * math.sqrt(1.0 - a)
    return math.sqrt(1.0 - a), -sign * math.sqrt(a)


def state_amplitudes(a: float, label: StateLabel) -> tuple[float, float]:
    """Amplitudes of the protocol state on |0> and |1>."""
    check_state_parameter(a)
    return _amplitudes(a, StateLabel(*label))


def overlap_prob(a: float, sent: StateLabel, meas: StateLabel) -> float:
    """|<meas|sent>|^2 for the real protocol states.

    Also accepts the boundary a = 0.5 (indistinguishable bit mixtures),
    which the cheating-Bob control scenario uses.
    """
    if not (0.5 <= a < 1.0):
        raise ValueError(f"state parameter a must lie in [0.5, 1), got {a}")
    s0, s1 = _amplitudes(a, StateLabel(*sent))
    m0, m1 = _amplitudes(a, StateLabel(*meas))
    return (s0 * m0 + s1 * m1) ** 2


def expected_io_table(a: float, qber: float) -> np.ndarray:
    """4x4 table of detection probabilities, rows = sent label, cols = detected label.

    The basis is chosen passively 50/50. Same-basis detections are wrong
    with probability ``qber``; cross-basis detections follow the ideal overlaps.
    """
    if not (0.0 <= qber < 0.5):
        raise ValueError(f"qber must lie in [0, 0.5), got {qber}")
    table = np.empty((4, 4))
    for sent in LABELS:
        for det in LABELS:
            if det.alpha == sent.alpha:
                p = 1.0 - qber if det.c == sent.c else qber
            else:
                p = overlap_prob(a, sent, det)
            table[sent.index, det.index] = 0.5 * p
    return table


def helstrom_guess_prob(a: float) -> float:
    """Optimal single-copy probability of guessing the bit c without knowing alpha.

    The two bit mixtures are diag(a, 1-a) and diag(1-a, a), so the
    Helstrom value 1/2 + 1/2 * (2a - 1) reduces to ``a``.
    """
    if not (0.5 <= a <= 1.0):
        raise ValueError(f"state parameter a must lie in [0.5, 1], got {a}")
    return float(a)

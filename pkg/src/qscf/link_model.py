"""Lossy link between Alice and Bob: attenuation, receiver and detector efficiency,
dark counts and the measured error ratio.

``p_dark`` is the total dark-click probability per pulse slot over all four
detectors. ``qber`` is the measured same-basis error ratio and already
includes whatever the dark counts contribute; see :func:`signal_qber`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .photon_source import PhotonStatistics
from .qubit_states import LABELS, StateLabel, expected_io_table

__all__ = [
    "LinkBudget",
    "DetectionEvent",
    "transmittance",
    "per_pulse_click_prob",
    "no_detection_prob",
    "signal_qber",
    "detection_row",
    "sample_detection",
    "sample_clicked_channel",
    "ClickModel",
    "signal_click_prob",
    "dark_fraction",
    "sample_detection_batch",
]


@dataclass(frozen=True)
class LinkBudget:
    loss_db: float = 0.0
    eta_bob: float = 0.5
    eta_det: float = 0.85
    p_dark: float = 4e-7
    qber: float = 0.028

    def __post_init__(self):
        if not (math.isfinite(self.loss_db) and self.loss_db >= 0):
            raise ValueError(f"loss_db must be finite and >= 0, got {self.loss_db}")
        for name in ("eta_bob", "eta_det"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if not (0.0 <= self.p_dark <= 1.0):
            raise ValueError(f"p_dark must lie in [0, 1], got {self.p_dark}")
        if not (0.0 <= self.qber < 0.5):
            raise ValueError(f"qber must lie in [0, 0.5), got {self.qber}")

    @property
    def eta(self) -> float:
        """Overall single-photon detection efficiency of the link."""
        return transmittance(self.loss_db) * self.eta_bob * self.eta_det


class DetectionEvent(NamedTuple):
    channel: StateLabel
    dark: bool


def transmittance(loss_db: float) -> float:
    if not (loss_db >= 0) or not math.isfinite(loss_db):
        raise ValueError(f"loss must be finite and >= 0 dB, got {loss_db}")
    return 10.0 ** (-loss_db / 10.0)


def signal_click_prob(stats: PhotonStatistics, eta: float) -> float:
    """Probability that at least one photon survives the link."""
    return 1.0 - stats.survival_generating(eta)


def per_pulse_click_prob(stats: PhotonStatistics, link: LinkBudget) -> float:
    return 1.0 - (1.0 - link.p_dark) * stats.survival_generating(link.eta)


def no_detection_prob(p_click: float, K: int) -> float:
    """Probability that none of the ``K`` slots of a round clicks."""
    if not (0.0 <= p_click <= 1.0):
        raise ValueError(f"p_click must lie in [0, 1], got {p_click}")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if p_click == 1.0:
        return 0.0
    return math.exp(K * math.log1p(-p_click))


def dark_fraction(stats: PhotonStatistics, link: LinkBudget) -> float:
    """P(dark | click)."""
    p_click = per_pulse_click_prob(stats, link)
    return link.p_dark / p_click if p_click > 0 else 0.0


def signal_qber(stats: PhotonStatistics, link: LinkBudget) -> float:
    """Same-basis error ratio of signal clicks alone.

    A dark click picks one of the four channels uniformly and so is wrong
    half the time when the basis matches. The signal error is lowered so the
    mixture reproduces the measured ``qber``; it is clipped at zero when the
    dark contribution alone exceeds the measured value.
    """
    f = dark_fraction(stats, link)
    if f >= 1.0:
        return 0.0
    return max(0.0, (link.qber - 0.5 * f) / (1.0 - f))


def detection_row(a: float, sent: StateLabel, stats: PhotonStatistics, link: LinkBudget) -> np.ndarray:
    """Conditional channel distribution for a signal click of ``sent``."""
    return expected_io_table(a, signal_qber(stats, link))[StateLabel(*sent).index]


@dataclass(frozen=True)
class ClickModel:
    """Precomputed per-slot quantities for one (source, link, a) combination."""

    p_click: float
    p_dark: float
    p_signal: float
    p_dark_given_click: float
    cum_rows: np.ndarray

    @classmethod
    def build(cls, a: float, stats: PhotonStatistics, link: LinkBudget) -> "ClickModel":
        table = expected_io_table(a, signal_qber(stats, link))
        cum = np.cumsum(table, axis=1)
        cum[:, -1] = 1.0
        return cls(
            p_click=per_pulse_click_prob(stats, link),
            p_dark=link.p_dark,
            p_signal=signal_click_prob(stats, link.eta),
            p_dark_given_click=dark_fraction(stats, link),
            cum_rows=cum,
        )

    def signal_channel(self, sent_index: int, rng: np.random.Generator) -> int:
        return int(np.searchsorted(self.cum_rows[sent_index], rng.random(), side="right"))

    def clicked_channel(self, sent_index: int, rng: np.random.Generator) -> DetectionEvent:
        """Channel that fired in a slot already known to have clicked."""
        if rng.random() < self.p_dark_given_click:
            return DetectionEvent(LABELS[int(rng.integers(4))], True)
        return DetectionEvent(LABELS[self.signal_channel(sent_index, rng)], False)


def sample_clicked_channel(
    sent: StateLabel,
    a: float,
    stats: PhotonStatistics,
    link: LinkBudget,
    rng: np.random.Generator,
) -> DetectionEvent:
    return ClickModel.build(a, stats, link).clicked_channel(StateLabel(*sent).index, rng)


def sample_detection(
    sent: StateLabel,
    a: float,
    stats: PhotonStatistics,
    link: LinkBudget,
    rng: np.random.Generator,
    model: Optional[ClickModel] = None,
) -> Optional[DetectionEvent]:
    """One pulse slot: dark click, signal click, or nothing."""
    if model is None:
        model = ClickModel.build(a, stats, link)
    if rng.random() < model.p_dark:
        return DetectionEvent(LABELS[int(rng.integers(4))], True)
    if rng.random() < model.p_signal:
        return DetectionEvent(LABELS[model.signal_channel(StateLabel(*sent).index, rng)], False)
    return None


def sample_detection_batch(
    sent_indices: np.ndarray, model: ClickModel, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`sample_detection` over many independent slots.

    Returns ``(channel, dark)``; ``channel`` is -1 where nothing clicked.
    """
    sent_indices = np.asarray(sent_indices)
    n = sent_indices.shape
    dark = rng.random(n) < model.p_dark
    signal = ~dark & (rng.random(n) < model.p_signal)
    u = rng.random(n)
    rows = model.cum_rows[sent_indices]
    sig_channel = (u[..., None] >= rows).sum(axis=-1)
    dark_channel = rng.integers(4, size=n)
    channel = np.where(dark, dark_channel, np.where(signal, sig_channel, -1))
    return channel, dark

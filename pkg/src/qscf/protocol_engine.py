"""Monte Carlo execution of the coin-flipping protocol.

One flip:

1. Alice prepares K pulses, each in a random state (alpha_i, c_i).
2. Bob measures passively; the first click defines the index j. No click
   in K slots aborts the flip.
3. Bob sends a random bit b_j together with j.
4. Alice reveals (alpha_j, c_j).
5. If Bob's click was in Alice's basis but on the other bit, he aborts.
6. Otherwise the coin is c_j xor b_j.

Since the click probability does not depend on the state sent, j is drawn
directly from a geometric law and only slot j is simulated. Alice's bit
source is still advanced by 2K bits per flip, so the protocol transcript is
the same as if every label had been drawn. :func:`run_honest_flip_naive`
walks the slots one by one and is kept as a cross-check.
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .link_model import ClickModel, DetectionEvent, LinkBudget, sample_detection
from .photon_source import PhotonStatistics, SourceKind, SourceSpec, prob_multiphoton
from .qubit_states import LABELS, StateLabel, _amplitudes
from .randomness import (
    ALICE_STREAM,
    BOB_STREAM,
    PHYSICS_STREAM,
    BitSource,
    open_bit_source,
    physics_rng,
)

__all__ = [
    "RngSpec",
    "RngBundle",
    "ScenarioConfig",
    "OutcomeKind",
    "FlipOutcome",
    "SessionStats",
    "CheatStats",
    "IoTableResult",
    "first_detection",
    "cheat_detection",
    "run_honest_flip",
    "run_honest_flip_naive",
    "run_session",
    "run_bob_cheat_session",
    "simulated_io_table",
]


@dataclass(frozen=True)
class RngSpec:
    """Where each party's bits come from.

    ``seed`` drives every seeded stream: Alice, Bob and physics use stream
    ids 0, 1 and 2. A random file replaces the seeded stream of that party.
    """

    seed: int = 0
    alice_file: Optional[str] = None
    bob_file: Optional[str] = None


@dataclass
class RngBundle:
    alice: BitSource
    bob: BitSource
    physics: np.random.Generator

    @classmethod
    def from_spec(cls, spec: RngSpec) -> "RngBundle":
        return cls(
            alice=open_bit_source(spec.alice_file or spec.seed, ALICE_STREAM),
            bob=open_bit_source(spec.bob_file or spec.seed, BOB_STREAM),
            physics=physics_rng(spec.seed, PHYSICS_STREAM),
        )


@dataclass(frozen=True)
class ScenarioConfig:
    source: SourceSpec = field(default_factory=lambda: SourceSpec(SourceKind.SPS, 0.0013, 0.03))
    link: LinkBudget = field(default_factory=LinkBudget)
    K: int = 50_000
    a: float = 0.9
    clock_hz: float = 80e6
    rng: RngSpec = field(default_factory=RngSpec)
    # replaces the source-derived distribution (degenerate test sources)
    photon_stats: Optional[PhotonStatistics] = None

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be an integer >= 1, got {self.K}")
        object.__setattr__(self, "K", int(self.K))
        # a = 0.5 is admitted for the indistinguishable-states control
        if not (0.5 <= self.a < 1.0):
            raise ValueError(f"state parameter a must lie in (0.5, 1), got {self.a}")
        if not (self.clock_hz > 0 and math.isfinite(self.clock_hz)):
            raise ValueError(f"clock_hz must be > 0, got {self.clock_hz}")

    @property
    def stats(self) -> PhotonStatistics:
        if self.photon_stats is not None:
            return self.photon_stats
        return self.source.statistics()

    def click_model(self) -> ClickModel:
        return ClickModel.build(self.a, self.stats, self.link)

    def open_rng(self) -> RngBundle:
        return RngBundle.from_spec(self.rng)

    def physical_dict(self) -> dict:
        """Everything except randomness, in a JSON-friendly form."""
        d = {
            "source": {"kind": self.source.kind.value, "mu": self.source.mu, "g2": self.source.g2},
            "link": asdict(self.link),
            "K": self.K,
            "a": self.a,
            "clock_hz": self.clock_hz,
        }
        if self.photon_stats is not None:
            d["photon_stats"] = [*self.photon_stats.p, self.photon_stats.tail]
        return d

    def digest(self, extra: Optional[dict] = None) -> str:
        body = self.physical_dict()
        if extra:
            body = {**body, **extra}
        blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


class OutcomeKind(str, enum.Enum):
    COIN = "coin"
    ABORT_NO_DETECTION = "no_detection"
    ABORT_MISMATCH = "mismatch"


@dataclass(frozen=True)
class FlipOutcome:
    kind: OutcomeKind
    bit: Optional[int] = None
    j: Optional[int] = None
    alpha: Optional[int] = None
    c: Optional[int] = None
    channel: Optional[StateLabel] = None
    b: Optional[int] = None
    dark: bool = False

    def __post_init__(self):
        if self.kind is OutcomeKind.COIN and self.bit not in (0, 1):
            raise ValueError("a coin outcome needs a bit")


@dataclass
class SessionStats:
    n_flips: int
    n_success: int
    n_abort_nodetect: int
    n_abort_mismatch: int
    n_zero: int
    n_one: int
    K: int
    clock_hz: float
    bits_alice: int = 0
    bits_bob: int = 0

    def __post_init__(self):
        if self.n_success + self.n_abort_nodetect + self.n_abort_mismatch != self.n_flips:
            raise AssertionError("outcome counts do not partition the flips")

    @property
    def p0_hat(self) -> float:
        return self.n_zero / self.n_success if self.n_success else float("nan")

    @property
    def p1_hat(self) -> float:
        return self.n_one / self.n_success if self.n_success else float("nan")

    @property
    def abort_rate(self) -> float:
        return (self.n_abort_nodetect + self.n_abort_mismatch) / self.n_flips

    @property
    def mismatch_rate(self) -> float:
        return self.n_abort_mismatch / self.n_flips

    @property
    def nodetect_rate(self) -> float:
        return self.n_abort_nodetect / self.n_flips

    @property
    def duration_model_s(self) -> float:
        return self.n_flips * self.K / self.clock_hz

    @property
    def rate_hz(self) -> float:
        return self.n_success / self.duration_model_s

    def abort_sigma(self) -> float:
        p = self.abort_rate
        return math.sqrt(p * (1 - p) / self.n_flips)

    def to_dict(self) -> dict:
        d = asdict(self)
        for name in ("p0_hat", "p1_hat", "abort_rate", "mismatch_rate", "nodetect_rate",
                     "duration_model_s", "rate_hz"):
            d[name] = getattr(self, name)
        d["abort_sigma"] = self.abort_sigma()
        return d


@dataclass
class CheatStats:
    desired_bit: int
    n_flips: int
    n_detected: int
    n_success: int

    @property
    def success_prob(self) -> float:
        return self.n_success / self.n_detected if self.n_detected else float("nan")

    @property
    def sigma(self) -> float:
        p = self.success_prob
        return math.sqrt(p * (1 - p) / self.n_detected) if self.n_detected else float("nan")

    def to_dict(self) -> dict:
        return {**asdict(self), "success_prob": self.success_prob, "sigma": self.sigma}


# -- physics-side sampling shared with the networked Physics process ----------

def first_detection(model: ClickModel, K: int, rng: np.random.Generator) -> Optional[int]:
    """1-based index of the first click among K slots, or None."""
    if model.p_click <= 0.0:
        return None
    j = int(rng.geometric(min(model.p_click, 1.0)))
    return j if j <= K else None


def cheat_detection(
    stats: PhotonStatistics,
    K: int,
    a: float,
    label_at: Callable[[int], StateLabel],
    rng: np.random.Generator,
) -> Optional[tuple[int, int]]:
    """Cheating Bob on a lossless channel with perfect detectors.

    He keeps the first multi-photon pulse if any (and learns c exactly),
    otherwise the first single-photon pulse, measured in the basis that
    separates the two bit mixtures. Returns ``(j, guessed_c)`` or None when
    all K pulses are empty.
    """
    q = prob_multiphoton(stats)
    if q > 0.0:
        j = int(rng.geometric(min(q, 1.0)))
        if j <= K:
            return j, label_at(j).c
    p_single = stats.p1 / (1.0 - q) if q < 1.0 else 0.0
    if p_single <= 0.0:
        return None
    j = int(rng.geometric(min(p_single, 1.0)))
    if j > K:
        return None
    amp0, _ = _amplitudes(a, label_at(j))
    guess = 0 if rng.random() < amp0 * amp0 else 1
    return j, guess


def _judge(label: StateLabel, det: DetectionEvent, b: int, j: int) -> FlipOutcome:
    ch = det.channel
    common = dict(j=j, alpha=label.alpha, c=label.c, channel=ch, b=b, dark=det.dark)
    if ch.alpha == label.alpha and ch.c != label.c:
        return FlipOutcome(OutcomeKind.ABORT_MISMATCH, **common)
    return FlipOutcome(OutcomeKind.COIN, bit=label.c ^ b, **common)


# -- honest parties -----------------------------------------------------------

def run_honest_flip(
    scenario: ScenarioConfig, rng: RngBundle, model: Optional[ClickModel] = None
) -> FlipOutcome:
    if model is None:
        model = scenario.click_model()
    K = scenario.K
    b = rng.bob.draw_bit()
    j = first_detection(model, K, rng.physics)
    label = rng.alice.peek_state(j) if j is not None else None
    rng.alice.skip(2 * K)
    if j is None:
        return FlipOutcome(OutcomeKind.ABORT_NO_DETECTION, b=b)
    det = model.clicked_channel(label.index, rng.physics)
    return _judge(label, det, b, j)


def run_honest_flip_naive(
    scenario: ScenarioConfig, rng: RngBundle, model: Optional[ClickModel] = None
) -> FlipOutcome:
    """Slot-by-slot reference implementation of :func:`run_honest_flip`."""
    if model is None:
        model = scenario.click_model()
    K = scenario.K
    b = rng.bob.draw_bit()
    bits = rng.alice.draw_bits(2 * K)
    stats = scenario.stats
    for i in range(K):
        label = LABELS[2 * int(bits[2 * i]) + int(bits[2 * i + 1])]
        det = sample_detection(label, scenario.a, stats, scenario.link, rng.physics, model=model)
        if det is not None:
            return _judge(label, det, b, i + 1)
    return FlipOutcome(OutcomeKind.ABORT_NO_DETECTION, b=b)


def _tally(outcomes: Iterable[FlipOutcome], scenario: ScenarioConfig, rng: RngBundle) -> SessionStats:
    counts = {k: 0 for k in OutcomeKind}
    ones = n = 0
    for o in outcomes:
        n += 1
        counts[o.kind] += 1
        if o.kind is OutcomeKind.COIN:
            ones += o.bit
    n_success = counts[OutcomeKind.COIN]
    return SessionStats(
        n_flips=n,
        n_success=n_success,
        n_abort_nodetect=counts[OutcomeKind.ABORT_NO_DETECTION],
        n_abort_mismatch=counts[OutcomeKind.ABORT_MISMATCH],
        n_zero=n_success - ones,
        n_one=ones,
        K=scenario.K,
        clock_hz=scenario.clock_hz,
        bits_alice=rng.alice.bits_consumed,
        bits_bob=rng.bob.bits_consumed,
    )


def run_session(
    scenario: ScenarioConfig,
    n_flips: int,
    rng: Optional[RngBundle] = None,
    *,
    naive: bool = False,
    record: Optional[list] = None,
) -> SessionStats:
    """Run ``n_flips`` honest flips and aggregate them.

    If ``record`` is a list, every :class:`FlipOutcome` is appended to it.
    """
    if n_flips < 1:
        raise ValueError("a session needs at least one flip")
    if rng is None:
        rng = scenario.open_rng()
    model = scenario.click_model()
    flip = run_honest_flip_naive if naive else run_honest_flip

    def gen():
        for _ in range(n_flips):
            o = flip(scenario, rng, model)
            if record is not None:
                record.append(o)
            yield o

    return _tally(gen(), scenario, rng)


def run_bob_cheat_flip(
    scenario: ScenarioConfig, desired_bit: int, rng: RngBundle, stats: Optional[PhotonStatistics] = None
) -> Optional[FlipOutcome]:
    """One flip against a measure-and-guess Bob; None if he saw no photon."""
    if stats is None:
        stats = scenario.stats
    K = scenario.K
    alice = rng.alice
    res = cheat_detection(stats, K, scenario.a, alice.peek_state, rng.physics)
    label = alice.peek_state(res[0]) if res is not None else None
    alice.skip(2 * K)
    if res is None:
        return None
    j, guess = res
    b = guess ^ desired_bit
    return FlipOutcome(OutcomeKind.COIN, bit=label.c ^ b, j=j, alpha=label.alpha, c=label.c, b=b)


def run_bob_cheat_session(
    scenario: ScenarioConfig,
    desired_bit: int,
    n_flips: int,
    rng: Optional[RngBundle] = None,
) -> CheatStats:
    if desired_bit not in (0, 1):
        raise ValueError("desired_bit must be 0 or 1")
    if n_flips < 1:
        raise ValueError("a session needs at least one flip")
    if rng is None:
        rng = scenario.open_rng()
    stats = scenario.stats
    detected = success = 0
    for _ in range(n_flips):
        o = run_bob_cheat_flip(scenario, desired_bit, rng, stats)
        if o is None:
            continue
        detected += 1
        success += o.bit == desired_bit
    return CheatStats(desired_bit, n_flips, detected, success)


@dataclass
class IoTableResult:
    counts: np.ndarray
    min_per_row: int = 1000

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def table(self) -> np.ndarray:
        tot = self.row_totals[:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(tot > 0, self.counts / np.maximum(tot, 1), np.nan)

    @property
    def insufficient_rows(self) -> list[int]:
        return [i for i, t in enumerate(self.row_totals) if t < self.min_per_row]

    @classmethod
    def from_outcomes(cls, outcomes: Iterable[FlipOutcome], min_per_row: int = 1000) -> "IoTableResult":
        counts = np.zeros((4, 4), dtype=np.int64)
        for o in outcomes:
            if o.channel is not None:
                counts[2 * o.alpha + o.c, o.channel.index] += 1
        return cls(counts, min_per_row)

    def sigma(self) -> np.ndarray:
        """Per-entry multinomial standard error."""
        p = np.nan_to_num(self.table)
        return np.sqrt(p * (1 - p) / np.maximum(self.row_totals, 1)[:, None])


def simulated_io_table(
    scenario: ScenarioConfig,
    n_flips: int,
    rng: Optional[RngBundle] = None,
    min_per_row: int = 1000,
) -> IoTableResult:
    """Sent-vs-detected table accumulated over the first detection of each flip."""
    outcomes: list[FlipOutcome] = []
    run_session(scenario, n_flips, rng, record=outcomes)
    return IoTableResult.from_outcomes(outcomes, min_per_row)

"""Flat ``key = value`` run configuration files.

Units are part of the key names (``loss_db``, ``clock_hz``). Lines starting
with ``#`` are comments. Unknown keys are rejected.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .link_model import LinkBudget
from .photon_source import SourceKind, SourceSpec
from .protocol_engine import RngSpec, ScenarioConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "bundled_config", "default_grids"]

_SECTION = "run"


class ConfigError(ValueError):
    pass


def _float(v: str) -> float:
    return float(v)


def _int(v: str) -> int:
    x = float(v)
    if x != int(x):
        raise ValueError(f"{v!r} is not an integer")
    return int(x)


def _floats(v: str) -> list[float]:
    return [float(t) for t in v.replace(",", " ").split()]


def _ints(v: str) -> list[int]:
    return [_int(t) for t in v.replace(",", " ").split()]


def _str(v: str) -> str:
    return v.strip()


_KEYS = {
    "source_kind": _str,
    "mu": _float,
    "g2": _float,
    "loss_db": _float,
    "eta_bob": _float,
    "eta_det": _float,
    "p_dark": _float,
    "qber": _float,
    "pulses_per_flip": _int,
    "state_a": _float,
    "clock_hz": _float,
    "seed": _int,
    "alice_random_file": _str,
    "bob_random_file": _str,
    "n_flips": _int,
    "k_grid": _ints,
    "mu_grid": _floats,
    "fixed_a": _float,
}


def default_grids() -> tuple[list[int], list[float]]:
    """Log-spaced (K, mu) grids that contain the experimental operating point."""
    ks = set(int(round(k)) for k in np.geomspace(1e3, 3e6, 36)) | {50_000}
    mus = set(float(f"{m:.4g}") for m in np.geomspace(1e-4, 1e-2, 21)) | {0.0013}
    return sorted(ks), sorted(mus)


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig
    n_flips: int = 50_000
    k_grid: Optional[tuple[int, ...]] = None
    mu_grid: Optional[tuple[float, ...]] = None
    fixed_a: Optional[float] = None
    source_path: Optional[str] = field(default=None, compare=False)

    def with_seed(self, seed: Optional[int]) -> "RunConfig":
        if seed is None:
            return self
        return replace(self, scenario=replace(self.scenario, rng=replace(self.scenario.rng, seed=seed)))

    def grids(self) -> tuple[list[int], list[float]]:
        dk, dm = default_grids()
        return list(self.k_grid or dk), list(self.mu_grid or dm)


def parse_config(text: str, source_path: Optional[str] = None) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    if parser.sections() != [_SECTION]:
        raise ConfigError("config must be a flat list of key = value lines (no sections)")
    raw = dict(parser[_SECTION])
    unknown = sorted(set(raw) - set(_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    vals = {}
    for k, v in raw.items():
        try:
            vals[k] = _KEYS[k](v)
        except ValueError as exc:
            raise ConfigError(f"bad value for {k}: {exc}") from None

    base = ScenarioConfig()
    try:
        kind = SourceKind(vals.get("source_kind", base.source.kind.value).upper())
        source = SourceSpec(kind, vals.get("mu", base.source.mu), vals.get("g2", base.source.g2))
        link = LinkBudget(
            loss_db=vals.get("loss_db", base.link.loss_db),
            eta_bob=vals.get("eta_bob", base.link.eta_bob),
            eta_det=vals.get("eta_det", base.link.eta_det),
            p_dark=vals.get("p_dark", base.link.p_dark),
            qber=vals.get("qber", base.link.qber),
        )
        rng = RngSpec(
            seed=vals.get("seed", 0),
            alice_file=vals.get("alice_random_file"),
            bob_file=vals.get("bob_random_file"),
        )
        scenario = ScenarioConfig(
            source=source,
            link=link,
            K=vals.get("pulses_per_flip", base.K),
            a=vals.get("state_a", base.a),
            clock_hz=vals.get("clock_hz", base.clock_hz),
            rng=rng,
        )
        fixed_a = vals.get("fixed_a")
        if fixed_a is not None and not (0.5 < fixed_a < 1):
            raise ValueError(f"fixed_a must lie in (0.5, 1), got {fixed_a}")
        n_flips = vals.get("n_flips", 50_000)
        if n_flips < 1:
            raise ValueError("n_flips must be >= 1")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(
        scenario=scenario,
        n_flips=n_flips,
        k_grid=tuple(vals["k_grid"]) if "k_grid" in vals else None,
        mu_grid=tuple(vals["mu_grid"]) if "mu_grid" in vals else None,
        fixed_a=fixed_a,
        source_path=source_path,
    )


def load_config(path: Union[str, Path]) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_config(text, str(p))


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package, e.g. ``baseline.cfg``."""
    return Path(__file__).parent / "configs" / name

import math

import numpy as np
import pytest

from qscf.link_model import LinkBudget
from qscf.photon_source import SourceKind, SourceSpec
from qscf.protocol_engine import RngSpec, ScenarioConfig

_ACCEPTANCE: list[tuple[str, bool, str]] = []


def baseline(seed=1, **kw) -> ScenarioConfig:
    """Scenario with the baseline parameter set; keyword overrides for link/source/K/a."""
    link_keys = {"loss_db", "eta_bob", "eta_det", "p_dark", "qber"}
    link = LinkBudget(**{k: kw.pop(k) for k in list(kw) if k in link_keys})
    kind = kw.pop("kind", SourceKind.SPS)
    mu = kw.pop("mu", 0.0013)
    g2 = kw.pop("g2", 0.03)
    return ScenarioConfig(source=SourceSpec(kind, mu, g2), link=link, rng=RngSpec(seed=seed), **kw)


@pytest.fixture
def baseline_scenario():
    return baseline()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def within_sigma(observed, expected, sigma, k=4.0):
    return abs(observed - expected) <= k * sigma


def binom_sigma(p, n):
    return math.sqrt(p * (1 - p) / n)


class AcceptanceRecorder:
    def __init__(self, name):
        self.name = name

    def check(self, ok: bool, detail: str):
        _ACCEPTANCE.append((self.name, bool(ok), detail))
        assert ok, f"{self.name}: {detail}"


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    return AcceptanceRecorder(marker.args[0] if marker else request.node.name)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion label")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from qscf.photon_source import (
    PhotonStatistics,
    SourceKind,
    SourceSpec,
    poisson_pn,
    prob_multiphoton,
    sample_photon_number,
    sps_statistics,
    wcp_statistics,
)

# 40-digit mpmath evaluations of the Poisson series
P0_WCP = 0.9987008446339523
P1_WCP = 0.001298311098024138
MULTI_WCP = 8.442680235554358e-07


def test_poisson_values():
    assert poisson_pn(0.0013, 0) == pytest.approx(P0_WCP, rel=1e-14)
    assert poisson_pn(0.0013, 1) == pytest.approx(P1_WCP, rel=1e-14)
    assert poisson_pn(1e-12, 0) == pytest.approx(1.0)


def test_poisson_matches_factorial_formula():
    for mu in (0.01, 0.7, 3.0):
        for n in range(8):
            direct = math.exp(-mu) * mu**n / math.factorial(n)
            assert poisson_pn(mu, n) == pytest.approx(direct, rel=1e-13)


@pytest.mark.parametrize("mu", [0.0, -1.0, float("nan"), float("inf")])
def test_poisson_domain(mu):
    with pytest.raises(ValueError):
        poisson_pn(mu, 0)


def test_sps_statistics_values():
    s = sps_statistics(0.0013, 0.03)
    assert s.p2 == pytest.approx(2.535e-8, rel=1e-12)
    assert s.p1 == 0.0013
    assert s.p0 == pytest.approx(1 - 0.0013 - 2.535e-8, abs=1e-16)
    assert math.fsum(s.p) == pytest.approx(1.0, abs=1e-12)
    assert sps_statistics(0.2, 0.0).p2 == 0.0


def test_sps_domain():
    with pytest.raises(ValueError):
        sps_statistics(0.0013, 1.0)
    with pytest.raises(ValueError):
        sps_statistics(1.2, 0.0)
    with pytest.raises(ValueError):
        SourceSpec(SourceKind.SPS, 0.1, -0.1)


def test_prob_multiphoton():
    assert prob_multiphoton(sps_statistics(0.0013, 0.03)) == pytest.approx(2.535e-8, rel=1e-12)
    assert prob_multiphoton(wcp_statistics(0.0013)) == pytest.approx(MULTI_WCP, rel=1e-12)
    assert prob_multiphoton(wcp_statistics(1e-9)) < 1e-17
    assert prob_multiphoton(sps_statistics(1e-9, 0.5)) < 1e-18


def test_wcp_statistics_entries():
    s = wcp_statistics(0.0013)
    assert s.p0 == pytest.approx(P0_WCP, rel=1e-14)
    assert s.p1 == pytest.approx(P1_WCP, rel=1e-14)
    assert s.p2 + s.tail == pytest.approx(MULTI_WCP, rel=1e-12)


def test_survival_generating_against_series():
    for mu in (0.0013, 0.5, 2.0):
        s = wcp_statistics(mu)
        for eta in (0.1, 0.425, 0.9):
            series = sum(poisson_pn(mu, n) * (1 - eta) ** n for n in range(60))
            assert s.survival_generating(eta) == pytest.approx(series, rel=1e-13)
            assert s.survival_generating(eta) == pytest.approx(math.exp(-mu * eta), rel=1e-13)


def test_degenerate_sampler(rng):
    vac = PhotonStatistics((1.0, 0.0, 0.0))
    assert np.all(sample_photon_number(vac, rng, 1000) == 0)
    assert sample_photon_number(vac, rng) == 0


def test_sampler_p1_10M_draws(rng):
    s = sps_statistics(0.0013, 0.03)
    n = 10_000_000
    draws = sample_photon_number(s, rng, n)
    f1 = np.count_nonzero(draws == 1) / n
    assert abs(f1 - 1.3e-3) <= 4 * math.sqrt(1.3e-3 * (1 - 1.3e-3) / n)


def test_sampler_deterministic():
    s = wcp_statistics(0.3)
    a = sample_photon_number(s, np.random.default_rng(7), 1000)
    b = sample_photon_number(s, np.random.default_rng(7), 1000)
    assert np.array_equal(a, b)


def test_sampler_chi_square_wcp():
    rng = np.random.default_rng(2024)
    mu = 1.5
    s = wcp_statistics(mu)
    n = 200_000
    draws = sample_photon_number(s, rng, n)
    top = 7
    obs = np.bincount(np.minimum(draws, top), minlength=top + 1)
    exp = np.array([poisson_pn(mu, k) for k in range(top)] + [0.0])
    exp[-1] = 1 - exp.sum()
    assert sps.chisquare(obs, exp * n).pvalue > 0.001


@settings(max_examples=200, deadline=None)
@given(mu=st.floats(1e-6, 0.5), g2=st.floats(0.0, 0.999))
def test_normalisation_property(mu, g2):
    for spec in (SourceSpec(SourceKind.SPS, mu, g2), SourceSpec(SourceKind.WCP, mu)):
        s = spec.statistics()
        probs = (*s.p, s.tail)
        assert all(0 <= x <= 1 for x in probs)
        assert abs(math.fsum(probs) - 1) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(mu=st.floats(1e-5, 0.1), g2=st.floats(0.01, 0.9), f=st.floats(1.01, 1.8))
def test_multiphoton_monotone_and_sps_below_wcp(mu, g2, f):
    # SPS < WCP needs g2 < 1 - 2 mu / 3 + O(mu^2); mu <= 0.1 keeps g2 <= 0.9 inside it
    sps_lo = prob_multiphoton(sps_statistics(mu, g2))
    assert prob_multiphoton(sps_statistics(mu * f, g2)) > sps_lo
    assert prob_multiphoton(sps_statistics(mu, min(g2 * f, 0.999))) > sps_lo
    wcp = prob_multiphoton(wcp_statistics(mu))
    assert prob_multiphoton(wcp_statistics(mu * f)) > wcp
    assert sps_lo < wcp

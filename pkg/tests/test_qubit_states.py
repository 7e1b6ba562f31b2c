import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qscf.qubit_states import (
    LABELS,
    StateLabel,
    expected_io_table,
    helstrom_guess_prob,
    overlap_prob,
    state_amplitudes,
)


def explicit_vector(a, alpha, c):
    # written out case by case from the state definitions
    if (alpha, c) == (0, 0):
        return np.array([math.sqrt(a), math.sqrt(1 - a)])
    if (alpha, c) == (1, 0):
        return np.array([math.sqrt(a), -math.sqrt(1 - a)])
    if (alpha, c) == (0, 1):
        return np.array([math.sqrt(1 - a), -math.sqrt(a)])
    return np.array([math.sqrt(1 - a), math.sqrt(a)])


def test_amplitudes_values():
    assert state_amplitudes(0.9, StateLabel(0, 0)) == pytest.approx((0.9486832980505138, 0.31622776601683794))
    x, y = state_amplitudes(0.7, StateLabel(1, 1))
    assert (x, y) == pytest.approx((math.sqrt(0.3), math.sqrt(0.7)))
    for lab in LABELS:
        x, y = state_amplitudes(0.63, lab)
        assert x * x + y * y == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("a", [0.5, 1.0, 1.2, -0.1])
def test_amplitudes_domain(a):
    with pytest.raises(ValueError):
        state_amplitudes(a, StateLabel(0, 0))


def test_overlap_values():
    s = StateLabel(0, 0)
    assert overlap_prob(0.9, s, s) == pytest.approx(1.0)
    assert overlap_prob(0.9, s, StateLabel(0, 1)) == pytest.approx(0.0, abs=1e-15)
    assert overlap_prob(0.9, s, StateLabel(1, 0)) == pytest.approx(0.64)
    assert overlap_prob(0.9, s, StateLabel(1, 1)) == pytest.approx(0.36)


def test_overlap_brute_force_grid():
    for a in np.arange(0.51, 1.0, 0.01):
        for s, m in itertools.product(LABELS, LABELS):
            ref = float(np.dot(explicit_vector(a, *s), explicit_vector(a, *m)) ** 2)
            assert abs(overlap_prob(a, s, m) - ref) <= 1e-12


@given(a=st.floats(0.5001, 0.9999))
def test_overlap_symmetry_and_completeness(a):
    for s in LABELS:
        assert sum(overlap_prob(a, s, m) for m in LABELS) == pytest.approx(2.0)
        for m in LABELS:
            assert overlap_prob(a, s, m) == pytest.approx(overlap_prob(a, m, s))


def test_io_table_rows():
    t = expected_io_table(0.9, 0.0)
    assert t[0] == pytest.approx([0.5, 0.0, 0.32, 0.18])
    t = expected_io_table(0.9, 0.028)
    assert t[0, :2] == pytest.approx([0.486, 0.014])
    assert t[0, 2:] == pytest.approx([0.32, 0.18])


@given(a=st.floats(0.5001, 0.9999), e=st.floats(0.0, 0.4999))
def test_io_table_rows_sum_to_one(a, e):
    t = expected_io_table(a, e)
    assert np.all((t >= 0) & (t <= 1))
    assert np.allclose(t.sum(axis=1), 1.0, atol=1e-12)


def test_io_table_noiseless_same_basis_block():
    t = expected_io_table(0.77, 0.0)
    for s in LABELS:
        for d in LABELS:
            if s.alpha == d.alpha:
                assert t[s.index, d.index] == pytest.approx(0.5 if s == d else 0.0, abs=1e-15)


def _helstrom_oracle(a):
    def rho(c):
        return sum(np.outer(explicit_vector(a, al, c), explicit_vector(a, al, c)) for al in (0, 1)) / 2

    ev = np.linalg.eigvalsh(rho(0) - rho(1))
    return 0.5 + 0.25 * np.abs(ev).sum()


def test_helstrom():
    assert helstrom_guess_prob(0.9) == 0.9
    assert helstrom_guess_prob(0.5) == 0.5
    assert helstrom_guess_prob(1.0) == 1.0
    for a in (0.55, 0.7, 0.9, 0.99):
        assert helstrom_guess_prob(a) == pytest.approx(_helstrom_oracle(a), abs=1e-12)

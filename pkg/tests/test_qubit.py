import numpy as np
import pytest
from hypothesis import given, strategies as st

from qerasure import qubit
from qerasure.errors import RangeError, SizeError, ValidationError
from qerasure.qubit import MeasurementFamily, closure_check, collapse, cos2_index, outcome_probability


def test_n1_labels():
    fam = MeasurementFamily(1)
    assert fam.n_observables == 2 and fam.n_states == 4
    # sigma_z eigenstates |0>, |1>; sigma_x eigenstates |+>, |->
    assert fam.eigenstate(0, 1) == 0 and fam.eigenstate(0, -1) == 2
    assert fam.eigenstate(1, 1) == 1 and fam.eigenstate(1, -1) == 3


@pytest.mark.parametrize("n", [0, -1])
def test_family_rejects_small_n(n):
    with pytest.raises(ValidationError):
        MeasurementFamily(n)


def test_family_cap():
    MeasurementFamily(24)
    with pytest.raises(SizeError):
        MeasurementFamily(25)


def test_family_rejects_non_integer():
    with pytest.raises(ValidationError):
        MeasurementFamily(1.5)


def test_born_rule_examples():
    assert outcome_probability(1, 0, 0, 1) == 1.0
    assert outcome_probability(1, 0, 0, -1) == 0.0
    assert outcome_probability(1, 0, 1, 1) == pytest.approx(0.5, abs=1e-15)
    assert outcome_probability(1, 1, 1, -1) == 0.0
    assert outcome_probability(2, 1, 0, 1) == pytest.approx(np.cos(np.pi / 8) ** 2, abs=1e-15)


def test_born_rule_range_errors():
    with pytest.raises(RangeError):
        outcome_probability(1, 4, 0, 1)
    with pytest.raises(RangeError):
        outcome_probability(1, 0, 2, 1)
    with pytest.raises(RangeError):
        outcome_probability(1, 0, 0, 0)


@given(n=st.integers(1, 24), data=st.data())
def test_outcomes_sum_to_one(n, data):
    fam = MeasurementFamily(n)
    j = data.draw(st.integers(0, fam.n_states - 1))
    k = data.draw(st.integers(0, fam.n_observables - 1))
    p, q = outcome_probability(fam, j, k, 1), outcome_probability(fam, j, k, -1)
    assert 0.0 <= p <= 1.0
    assert abs(p + q - 1.0) < 1e-15


@given(n=st.integers(1, 12), data=st.data())
def test_born_rule_matches_vectors(n, data):
    fam = MeasurementFamily(n)
    j = data.draw(st.integers(0, fam.n_states - 1))
    k = data.draw(st.integers(0, fam.n_observables - 1))
    psi = fam.state_vector(j)
    plus = fam.state_vector(fam.eigenstate(k, 1))
    assert abs(outcome_probability(fam, j, k, 1) - (psi @ plus) ** 2) < 1e-14


@given(n=st.integers(1, 24), data=st.data())
def test_collapse_lands_on_eigenstate(n, data):
    fam = MeasurementFamily(n)
    k = data.draw(st.integers(0, fam.n_observables - 1))
    y = data.draw(st.sampled_from([1, -1]))
    j = collapse(fam, k, y)
    assert fam.eigen_outcome(k, j) == y
    # a repeated measurement returns the same outcome with certainty
    assert outcome_probability(fam, j, k, y) == 1.0


@pytest.mark.parametrize("n", [1, 2, 5, 10, 13, 20])
def test_closure(n):
    assert closure_check(n)


def test_eigenvectors():
    fam = MeasurementFamily(3)
    for k in range(fam.n_observables):
        for y in (1, -1):
            v = fam.state_vector(fam.eigenstate(k, y))
            assert np.allclose(fam.observable_matrix(k) @ v, y * v, atol=1e-14)


def test_cos2_index_exact_points_and_symmetry():
    m = 64
    assert cos2_index(0, m) == 1.0
    assert cos2_index(m // 2, m) == 0.0
    assert cos2_index(m, m) == 1.0
    d = np.arange(-3 * m, 3 * m)
    a = cos2_index(d, m)
    assert np.array_equal(a, cos2_index(-d, m))
    assert np.allclose(a, np.cos(np.pi * d / m) ** 2, atol=1e-15)


def test_cos2_table_and_direct_agree():
    m = 256
    d = np.arange(4 * m)
    assert np.array_equal(cos2_index(d, m), qubit._cos2_direct(np.mod(d, m), m))

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wlra.errors import ParameterError
from wlra.linalg import (
    LowRankPair,
    as_matrix,
    hadamard,
    numerical_rank,
    randomized_lra,
    random_low_rank,
    singular_values,
    tail_energy,
    truncated_svd,
)


def test_as_matrix_rejects_bad_input():
    with pytest.raises(ParameterError):
        as_matrix(np.ones(3))
    with pytest.raises(ParameterError):
        as_matrix(np.array([[1.0, np.nan]]))


def test_low_rank_pair_shapes():
    P = LowRankPair(np.ones((4, 2)), np.ones((2, 3)))
    assert P.shape == (4, 3) and P.rank == 2 and P.params == 14
    np.testing.assert_allclose(P.matvec(np.ones(3)), P.to_dense() @ np.ones(3))
    with pytest.raises(ParameterError):
        LowRankPair(np.ones((4, 2)), np.ones((3, 3)))


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 15), d=st.integers(2, 15), seed=st.integers(0, 1000))
def test_truncation_error_is_tail_energy(n, d, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, d))
    k = int(rng.integers(1, min(n, d) + 1))
    err = np.linalg.norm(M - truncated_svd(M, k).reconstruct(), "fro") ** 2
    assert err == pytest.approx(tail_energy(M, k), rel=1e-9, abs=1e-12)


def test_tail_energy_full_rank_is_zero():
    M = np.random.default_rng(0).standard_normal((5, 4))
    assert tail_energy(M, 4) == 0.0
    assert tail_energy(M, 0) == pytest.approx(np.sum(M * M))


def test_numerical_rank_of_product():
    rng = np.random.default_rng(1)
    assert numerical_rank(random_low_rank(20, 15, 3, rng)) == 3
    assert numerical_rank(np.zeros((3, 3))) == 0


def test_randomized_matches_exact_on_low_rank():
    rng = np.random.default_rng(2)
    M = random_low_rank(40, 30, 4, rng)
    approx = randomized_lra(M, 4, seed=0).to_dense()
    np.testing.assert_allclose(approx, M, atol=1e-8)


def test_randomized_is_seeded():
    M = np.random.default_rng(3).standard_normal((30, 20))
    a = randomized_lra(M, 3, seed=5).to_dense()
    b = randomized_lra(M, 3, seed=5).to_dense()
    np.testing.assert_array_equal(a, b)


def test_singular_values_sorted():
    s = singular_values(np.random.default_rng(4).standard_normal((6, 5)))
    assert np.all(np.diff(s) <= 0)


def test_hadamard_shape_check():
    with pytest.raises(ParameterError):
        hadamard(np.ones((2, 2)), np.ones((2, 3)))

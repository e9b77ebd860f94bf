import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wlra.errors import ParameterError
from wlra.linalg import LowRankPair
from wlra.weights import (
    FAMILIES,
    LowRankWeight,
    OpCounter,
    RankOneBlock,
    StructuredWeight,
    dense_weight,
    inverse_dense,
    inverse_weight_apply_vector,
    make_family,
    structured_rank_bound,
    weight_rank,
)

FAMILY_PARAMS = {
    "low_rank_plus_sparse": dict(n=20, d=20, t=3, seed=1),
    "low_rank_plus_diagonal": dict(n=20),
    "low_rank_plus_block_diagonal": dict(n=20, block_sizes=[4, 6, 5]),
    "monotone_missing": dict(prefix_lengths=[20] * 5 + [12] * 7 + [3] * 8, d=20),
    "banded": dict(n=20, p=3),
}


def test_block_validation():
    with pytest.raises(ParameterError):
        RankOneBlock(np.array([2, 1]), np.array([0]), np.ones(2), np.ones(1))
    with pytest.raises(ParameterError):
        RankOneBlock(np.array([0]), np.array([0]), np.array([0.0]), np.ones(1))


@settings(max_examples=50, deadline=None)
@given(r0=st.integers(0, 8), c0=st.integers(0, 8), h=st.integers(1, 6), w=st.integers(1, 6))
def test_overlapping_blocks_rejected(r0, c0, h, w):
    base = RankOneBlock.ones(np.arange(3, 9), np.arange(3, 9))
    other = RankOneBlock.ones(np.arange(r0, min(r0 + h, 15)), np.arange(c0, min(c0 + w, 15)))
    overlap = set(other.row_support) & set(base.row_support) and \
        set(other.col_support) & set(base.col_support)
    if overlap:
        with pytest.raises(ParameterError):
            StructuredWeight(15, 15, blocks=(base, other))
    else:
        StructuredWeight(15, 15, blocks=(base, other))


def test_sparse_correction_rules():
    blk = RankOneBlock.ones(np.arange(3), np.arange(3))
    with pytest.raises(ParameterError):  # would go negative
        StructuredWeight(3, 3, [0], [0], [-2.0], (blk,))
    with pytest.raises(ParameterError):  # uncovered entries must be positive
        StructuredWeight(4, 4, [3], [3], [-1.0], (blk,))
    W = StructuredWeight(3, 3, [0], [0], [-1.0], (blk,))
    assert W.to_dense()[0, 0] == 0 and inverse_dense(W)[0, 0] == 0


@pytest.mark.parametrize("kind", FAMILIES)
def test_family_inverse_matches_dense(kind):
    W = make_family(kind, **FAMILY_PARAMS[kind])
    Wd = W.to_dense()
    assert np.all(Wd >= 0)
    expected = np.where(Wd > 0, 1.0 / np.where(Wd > 0, Wd, 1.0), 0.0)
    np.testing.assert_allclose(inverse_dense(W), expected, atol=1e-14)
    rng = np.random.default_rng(7)
    for _ in range(100):
        F = LowRankPair(rng.standard_normal((20, 3)), rng.standard_normal((3, 20)))
        x = rng.standard_normal(20)
        np.testing.assert_allclose(inverse_weight_apply_vector(W, F, x),
                                   (expected * F.to_dense()) @ x, atol=1e-10)


def test_family_shapes_are_as_documented():
    W = make_family("low_rank_plus_diagonal", n=5).to_dense()
    np.testing.assert_array_equal(W, 1 - np.eye(5))
    W = make_family("banded", n=6, p=1).to_dense()
    i, j = np.indices((6, 6))
    np.testing.assert_array_equal(W, (np.abs(i - j) > 1).astype(float))
    W = make_family("monotone_missing", prefix_lengths=[3, 2, 2, 0], d=3).to_dense()
    np.testing.assert_array_equal(W.sum(axis=1), [3, 2, 2, 0])
    W = make_family("low_rank_plus_block_diagonal", n=6, block_sizes=[2, 2]).to_dense()
    assert W[:2, :2].sum() == 0 and W[2:4, 2:4].sum() == 0 and W[4:, :].min() == 1


def test_monotone_rejects_increasing():
    with pytest.raises(ParameterError):
        make_family("monotone_missing", prefix_lengths=[1, 2], d=2)


def test_op_count_is_linear_in_storage():
    for kind in ("banded", "low_rank_plus_diagonal"):
        per_unit = []
        for n in (20, 80, 320):
            W = make_family(kind, n=n, **({"p": 2} if kind == "banded" else {}))
            rng = np.random.default_rng(n)
            F = LowRankPair(rng.standard_normal((n, 2)), rng.standard_normal((2, n)))
            c = OpCounter()
            inverse_weight_apply_vector(W, F, rng.standard_normal(n), c)
            per_unit.append(c.madds / W.storage)
        assert max(per_unit) / min(per_unit) < 1.01


def test_rank_bounds():
    W = make_family("low_rank_plus_block_diagonal", n=12, block_sizes=[3, 3])
    assert structured_rank_bound(W) == weight_rank(W) == 3
    assert np.linalg.matrix_rank(W.to_dense()) <= 3


def test_low_rank_weight_nonnegativity():
    with pytest.raises(ParameterError):
        LowRankWeight(LowRankPair(np.array([[1.0], [-1.0]]), np.ones((1, 2))))
    W = LowRankWeight(LowRankPair(np.ones((3, 1)), np.ones((1, 2))), declared_rank=2)
    assert weight_rank(W) == 2 and dense_weight(W).shape == (3, 2)


def test_dense_weight_rejects_negative():
    with pytest.raises(ParameterError):
        dense_weight(np.array([[1.0, -0.5]]))

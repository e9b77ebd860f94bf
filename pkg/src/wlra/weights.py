"""Non-negative weight matrices and their entrywise inverses.

Three representations are accepted wherever a weight is expected:

* a dense ``numpy`` array,
* :class:`LowRankWeight`, a non-negative product of two factors,
* :class:`StructuredWeight`, a sparse part plus rank-one blocks on pairwise
  disjoint rectangles.

For a structured weight the entrywise inverse restricted to the support never
needs to be materialized: the inverse of a rank-one block ``a b^T`` on
``S x T`` is the rank-one block ``(1/a)(1/b)^T`` on the same rectangle, and
the sparse part contributes one correction per stored entry.

Zero weights are excluded coordinates. The inverse is defined as 0 there, so
every weighted loss ignores them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .linalg import LowRankPair, as_matrix, numerical_rank

DENSE_CHECK_LIMIT = 10**6
SAMPLED_CHECKS = 10**4
NONNEG_SLACK = 1e-12


@dataclass(frozen=True)
class RankOneBlock:
    """``row_values[i] * col_values[j]`` on ``row_support x col_support``."""

    row_support: np.ndarray
    col_support: np.ndarray
    row_values: np.ndarray
    col_values: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.row_support, dtype=np.int64)
        cols = np.asarray(self.col_support, dtype=np.int64)
        rv = np.asarray(self.row_values, dtype=np.float64)
        cv = np.asarray(self.col_values, dtype=np.float64)
        if rows.ndim != 1 or cols.ndim != 1 or rows.size == 0 or cols.size == 0:
            raise ParameterError("block supports must be non-empty index lists")
        if rv.shape != rows.shape or cv.shape != cols.shape:
            raise ParameterError("block values must match their supports in length")
        if np.any(np.diff(rows) <= 0) or np.any(np.diff(cols) <= 0):
            raise ParameterError("block supports must be strictly increasing")
        if not (np.all(rv > 0) and np.all(cv > 0)):
            raise ParameterError("block values must be strictly positive")
        if not (np.all(np.isfinite(rv)) and np.all(np.isfinite(cv))):
            raise ParameterError("block values must be finite")
        for name, val in (("row_support", rows), ("col_support", cols),
                          ("row_values", rv), ("col_values", cv)):
            object.__setattr__(self, name, val)

    @classmethod
    def ones(cls, rows, cols):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        return cls(rows, cols, np.ones(rows.size), np.ones(cols.size))

    @property
    def storage(self):
        return self.row_support.size + self.col_support.size

    def value_at(self, i, j):
        """Weight at ``(i, j)``, or ``None`` when outside the rectangle."""
        a = np.searchsorted(self.row_support, i)
        b = np.searchsorted(self.col_support, j)
        if (a < self.row_support.size and self.row_support[a] == i
                and b < self.col_support.size and self.col_support[b] == j):
            return float(self.row_values[a] * self.col_values[b])
        return None


def _intervals_overlap(x, y):
    """Whether two sorted index arrays share an element."""
    if x[-1] < y[0] or y[-1] < x[0]:
        return False
    return np.intersect1d(x, y, assume_unique=True).size > 0


@dataclass(frozen=True)
class StructuredWeight:
    """``W = E + sum_i S_i`` with rank-one ``S_i`` on disjoint rectangles.

    Sparse entries may sit inside a block; their value is then added to the
    block's value. That is how "all ones except a zero diagonal" is stored in
    O(n): one all-ones block plus ``-1`` on the diagonal. Every resulting entry
    must be non-negative, and entries outside the blocks must be positive.
    """

    n: int
    d: int
    sparse_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    sparse_cols: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    sparse_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    blocks: tuple = ()
    # per sparse entry: value of the covering block, 0 if uncovered
    _under: np.ndarray = field(init=False, repr=False, compare=False)
    _inverse_correction: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ParameterError(f"dimensions must be positive, got {self.n}x{self.d}")
        rows = np.asarray(self.sparse_rows, dtype=np.int64).ravel()
        cols = np.asarray(self.sparse_cols, dtype=np.int64).ravel()
        vals = np.asarray(self.sparse_values, dtype=np.float64).ravel()
        if not rows.size == cols.size == vals.size:
            raise ParameterError("sparse rows, cols and values must have equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= self.n
                          or cols.min() < 0 or cols.max() >= self.d):
            raise ParameterError("sparse entry index out of range")
        if np.unique(rows * self.d + cols).size != rows.size:
            raise ParameterError("duplicate sparse entry positions")
        blocks = tuple(self.blocks)
        for blk in blocks:
            if not isinstance(blk, RankOneBlock):
                raise ParameterError("blocks must be RankOneBlock instances")
            if blk.row_support[-1] >= self.n or blk.col_support[-1] >= self.d \
                    or blk.row_support[0] < 0 or blk.col_support[0] < 0:
                raise ParameterError("block support index out of range")
        self._check_disjoint(blocks)

        under = np.zeros(rows.size)
        for t, (i, j) in enumerate(zip(rows, cols)):
            for blk in blocks:
                v = blk.value_at(i, j)
                if v is not None:
                    under[t] = v
                    break
        total = under + vals
        inside = under > 0
        if np.any(~inside & (vals <= 0)):
            raise ParameterError("sparse entries outside blocks must be positive")
        if np.any(inside & (total < 0)):
            raise ParameterError("sparse corrections may not make a weight negative")
        if np.any(inside & (vals == 0)):
            raise ParameterError("sparse corrections must be non-zero")
        # W^{o-1} = (sum_i S_i^{o-1}) + E', where E' fixes up the sparse positions
        with np.errstate(divide="ignore"):
            inv_total = np.where(total > 0, 1.0 / np.where(total > 0, total, 1.0), 0.0)
            inv_under = np.where(inside, 1.0 / np.where(inside, under, 1.0), 0.0)
        correction = inv_total - inv_under

        object.__setattr__(self, "sparse_rows", rows)
        object.__setattr__(self, "sparse_cols", cols)
        object.__setattr__(self, "sparse_values", vals)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "_under", under)
        object.__setattr__(self, "_inverse_correction", correction)

    @staticmethod
    def _check_disjoint(blocks):
        # sweep blocks by their first row; only blocks whose row ranges
        # intersect need a column comparison
        order = sorted(range(len(blocks)), key=lambda b: blocks[b].row_support[0])
        active = []
        for b in order:
            blk = blocks[b]
            lo = blk.row_support[0]
            active = [a for a in active if blocks[a].row_support[-1] >= lo]
            for a in active:
                other = blocks[a]
                if (_intervals_overlap(other.row_support, blk.row_support)
                        and _intervals_overlap(other.col_support, blk.col_support)):
                    raise ParameterError(f"blocks {a} and {b} have overlapping rectangles")
            active.append(b)

    @property
    def shape(self):
        return (self.n, self.d)

    @property
    def nnz_sparse(self):
        return int(self.sparse_values.size)

    @property
    def storage(self):
        """``nnz(E) + sum_i (|S_i| + |T_i|)``."""
        return self.nnz_sparse + sum(blk.storage for blk in self.blocks)

    def rank_bound(self):
        return self.nnz_sparse + len(self.blocks)

    def to_dense(self):
        W = np.zeros((self.n, self.d))
        for blk in self.blocks:
            W[np.ix_(blk.row_support, blk.col_support)] = np.outer(blk.row_values, blk.col_values)
        np.add.at(W, (self.sparse_rows, self.sparse_cols), self.sparse_values)
        return W

    def inverse_dense(self):
        """Entrywise inverse on the support, 0 elsewhere."""
        Winv = np.zeros((self.n, self.d))
        for blk in self.blocks:
            Winv[np.ix_(blk.row_support, blk.col_support)] = np.outer(
                1.0 / blk.row_values, 1.0 / blk.col_values)
        np.add.at(Winv, (self.sparse_rows, self.sparse_cols), self._inverse_correction)
        return Winv


@dataclass(frozen=True)
class LowRankWeight:
    """A non-negative weight given by low rank factors."""

    factors: LowRankPair
    declared_rank: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.declared_rank is None:
            object.__setattr__(self, "declared_rank", self.factors.rank)
        if self.declared_rank < self.factors.rank:
            raise ParameterError("declared rank is below the factor rank")
        n, d = self.factors.shape
        if n * d <= DENSE_CHECK_LIMIT:
            lowest = self.factors.to_dense().min()
        else:
            rng = np.random.default_rng(self.seed)
            ii = rng.integers(0, n, SAMPLED_CHECKS)
            jj = rng.integers(0, d, SAMPLED_CHECKS)
            lowest = np.einsum("tk,kt->t", self.factors.left[ii], self.factors.right[:, jj]).min()
        if lowest < -NONNEG_SLACK:
            raise ParameterError(f"low rank weight has a negative entry ({lowest:.3e})")

    @property
    def shape(self):
        return self.factors.shape

    @property
    def storage(self):
        return self.factors.params

    def to_dense(self):
        # clip the validated slack so no entry is negative
        return np.maximum(self.factors.to_dense(), 0.0)


def dense_weight(W):
    """Dense non-negative array for any weight representation."""
    if isinstance(W, (StructuredWeight, LowRankWeight)):
        return W.to_dense()
    W = as_matrix(W, "weight")
    if np.any(W < 0):
        raise ParameterError("weights must be non-negative")
    return W


def weight_shape(W):
    if isinstance(W, (StructuredWeight, LowRankWeight)):
        return W.shape
    return np.shape(W)


def weight_rank(W):
    """Rank bound: structural for structured/low rank weights, numerical for dense."""
    if isinstance(W, StructuredWeight):
        return min(W.rank_bound(), W.n, W.d)
    if isinstance(W, LowRankWeight):
        return W.declared_rank
    return numerical_rank(dense_weight(W))


def weight_storage(W):
    if isinstance(W, (StructuredWeight, LowRankWeight)):
        return W.storage
    return int(np.count_nonzero(dense_weight(W)))


def inverse_dense(W):
    if isinstance(W, StructuredWeight):
        return W.inverse_dense()
    Wd = dense_weight(W)
    pos = Wd > 0
    out = np.zeros_like(Wd)
    out[pos] = 1.0 / Wd[pos]
    return out


def weight_apply(W, A):
    """``W o A`` as a dense array."""
    A = as_matrix(A)
    if tuple(weight_shape(W)) != A.shape:
        raise ParameterError(f"weight shape {weight_shape(W)} does not match {A.shape}")
    return dense_weight(W) * A


class OpCounter:
    """Tallies multiply-adds performed by the instrumented kernels."""

    def __init__(self):
        self.madds = 0

    def add(self, count):
        self.madds += int(count)


def inverse_weight_apply_vector(W, F, x, counter=None):
    """``(W^{o-1} o (F.left @ F.right)) @ x`` without forming an ``n x d`` array.

    Each rank-one block costs ``O((|S|+|T|) k)`` and each sparse entry ``O(k)``,
    where ``k`` is the rank of ``F``.
    """
    if not isinstance(W, StructuredWeight):
        raise ParameterError("inverse_weight_apply_vector needs a StructuredWeight")
    if F.shape != W.shape:
        raise ParameterError(f"factor shape {F.shape} does not match weight {W.shape}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (W.d,):
        raise ParameterError(f"x must have length {W.d}, got shape {x.shape}")
    U, V = F.left, F.right
    k = F.rank
    out = np.zeros(W.n)
    for blk in W.blocks:
        S, T = blk.row_support, blk.col_support
        z = V[:, T] @ (x[T] / blk.col_values)
        out[S] += (U[S] @ z) / blk.row_values
        if counter is not None:
            counter.add((k + 1) * (S.size + T.size))
    if W.nnz_sparse:
        rows, cols = W.sparse_rows, W.sparse_cols
        entries = np.einsum("tk,kt->t", U[rows], V[:, cols])
        np.add.at(out, rows, W._inverse_correction * entries * x[cols])
        if counter is not None:
            counter.add((k + 2) * W.nnz_sparse)
    return out


FAMILIES = (
    "low_rank_plus_sparse",
    "low_rank_plus_diagonal",
    "low_rank_plus_block_diagonal",
    "monotone_missing",
    "banded",
)


def _full_ones(n, d):
    return RankOneBlock.ones(np.arange(n), np.arange(d))


def make_family(kind, **params):
    """Build one of the five structured weight patterns.

    ``low_rank_plus_sparse``
        ``n``, ``d``, ``t`` non-zeros per row at random columns, ``seed``;
        values uniform on [0.5, 1.5]. Stored entirely as the sparse part.
    ``low_rank_plus_diagonal``
        ``n`` (square). All ones with a zero diagonal: one all-ones block
        plus ``-1`` corrections on the diagonal.
    ``low_rank_plus_block_diagonal``
        ``n`` (square), ``block_sizes``. All ones except zero diagonal blocks
        placed from the top-left. Each block's rows minus its own columns form
        one all-ones rectangle; rows past the last block form one more.
    ``monotone_missing``
        ``prefix_lengths`` (non-increasing), ``d``. Row ``i`` is ones on its
        first ``prefix_lengths[i]`` columns. One rectangle per distinct length.
    ``banded``
        ``n`` (square), ``p``. All ones except zeros where ``|i-j| <= p``.
    """
    if kind == "low_rank_plus_sparse":
        n, d, t = params["n"], params.get("d", params["n"]), params["t"]
        if not 1 <= t <= d:
            raise ParameterError(f"need 1 <= t <= d, got t={t}, d={d}")
        rng = np.random.default_rng(params.get("seed", 0))
        cols = np.concatenate([np.sort(rng.choice(d, t, replace=False)) for _ in range(n)])
        rows = np.repeat(np.arange(n), t)
        return StructuredWeight(n, d, rows, cols, rng.uniform(0.5, 1.5, n * t))

    if kind == "low_rank_plus_diagonal":
        n = params["n"]
        if n < 2:
            raise ParameterError("diagonal family needs n >= 2")
        idx = np.arange(n)
        return StructuredWeight(n, n, idx, idx, -np.ones(n), (_full_ones(n, n),))

    if kind == "low_rank_plus_block_diagonal":
        n = params["n"]
        sizes = [int(s) for s in params["block_sizes"]]
        if any(s < 1 for s in sizes) or sum(sizes) > n:
            raise ParameterError(f"block sizes {sizes} do not fit in n={n}")
        blocks = []
        start = 0
        for s in sizes:
            rows = np.arange(start, start + s)
            cols = np.setdiff1d(np.arange(n), rows)
            if cols.size:
                blocks.append(RankOneBlock.ones(rows, cols))
            start += s
        if start < n:
            blocks.append(_full_ones(n, n) if start == 0 else
                          RankOneBlock.ones(np.arange(start, n), np.arange(n)))
        return StructuredWeight(n, n, blocks=tuple(blocks))

    if kind == "monotone_missing":
        lengths = np.asarray(params["prefix_lengths"], dtype=np.int64)
        n = lengths.size
        d = params.get("d", int(lengths.max()) if n else 0)
        if n < 1 or lengths.min() < 0 or lengths.max() > d:
            raise ParameterError("prefix lengths must lie in [0, d]")
        if np.any(np.diff(lengths) > 0):
            raise ParameterError("prefix lengths must be non-increasing")
        blocks = []
        for length in np.unique(lengths[lengths > 0]):
            rows = np.flatnonzero(lengths == length)
            blocks.append(RankOneBlock.ones(rows, np.arange(length)))
        return StructuredWeight(n, d, blocks=tuple(blocks))

    if kind == "banded":
        n, p = params["n"], params["p"]
        if not 0 <= p < n:
            raise ParameterError(f"band half-width p={p} must satisfy 0 <= p < n={n}")
        rows, cols = [], []
        for off in range(-p, p + 1):
            i = np.arange(max(0, -off), min(n, n - off))
            rows.append(i)
            cols.append(i + off)
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        return StructuredWeight(n, n, rows, cols, -np.ones(rows.size), (_full_ones(n, n),))

    raise ParameterError(f"unknown family {kind!r}; expected one of {FAMILIES}")


def structured_rank_bound(W):
    return W.rank_bound()

"""The reweighted-SVD solver and its relatives.

``svd_w`` computes a rank ``r*k`` approximation of ``W o A`` and divides it
entrywise by ``W``. Because ``W o A'`` has rank at most ``r*k`` for every
rank-``k`` matrix ``A'``, the weighted loss of the result is at most the tail
energy of ``W o A`` beyond rank ``r*k``, which in turn lower-bounds the weighted
loss of every rank-``k`` matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateInputError, ParameterError
from .linalg import (
    LowRankPair,
    as_matrix,
    numerical_rank,
    randomized_lra,
    truncated_svd,
)
from .weights import (
    StructuredWeight,
    dense_weight,
    inverse_dense,
    inverse_weight_apply_vector,
    weight_rank,
    weight_shape,
    weight_storage,
)


@dataclass(frozen=True)
class ReweightedSolution:
    """``W^{o-1} o tilde_aw``, stored as the weight plus low rank factors."""

    weight: object
    tilde_aw: LowRankPair

    @property
    def shape(self):
        return self.tilde_aw.shape

    @property
    def params(self):
        n, d = self.shape
        return (n + d) * self.tilde_aw.rank + weight_storage(self.weight)

    def to_dense(self):
        return inverse_dense(self.weight) * self.tilde_aw.to_dense()

    def entry(self, i, j):
        w = dense_weight(self.weight)[i, j]
        if w <= 0:
            return 0.0
        return float(self.tilde_aw.left[i] @ self.tilde_aw.right[:, j]) / w

    def matvec(self, x):
        if isinstance(self.weight, StructuredWeight):
            return inverse_weight_apply_vector(self.weight, self.tilde_aw, x)
        return self.to_dense() @ np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class CssSolution:
    """``W^{o-1} o ((W o A)|^S X)`` for a column subset ``S``."""

    columns: np.ndarray
    coeffs: np.ndarray
    weight: object
    selected: np.ndarray  # (W o A)|^S, n x |S|

    @property
    def shape(self):
        return (self.selected.shape[0], self.coeffs.shape[1])

    @property
    def params(self):
        return int(np.count_nonzero(self.selected)) + self.coeffs.size

    def reweighted(self):
        return self.selected @ self.coeffs

    def to_dense(self):
        return inverse_dense(self.weight) * self.reweighted()


@dataclass
class SolverReport:
    solver_name: str
    rank: int
    seed: int
    loss: float
    seconds: float
    iterations: int
    params: int
    generator: str = "numpy.PCG64"

    def __post_init__(self):
        if self.loss < 0 or self.seconds < 0:
            raise ParameterError("loss and seconds must be non-negative")


def _same_weight(a, b):
    if a is b:
        return True
    if weight_shape(a) != weight_shape(b):
        return False
    return np.array_equal(dense_weight(a), dense_weight(b))


def weighted_loss(A, W, B):
    """``sum_ij W_ij^2 (A_ij - B_ij)^2``.

    ``B`` may be a dense array, a :class:`LowRankPair`, a
    :class:`ReweightedSolution` or a :class:`CssSolution`. For the two
    reweighted kinds the loss is evaluated as ``||tilde - W o A||^2`` over the
    support of ``W``, which is the same quantity without dividing by ``W``.
    """
    A = as_matrix(A, "A")
    if tuple(weight_shape(W)) != A.shape:
        raise ParameterError(f"weight shape {weight_shape(W)} does not match {A.shape}")
    Wd = dense_weight(W)
    if isinstance(B, (ReweightedSolution, CssSolution)):
        if not _same_weight(B.weight, W):
            raise ParameterError("solution was built with a different weight matrix")
        tilde = B.tilde_aw.to_dense() if isinstance(B, ReweightedSolution) else B.reweighted()
        R = np.where(Wd > 0, tilde - Wd * A, 0.0)
        return float(np.sum(R * R))
    Bd = B.to_dense() if isinstance(B, LowRankPair) else as_matrix(B, "B")
    if Bd.shape != A.shape:
        raise ParameterError(f"shape mismatch: {Bd.shape} vs {A.shape}")
    R = Wd * (A - Bd)
    return float(np.sum(R * R))


def _target_rank(A, W, k, r):
    n, d = A.shape
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ParameterError(f"k must be a positive integer, got {k!r}")
    if r is None:
        r = weight_rank(W)
    if r < 1:
        raise DegenerateInputError("weight matrix is zero")
    if r * k > min(n, d):
        raise ParameterError(
            f"r*k = {r}*{k} = {r * k} exceeds min(n, d) = {min(n, d)}")
    return int(r * k)


def svd_w(A, W, k, r=None, method="exact", eps=0.1, seed=0):
    """Reweighted low rank approximation of ``A`` under weight ``W``.

    Computes a rank ``r*k`` approximation of ``W o A`` (exact SVD, or the
    seeded randomized range finder) and returns it with ``W`` so that entries
    read as ``tilde_aw / W``. ``r`` defaults to the weight's rank bound.
    """
    A = as_matrix(A, "A")
    if tuple(weight_shape(W)) != A.shape:
        raise ParameterError(f"weight shape {weight_shape(W)} does not match {A.shape}")
    Wd = dense_weight(W)
    if not np.any(Wd > 0):
        raise DegenerateInputError("weight matrix is zero")
    rank = _target_rank(A, W, k, r)
    M = Wd * A
    if method == "exact":
        pair = truncated_svd(M, rank).to_pair()
    elif method == "randomized":
        pair = randomized_lra(M, rank, eps=eps, seed=seed)
    else:
        raise ParameterError(f"unknown method {method!r}")
    return ReweightedSolution(W, pair)


def hadamard_rank_check(W, Ap):
    """Numerical rank of ``W o Ap``; bounded by ``rank(W) * rank(Ap)``."""
    W = as_matrix(W, "W")
    Ap = as_matrix(Ap, "Ap")
    if W.shape != Ap.shape:
        raise ParameterError(f"shape mismatch: {W.shape} vs {Ap.shape}")
    return numerical_rank(W * Ap)


def _best_rank_in_span(C, M, rank):
    """``X`` minimizing ``||C X - M||_F`` subject to ``rank(C X) <= rank``."""
    Q = scipy.linalg.orth(C, rcond=1e-12)
    B = Q.T @ M
    rank = min(rank, *B.shape)
    Ub, s, Vt = np.linalg.svd(B, full_matrices=False)
    proj = Q @ ((Ub[:, :rank] * s[:rank]) @ Vt[:rank])
    X, *_ = np.linalg.lstsq(C, proj, rcond=None)
    return X


def _adaptive_sampling_columns(M, c, rng):
    """Two rounds of squared-norm column sampling, the second on residuals."""
    d = M.shape[1]
    first = max(1, c // 2)
    norms = np.sum(M * M, axis=0)
    p = norms / norms.sum()
    chosen = list(rng.choice(d, size=min(first, np.count_nonzero(p)), replace=False, p=p))
    Q, _ = np.linalg.qr(M[:, chosen])
    resid = M - Q @ (Q.T @ M)
    rn = np.sum(resid * resid, axis=0)
    rn[chosen] = 0.0
    rest = c - len(chosen)
    if rest > 0 and rn.sum() > 0:
        take = min(rest, int(np.count_nonzero(rn)))
        chosen += list(rng.choice(d, size=take, replace=False, p=rn / rn.sum()))
    if len(chosen) < c:
        others = [j for j in np.argsort(-norms) if j not in set(chosen)]
        chosen += others[: c - len(chosen)]
    return np.array(chosen)


def css_column_count(r, k, eps, d):
    return min(d, math.ceil(2 * r * k / eps))


def css_wlra(A, W, k, eps=0.5, r=None, seed=0, selection="qr"):
    """Column subset selection on ``W o A``.

    Picks ``c = min(d, ceil(2 r k / eps))`` columns of ``W o A`` (column
    pivoted QR by default, or seeded adaptive norm sampling), then fits
    ``X`` so that ``(W o A)|^S X`` is the best rank ``r*k`` approximation of
    ``W o A`` inside the span of the chosen columns.
    """
    A = as_matrix(A, "A")
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    Wd = dense_weight(W)
    if Wd.shape != A.shape:
        raise ParameterError(f"weight shape {Wd.shape} does not match {A.shape}")
    if not np.any(Wd > 0):
        raise DegenerateInputError("weight matrix is zero")
    if r is None:
        r = weight_rank(W)
    rank = _target_rank(A, W, k, r)
    d = A.shape[1]
    c = css_column_count(r, k, eps, d)
    M = Wd * A
    if selection == "qr":
        _, _, piv = scipy.linalg.qr(M, mode="economic", pivoting=True)
        cols = piv[:c]
    elif selection == "adaptive":
        cols = _adaptive_sampling_columns(M, c, np.random.default_rng(seed))
    else:
        raise ParameterError(f"unknown selection {selection!r}")
    cols = np.sort(np.asarray(cols, dtype=np.int64))
    C = M[:, cols]
    X = _best_rank_in_span(C, M, rank)
    return CssSolution(cols, X, W, C)


def row_norm_probs(A):
    A = as_matrix(A, "A")
    sq = np.sum(A * A, axis=1)
    total = sq.sum()
    if total == 0:
        raise DegenerateInputError("row norm sampling needs a non-zero matrix")
    return sq / total


def sample_wlra(A, W, k, t, seed=0):
    """Row norm sampling followed by a per-row weighted least squares fit.

    Draws ``t`` row indices i.i.d. from :func:`row_norm_probs`, and writes each
    row of ``A`` as the combination of the sampled rows minimizing its weighted
    squared error. Returns the fitted matrix and the sampled indices. ``k`` is
    carried for reporting; use :func:`truncate` for a rank-``k`` version.
    """
    A = as_matrix(A, "A")
    if t < 1:
        raise ParameterError(f"t must be positive, got {t}")
    Wd = dense_weight(W)
    if Wd.shape != A.shape:
        raise ParameterError(f"weight shape {Wd.shape} does not match {A.shape}")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(A.shape[0], size=t, replace=True, p=row_norm_probs(A)))
    R = A[np.unique(idx)]
    approx = np.empty_like(A)
    for i in range(A.shape[0]):
        w = Wd[i]
        coef, *_ = np.linalg.lstsq((R * w).T, w * A[i], rcond=None)
        approx[i] = coef @ R
    return approx, idx


def truncate(B, k):
    """Plain rank-``k`` truncation of a dense approximation."""
    B = as_matrix(B)
    return truncated_svd(B, min(k, *B.shape)).to_pair()


def plain_svd_baseline(A, k):
    """Rank-``k`` SVD of ``A`` that ignores the weights."""
    return truncated_svd(A, k).to_pair()


def weight_surrogate(W, r):
    """``W`` itself if its rank is at most ``r``, else its rank-``r`` truncation clipped at 0.

    Lets the reweighting trick run with a chosen weight rank on weights that are
    only approximately low rank.
    """
    if weight_rank(W) <= r:
        return W
    Wd = dense_weight(W)
    return np.maximum(truncated_svd(Wd, r).reconstruct(), 0.0)


def refine_reweighted_em(A, W, sol, iters=25):
    """EM refinement of a reweighted solution inside its own class.

    With ``S = sol.weight`` (possibly a surrogate of ``W``) the loss of
    ``S^{o-1} o M`` equals ``sum (W/S)^2 (S o A - M)^2`` on the support of ``S``,
    plus a constant. EM on that problem, started from ``M = sol.tilde_aw``,
    never increases the loss. When ``S == W`` the weights are uniform on the
    support and the start is already optimal.

    Returns the refined :class:`ReweightedSolution` and the loss trace under ``W``.
    """
    A = as_matrix(A, "A")
    Wd = dense_weight(W)
    Sd = dense_weight(sol.weight)
    if Wd.shape != A.shape or Sd.shape != A.shape:
        raise ParameterError("weight shapes do not match A")
    if iters < 1:
        raise ParameterError(f"iters must be at least 1, got {iters}")
    rank = sol.tilde_aw.rank
    on = Sd > 0
    ratio2 = np.zeros_like(Wd)
    ratio2[on] = (Wd[on] / Sd[on]) ** 2
    top = ratio2.max()
    if top == 0:
        raise DegenerateInputError("weights vanish on the surrogate support")
    omega = ratio2 / top
    target = Sd * A
    base = float(np.sum((Wd[~on] * A[~on]) ** 2))

    def loss(M):
        R = target - M
        return float(np.sum(ratio2 * R * R)) + base

    M = sol.tilde_aw.to_dense()
    trace = [loss(M)]
    pair = sol.tilde_aw
    for _ in range(iters):
        X = omega * target + (1.0 - omega) * M
        pair = truncated_svd(X, rank).to_pair()
        M = pair.to_dense()
        trace.append(loss(M))
    return ReweightedSolution(sol.weight, pair), trace

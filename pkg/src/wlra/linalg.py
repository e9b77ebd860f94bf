"""Dense matrix primitives: exact truncated SVD, tail energies, randomized
low rank approximation and the Hadamard product.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Everything here
is a pure function of its inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ParameterError

# Singular values at or below this fraction of the largest are treated as zero.
RANK_RTOL = 1e-9


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-D float64 array (no copy when possible)."""
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim != 2:
        raise ParameterError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ParameterError(f"{name} must have positive dimensions, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains NaN or Inf")
    return arr


def _check_rank(M, k, allow_zero=False):
    lo = 0 if allow_zero else 1
    kmax = min(M.shape)
    if not isinstance(k, (int, np.integer)) or k < lo or k > kmax:
        raise ParameterError(f"rank k={k!r} outside [{lo}, {kmax}] for shape {M.shape}")
    return int(k)


@dataclass(frozen=True)
class LowRankPair:
    """A rank-at-most-k matrix stored as ``left @ right``."""

    left: np.ndarray  # n x k
    right: np.ndarray  # k x d

    def __post_init__(self):
        left = np.asarray(self.left, dtype=np.float64)
        right = np.asarray(self.right, dtype=np.float64)
        if left.ndim != 2 or right.ndim != 2:
            raise ParameterError("LowRankPair factors must be 2-D")
        if left.shape[1] != right.shape[0]:
            raise ParameterError(
                f"inner dimensions differ: left {left.shape}, right {right.shape}"
            )
        if left.shape[1] > min(left.shape[0], right.shape[1]):
            raise ParameterError(
                f"rank {left.shape[1]} exceeds min dimension of {left.shape[0]}x{right.shape[1]}"
            )
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    @property
    def rank(self):
        return self.left.shape[1]

    @property
    def shape(self):
        return (self.left.shape[0], self.right.shape[1])

    @property
    def params(self):
        return self.left.size + self.right.size

    def to_dense(self):
        return self.left @ self.right

    def matvec(self, x):
        return self.left @ (self.right @ x)


@dataclass(frozen=True)
class SvdResult:
    left_vectors: np.ndarray  # n x p, orthonormal columns
    singular_values: np.ndarray  # length p, non-increasing
    right_vectors: np.ndarray  # p x d, orthonormal rows

    def reconstruct(self):
        return (self.left_vectors * self.singular_values) @ self.right_vectors

    def to_pair(self):
        return LowRankPair(self.left_vectors * self.singular_values, self.right_vectors)


def _svd(M):
    try:
        return np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SVD did not converge for {M.shape} matrix with "
            f"Frobenius norm {np.linalg.norm(M):.3e}: {exc}"
        ) from exc


def singular_values(M):
    M = as_matrix(M)
    try:
        return np.linalg.svd(M, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge for {M.shape} matrix: {exc}") from exc


def truncated_svd(M, k):
    """Top-``k`` singular triples of ``M``.

    The reconstruction is the best rank-``k`` Frobenius approximation. Ties among
    equal singular values may return any orthonormal basis of the subspace.
    """
    M = as_matrix(M)
    k = _check_rank(M, k)
    U, s, Vt = _svd(M)
    return SvdResult(U[:, :k].copy(), s[:k].copy(), Vt[:k].copy())


def tail_energy(M, k):
    """``||M - M_k||_F^2``, the squared singular values beyond the ``k``-th."""
    M = as_matrix(M)
    k = _check_rank(M, k, allow_zero=True)
    if k == 0:
        return float(np.sum(M * M))
    s = singular_values(M)
    return float(np.sum(s[k:] ** 2))


def numerical_rank(M, rtol=RANK_RTOL):
    s = singular_values(M)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def randomized_lra(M, k, eps=0.1, seed=0, oversample=10, power_iters=2):
    """Rank-``k`` approximation by a Gaussian range finder with subspace iteration.

    Sketch width is ``k + oversample`` (capped at the smaller dimension); each
    power iteration re-orthonormalizes with QR. ``eps`` only feeds validation:
    the fixed oversampling and two passes reach a (1+eps) tail bound with high
    probability for the eps values this package uses.
    """
    M = as_matrix(M)
    k = _check_rank(M, k)
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    n, d = M.shape
    width = min(k + oversample, n, d)
    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((d, width))
    Q, _ = np.linalg.qr(M @ omega)
    for _ in range(power_iters):
        Z, _ = np.linalg.qr(M.T @ Q)
        Q, _ = np.linalg.qr(M @ Z)
    B = Q.T @ M
    Ub, s, Vt = _svd(B)
    left = (Q @ Ub[:, :k]) * s[:k]
    return LowRankPair(left, Vt[:k].copy())


def hadamard(P, Q):
    P = as_matrix(P, "P")
    Q = as_matrix(Q, "Q")
    if P.shape != Q.shape:
        raise ParameterError(f"shape mismatch: {P.shape} vs {Q.shape}")
    return P * Q


def random_low_rank(n, d, k, rng, nonneg=False):
    """Random ``n x d`` matrix of rank ``k`` (Gaussian, or uniform(0.5, 1.5) factors)."""
    if nonneg:
        return rng.uniform(0.5, 1.5, (n, k)) @ rng.uniform(0.5, 1.5, (k, d))
    return rng.standard_normal((n, k)) @ rng.standard_normal((k, d))

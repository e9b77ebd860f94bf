"""Iterative baselines: EM filling, greedy rank-one pursuit, and factored
gradient descent with adaptive moments.

Each returns the rank-``k`` factors together with the weighted loss trace
(initial loss first, then one value per iteration).
"""
from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, ParameterError
from .linalg import LowRankPair, as_matrix, truncated_svd
from .weights import dense_weight


def _prepare(A, W, k):
    A = as_matrix(A, "A")
    Wd = dense_weight(W)
    if Wd.shape != A.shape:
        raise ParameterError(f"weight shape {Wd.shape} does not match {A.shape}")
    if not np.any(Wd > 0):
        raise DegenerateInputError("weight matrix is zero")
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= min(A.shape):
        raise ParameterError(f"rank k={k!r} outside [1, {min(A.shape)}]")
    return A, Wd


def _loss(A, W2, B):
    R = A - B
    return float(np.sum(W2 * R * R))


def _init_dense(init, shape):
    if hasattr(init, "to_dense"):
        B = init.to_dense()
    else:
        B = as_matrix(init, "init")
    if B.shape != shape:
        raise ParameterError(f"init shape {B.shape} does not match {shape}")
    return B


def em_wlra(A, W, k, iters=25, init=None, seed=0):
    """EM filling on the effective weights ``W^2 / max(W^2)``.

    Each round fills ``X = What o A + (1 - What) o B`` and sets ``B`` to the
    rank-``k`` SVD of ``X``. Without ``init`` the first ``B`` is the rank-``k``
    SVD of ``What o A``. ``init`` may also be any object with ``to_dense()``
    (such as a reweighted solution); it only seeds the first fill.
    """
    A, Wd = _prepare(A, W, k)
    if iters < 1:
        raise ParameterError(f"iters must be at least 1, got {iters}")
    W2 = Wd * Wd
    What = W2 / W2.max()
    if init is None:
        B = truncated_svd(What * A, k).reconstruct()
    else:
        B = _init_dense(init, A.shape)
    trace = [_loss(A, W2, B)]
    svd = None
    for _ in range(iters):
        X = What * A + (1.0 - What) * B
        svd = truncated_svd(X, k)
        B = svd.reconstruct()
        trace.append(_loss(A, W2, B))
    return svd.to_pair(), trace


def greedy_wlra(A, W, k):
    """Greedy rank-one pursuit on the gradient of the weighted loss.

    For each of ``k`` rounds: take the top singular pair ``(u, v)`` of
    ``W^2 o (A - B)``, add the exactly line-searched multiple of ``u v^T``,
    then refit the right factor column by column with weighted least squares.
    Directions with no weight on their support are skipped in favor of the next
    singular pair.
    """
    A, Wd = _prepare(A, W, k)
    W2 = Wd * Wd
    n, d = A.shape
    U = np.zeros((n, 0))
    V = np.zeros((0, d))
    B = np.zeros_like(A)
    trace = [_loss(A, W2, B)]
    for _ in range(k):
        R = A - B
        G = W2 * R
        Ug, sg, Vgt = np.linalg.svd(G, full_matrices=False)
        added = False
        for p in range(sg.size):
            if sg[p] == 0:
                break
            u, v = Ug[:, p], Vgt[p]
            denom = u**2 @ W2 @ v**2
            if denom <= 0:
                continue
            alpha = (u @ G @ v) / denom
            U = np.column_stack([U, alpha * u])
            V = np.vstack([V, v])
            added = True
            break
        if not added:
            # residual is invisible to the weights: loss is already minimal
            trace.append(trace[-1])
            continue
        V = _refit_right(A, W2, U, V)
        B = U @ V
        trace.append(_loss(A, W2, B))
    if U.shape[1] == 0:
        U = np.zeros((n, 1))
        V = np.zeros((1, d))
    return LowRankPair(U, V), trace


def _refit_right(A, W2, U, V):
    """Per-column weighted least squares for ``V`` given ``U``."""
    Vnew = np.empty_like(V)
    for j in range(A.shape[1]):
        w = np.sqrt(W2[:, j])
        coef, *_ = np.linalg.lstsq(U * w[:, None], w * A[:, j], rcond=None)
        Vnew[:, j] = coef
    return Vnew


def wlra_gradients(A, W2, U, V):
    """Gradients of ``sum W^2 (A - U V)^2`` with respect to ``U`` and ``V``."""
    G = W2 * (A - U @ V)
    return -2.0 * G @ V.T, -2.0 * U.T @ G


def factored_gd_wlra(A, W, k, epochs=100, lr0=1.0, decay=0.7, decay_every=10,
                     seed=0, beta1=0.9, beta2=0.999, adam_eps=1e-8):
    """Minimize the weighted loss over ``U V`` by full-batch Adam steps.

    One epoch is one step. The learning rate is ``lr0 * decay**(epoch // decay_every)``.
    Factors start i.i.d. normal scaled by ``1/sqrt(k)``.
    """
    A, Wd = _prepare(A, W, k)
    if epochs < 1 or lr0 <= 0 or not 0 < decay <= 1 or decay_every < 1:
        raise ParameterError("epochs, lr0, decay and decay_every must be positive")
    W2 = Wd * Wd
    n, d = A.shape
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n, k)) / np.sqrt(k)
    V = rng.standard_normal((k, d)) / np.sqrt(k)
    params = [U, V]
    m = [np.zeros_like(U), np.zeros_like(V)]
    v = [np.zeros_like(U), np.zeros_like(V)]
    trace = [_loss(A, W2, U @ V)]
    for epoch in range(epochs):
        lr = lr0 * decay ** (epoch // decay_every)
        grads = wlra_gradients(A, W2, *params)
        t = epoch + 1
        for p, g in enumerate(grads):
            m[p] = beta1 * m[p] + (1 - beta1) * g
            v[p] = beta2 * v[p] + (1 - beta2) * g * g
            mhat = m[p] / (1 - beta1**t)
            vhat = v[p] / (1 - beta2**t)
            params[p] = params[p] - lr * mhat / (np.sqrt(vhat) + adam_eps)
        trace.append(_loss(A, W2, params[0] @ params[1]))
    return LowRankPair(*params), trace

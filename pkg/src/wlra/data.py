"""Synthetic instances and matrix file I/O.

Randomness comes from ``numpy.random.Generator(PCG64(seed))``; the generator
name is recorded in provenance sidecars so runs can be reproduced.

File formats
------------
CSV
    One matrix row per line, comma separated decimals written with 17
    significant digits. Lines starting with ``#`` are ignored.
WLRM binary
    ``b"WLRM"``, version byte ``1``, rows and columns as little-endian
    uint64, then ``rows*cols`` little-endian float64 values in row-major order.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericalError, ParameterError, ParseError
from .linalg import LowRankPair, as_matrix, singular_values
from .weights import LowRankWeight

GENERATOR_NAME = "numpy.PCG64"
VARIANCE_FLOOR = 1e-6
MAGIC = b"WLRM"
VERSION = 1
_HEADER = struct.Struct("<4sBQQ")
MAX_ELEMENTS = 2**40


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class MogSpec:
    n: int = 1000
    d: int = 50
    k: int = 5
    r: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.k < 1 or self.r < 1 or self.d < self.r:
            raise ParameterError(f"invalid mixture spec {self}")


@dataclass(frozen=True)
class PlantedSpec:
    n: int = 30
    d: int = 20
    k: int = 3
    r: int = 2
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.k <= min(self.n, self.d) or self.r < 1 or self.noise_sigma < 0:
            raise ParameterError(f"invalid planted spec {self}")
        if self.r > min(self.n, self.d):
            raise ParameterError(f"weight rank {self.r} exceeds dimensions")


def gen_mog(spec):
    """Samples from a uniform mixture of diagonal Gaussians, weighted by inverse variance.

    Component ``c`` splits the coordinates into ``r`` contiguous groups of size
    ``ceil(d/r)``; each group shares one variance drawn as ``g**4 + 1e-6`` with
    ``g`` standard normal. Means are standard normal. ``W[i, j]`` is one over the
    variance of coordinate ``j`` in the component of sample ``i``, so ``W`` has at
    most ``k`` distinct rows, each with at most ``r`` distinct values.

    Returns ``(A, W, labels)``.
    """
    rng = make_rng(spec.seed)
    n, d, k, r = spec.n, spec.d, spec.k, spec.r
    group = np.arange(d) // math.ceil(d / r)
    n_groups = group.max() + 1
    variances = rng.standard_normal((k, n_groups)) ** 4 + VARIANCE_FLOOR
    var = variances[:, group]  # k x d
    means = rng.standard_normal((k, d))
    labels = rng.integers(0, k, n)
    A = means[labels] + np.sqrt(var[labels]) * rng.standard_normal((n, d))
    W = 1.0 / var[labels]
    return A, W, labels


def gen_planted(spec):
    """Planted rank-``k`` signal under a positive rank-``r`` weight.

    ``W`` is the product of two uniform(0.5, 1.5) factors and ``A`` is a
    Gaussian rank-``k`` product plus ``noise_sigma`` times Gaussian noise.
    Returns ``(A, W, A_true)`` with ``W`` a :class:`LowRankWeight`.
    """
    rng = make_rng(spec.seed)
    n, d, k, r = spec.n, spec.d, spec.k, spec.r
    W = LowRankWeight(LowRankPair(rng.uniform(0.5, 1.5, (n, r)),
                                  rng.uniform(0.5, 1.5, (r, d))), r)
    A_true = LowRankPair(rng.standard_normal((n, k)), rng.standard_normal((k, d)))
    A = A_true.to_dense()
    if spec.noise_sigma > 0:
        A = A + spec.noise_sigma * rng.standard_normal((n, d))
    return A, W, A_true


def random_instance(seed, max_dim=60, max_r=3, max_k=5):
    """Small random problem with a non-negative rank-``r`` weight and full rank ``A``.

    ``n`` and ``d`` are drawn from ``[20, max_dim]``, ``r`` and ``k`` from
    ``[1, max_r]`` and ``[1, max_k]``. Returns ``(A, W, r, k)``.
    """
    rng = make_rng(seed)
    n, d = (int(x) for x in rng.integers(20, max_dim + 1, 2))
    r = int(rng.integers(1, max_r + 1))
    k = int(rng.integers(1, max_k + 1))
    W = rng.uniform(0.0, 1.0, (n, r)) @ rng.uniform(0.0, 1.0, (r, d))
    A = rng.standard_normal((n, d))
    return A, W, r, k


def first_singular_mass(W):
    s = singular_values(W)
    return float(s[0] ** 2 / np.sum(s**2))


def gen_fisher_like(n, d, noise_frac=0.05, seed=0):
    """Non-negative weight dominated by one outer product, like an importance matrix.

    ``W = u v^T + noise_frac * |G|`` with ``u``, ``v`` and ``G`` entrywise absolute
    Gaussians. For ``noise_frac <= 0.05`` the top singular value must carry at
    least 95% of the squared Frobenius mass, else :class:`NumericalError`.
    """
    if not 0 <= noise_frac <= 0.3:
        raise ParameterError(f"noise_frac must lie in [0, 0.3], got {noise_frac}")
    rng = make_rng(seed)
    u = np.abs(rng.standard_normal(n))
    v = np.abs(rng.standard_normal(d))
    W = np.outer(u, v) + noise_frac * np.abs(rng.standard_normal((n, d)))
    if noise_frac <= 0.05 and first_singular_mass(W) < 0.95:
        raise NumericalError("generated weight has less than 95% mass in its top singular value")
    return W


def write_matrix(path, M, fmt="binary"):
    M = as_matrix(M)
    path = Path(path)
    if fmt == "binary":
        body = np.ascontiguousarray(M, dtype="<f8").tobytes()
        path.write_bytes(_HEADER.pack(MAGIC, VERSION, M.shape[0], M.shape[1]) + body)
    elif fmt == "csv":
        lines = [",".join(f"{x:.17g}" for x in row) for row in M]
        path.write_text("\n".join(lines) + "\n")
    else:
        raise ParameterError(f"unknown format {fmt!r}")
    return path


def _read_csv(path):
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                row = [float(tok) for tok in text.split(",")]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(f"{path}:{lineno}: expected {width} values, found {len(row)}")
            rows.append(row)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    M = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(M)):
        raise ParseError(f"{path}: non-finite value")
    return M


def _read_binary(path):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ParseError(f"{path}: offset {len(raw)}: truncated header")
    magic, version, n, d = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ParseError(f"{path}: offset 0: bad magic {magic!r}")
    if version != VERSION:
        raise ParseError(f"{path}: offset 4: unsupported version {version}")
    if n == 0 or d == 0 or n * d > MAX_ELEMENTS:
        raise ParameterError(f"{path}: dimensions {n}x{d} out of range")
    expected = _HEADER.size + 8 * n * d
    if len(raw) != expected:
        raise ParseError(f"{path}: offset {len(raw)}: payload is {len(raw) - _HEADER.size} "
                         f"bytes, header declares {8 * n * d}")
    M = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n, d).astype(np.float64)
    if not np.all(np.isfinite(M)):
        raise ParseError(f"{path}: non-finite value in payload")
    return M


def read_matrix(path, fmt=None):
    """Read a matrix; ``fmt`` defaults to sniffing the WLRM magic."""
    path = Path(path)
    if fmt is None:
        with open(path, "rb") as fh:
            fmt = "binary" if fh.read(4) == MAGIC else "csv"
    if fmt == "binary":
        return _read_binary(path)
    if fmt == "csv":
        return _read_csv(path)
    raise ParameterError(f"unknown format {fmt!r}")


def matrix_io(path, mode, fmt="binary", matrix=None):
    """Single entry point: ``mode='read'`` returns the matrix, ``'write'`` stores it."""
    if mode == "read":
        return read_matrix(path, fmt)
    if mode == "write":
        if matrix is None:
            raise ParameterError("write mode needs a matrix")
        write_matrix(path, matrix, fmt)
        return as_matrix(matrix)
    raise ParameterError(f"mode must be 'read' or 'write', got {mode!r}")

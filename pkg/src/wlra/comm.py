"""Two-party communication game for weighted low rank approximation.

Upper bound: Alice runs column subset selection on ``W o A`` and sends the
chosen columns of ``A`` (sparse, as position/value pairs) together with the
quantized coefficient matrix ``X``. Bob, who knows ``W``, rebuilds
``W^{o-1} o ((W o A)|^S X)``.

Lower bound instances: a block diagonal 0/1 mask with ``r`` all-ones blocks,
and ``A`` built from a random ``sr x k`` binary secret so that the optimal
weighted loss is zero. Any solution with finite approximation ratio must
reproduce ``A`` on the mask, which reveals the secret.

Wire format of an encoded solution
----------------------------------
``b"WLRC"``, a version byte, then ``n``, ``d``, ``|S|``, ``bits_per_entry`` as
little-endian uint32. The payload follows, packed most significant bit first
and zero padded to a whole byte:

* per selected column: its index (``bitlen(d-1)`` bits), its non-zero count
  (``bitlen(n)`` bits), then each non-zero as position (``bitlen(n-1)`` bits)
  and value;
* the ``|S| x d`` quantized coefficients in row-major order.

Values use ``bits_per_entry`` bits in sign-magnitude form. Coefficients are
stored as integer multiples of ``1/(n d)^2``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ParseError, RecoveryError
from .linalg import as_matrix
from .data import make_rng
from .solvers import CssSolution, ReweightedSolution, weighted_loss
from .weights import RankOneBlock, StructuredWeight

MAGIC = b"WLRC"
VERSION = 1
_HEADER = struct.Struct("<4sBIIII")
HEADER_BITS = 8 * _HEADER.size
MAX_ENTRY_BITS = 64


def _bitlen(x):
    return max(1, int(x).bit_length())


def quantization_scale(n, d):
    return float((n * d) ** 2)


def magnitude_bound(n, d):
    """Largest admissible ``|A_ij|``, a fixed polynomial in ``n d``."""
    return (n * d) ** 3


class _BitWriter:
    def __init__(self):
        self.chunks = []
        self.nbits = 0

    def write(self, value, width):
        value = int(value)
        if value < 0 or value >= 1 << width:
            raise ParameterError(f"value {value} does not fit in {width} bits")
        self.chunks.append((value, width))
        self.nbits += width

    def write_signed(self, value, width):
        value = int(value)
        self.write(1 if value < 0 else 0, 1)
        self.write(abs(value), width - 1)

    def to_bytes(self):
        acc = 0
        for value, width in self.chunks:
            acc = (acc << width) | value
        pad = (-self.nbits) % 8
        acc <<= pad
        return acc.to_bytes((self.nbits + pad) // 8, "big")


class _BitReader:
    def __init__(self, data):
        self.acc = int.from_bytes(data, "big")
        self.total = 8 * len(data)
        self.pos = 0

    def read(self, width):
        if self.pos + width > self.total:
            raise ParseError(f"bit offset {self.pos}: payload ends early")
        shift = self.total - self.pos - width
        self.pos += width
        return (self.acc >> shift) & ((1 << width) - 1)

    def read_signed(self, width):
        sign = self.read(1)
        mag = self.read(width - 1)
        return -mag if sign else mag


@dataclass(frozen=True, eq=False)
class EncodedSolution:
    n: int
    d: int
    column_indices: tuple
    column_payload: tuple  # per column: (positions, values) int64 arrays
    coeff_payload: np.ndarray  # |S| x d integers
    bits_per_entry: int
    total_bits: int

    @property
    def header_bits(self):
        return HEADER_BITS

    @property
    def payload_bits(self):
        return self.total_bits - HEADER_BITS

    def same_as(self, other):
        return (
            (self.n, self.d, tuple(self.column_indices), self.bits_per_entry, self.total_bits)
            == (other.n, other.d, tuple(other.column_indices), other.bits_per_entry,
                other.total_bits)
            and len(self.column_payload) == len(other.column_payload)
            and all(np.array_equal(p, q) and np.array_equal(v, w)
                    for (p, v), (q, w) in zip(self.column_payload, other.column_payload))
            and np.array_equal(self.coeff_payload, other.coeff_payload)
        )

    def columns_dense(self):
        """The transmitted columns of ``A`` as an ``n x |S|`` array."""
        C = np.zeros((self.n, len(self.column_indices)))
        for t, (pos, val) in enumerate(self.column_payload):
            C[pos, t] = val
        return C

    def coeffs(self):
        return self.coeff_payload / quantization_scale(self.n, self.d)

    def to_bytes(self):
        w = _BitWriter()
        _write_payload(w, self)
        header = _HEADER.pack(MAGIC, VERSION, self.n, self.d,
                              len(self.column_indices), self.bits_per_entry)
        return header + w.to_bytes()


def _field_widths(n, d):
    return _bitlen(d - 1), _bitlen(n), _bitlen(n - 1)


def _write_payload(w, enc):
    idx_bits, cnt_bits, pos_bits = _field_widths(enc.n, enc.d)
    b = enc.bits_per_entry
    for j, (pos, val) in zip(enc.column_indices, enc.column_payload):
        w.write(j, idx_bits)
        w.write(pos.size, cnt_bits)
        for p, v in zip(pos, val):
            w.write(p, pos_bits)
            w.write_signed(v, b)
    for v in enc.coeff_payload.ravel():
        w.write_signed(v, b)


def count_bits(n, d, nnz_per_column, bits_per_entry):
    """Bit total for a message with the given column sparsities (header included)."""
    idx_bits, cnt_bits, pos_bits = _field_widths(n, d)
    nnz = np.asarray(nnz_per_column, dtype=np.int64)
    per_col = idx_bits + cnt_bits + nnz * (pos_bits + bits_per_entry)
    return int(HEADER_BITS + per_col.sum() + nnz.size * d * bits_per_entry)


def encode_css(A, sol, n=None, d=None):
    """Encode the columns of integer ``A`` picked by ``sol`` plus its quantized ``X``."""
    A = as_matrix(A, "A")
    n = A.shape[0] if n is None else n
    d = A.shape[1] if d is None else d
    if A.shape != (n, d):
        raise ParameterError(f"A has shape {A.shape}, expected {(n, d)}")
    if not np.array_equal(A, np.round(A)):
        raise ParameterError("the communication game needs an integer matrix A")
    bound = magnitude_bound(n, d)
    if np.abs(A).max() > bound:
        raise ParameterError(f"|A| exceeds the magnitude bound (nd)^3 = {bound}")
    cols = [int(j) for j in sol.columns]
    if len(set(cols)) != len(cols) or any(not 0 <= j < d for j in cols):
        raise ParameterError("column indices must be distinct and in range")
    X = np.asarray(sol.coeffs, dtype=np.float64)
    if X.shape != (len(cols), d):
        raise ParameterError(f"coefficients have shape {X.shape}, expected {(len(cols), d)}")
    Xq = np.round(X * quantization_scale(n, d))
    if Xq.size and np.abs(Xq).max() >= 2.0**62:
        raise ParameterError("quantized coefficients overflow 62 bits")
    Xq = Xq.astype(np.int64)

    payload = []
    for j in cols:
        pos = np.flatnonzero(A[:, j]).astype(np.int64)
        payload.append((pos, A[pos, j].astype(np.int64)))
    mags = [int(np.abs(v).max()) for _, v in payload if v.size]
    if Xq.size:
        mags.append(int(np.abs(Xq).max()))
    bits = 1 + _bitlen(max(mags, default=0))
    if bits > MAX_ENTRY_BITS:
        raise ParameterError(f"entries need {bits} bits, more than {MAX_ENTRY_BITS}")
    total = count_bits(n, d, [p.size for p, _ in payload], bits)
    return EncodedSolution(n, d, tuple(cols), tuple(payload), Xq, bits, total)


def decode_css(data):
    """Parse the byte stream written by :meth:`EncodedSolution.to_bytes`."""
    if len(data) < _HEADER.size:
        raise ParseError("byte offset 0: truncated header")
    magic, version, n, d, c, b = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ParseError(f"byte offset 0: bad magic {magic!r}")
    if version != VERSION:
        raise ParseError(f"byte offset 4: unsupported version {version}")
    if not 2 <= b <= MAX_ENTRY_BITS or n < 1 or d < 1:
        raise ParseError("byte offset 5: header fields out of range")
    r = _BitReader(data[_HEADER.size:])
    idx_bits, cnt_bits, pos_bits = _field_widths(n, d)
    cols, payload = [], []
    for _ in range(c):
        cols.append(r.read(idx_bits))
        cnt = r.read(cnt_bits)
        pos = np.empty(cnt, np.int64)
        val = np.empty(cnt, np.int64)
        for t in range(cnt):
            pos[t] = r.read(pos_bits)
            val[t] = r.read_signed(b)
        payload.append((pos, val))
    Xq = np.array([r.read_signed(b) for _ in range(c * d)], dtype=np.int64).reshape(c, d)
    total = HEADER_BITS + r.pos
    if (r.total - r.pos) >= 8:
        raise ParseError(f"bit offset {r.pos}: trailing data after payload")
    return EncodedSolution(n, d, tuple(cols), tuple(payload), Xq, b, total)


@dataclass(frozen=True)
class BlockDiagInstance:
    n: int
    r: int
    s: int
    k: int
    W: StructuredWeight
    A: np.ndarray
    a_dense: np.ndarray

    @property
    def block(self):
        return self.n // self.r

    def planted_positions(self):
        """Row and column indices in ``A`` that hold ``a_dense``, in its row-major order."""
        m = self.block
        q = np.arange(self.s * self.r)
        j, i = np.divmod(q, self.s)
        rows = np.repeat(j * m + i, self.k)
        cols = (np.repeat(j * m, self.k) + np.tile(np.arange(self.k), q.size))
        return rows, cols

    def witness(self):
        """A rank-``k`` matrix with zero weighted loss (``A`` itself)."""
        return self.A.copy()


def block_diagonal_mask(n, r):
    if r < 1 or n % r:
        raise ParameterError(f"r={r} must divide n={n}")
    m = n // r
    blocks = tuple(RankOneBlock.ones(np.arange(j * m, (j + 1) * m),
                                     np.arange(j * m, (j + 1) * m)) for j in range(r))
    return StructuredWeight(n, n, blocks=blocks)


def build_lb_instance(n, r, s, k, seed=0):
    """Block diagonal lower-bound instance around a random ``sr x k`` binary secret.

    The secret is padded to an ``n x n/r`` matrix (each run of ``s`` rows padded
    to ``n/r`` rows, ``k`` columns padded to ``n/r``) and ``A`` is ``r``
    horizontal copies of it.
    """
    W = block_diagonal_mask(n, r)
    m = n // r
    if not (1 <= s <= m and 1 <= k <= m):
        raise ParameterError(f"need 1 <= s, k <= n/r = {m}; got s={s}, k={k}")
    rng = make_rng(seed)
    a_dense = rng.integers(0, 2, (s * r, k)).astype(np.float64)
    pad = np.zeros((n, m))
    for j in range(r):
        pad[j * m: j * m + s, :k] = a_dense[j * s: (j + 1) * s]
    A = np.hstack([pad] * r)
    return BlockDiagInstance(n, r, s, k, W, A, a_dense)


def scramble_off_support(inst, seed=0, magnitude=10):
    """Copy of ``inst`` with random integers written where the mask is zero.

    The weighted problem is unchanged (those entries carry no weight), but a
    solver that ignores ``W`` now sees a full rank matrix.
    """
    rng = make_rng(seed)
    mask = inst.W.to_dense() > 0
    noise = rng.integers(-magnitude, magnitude + 1, inst.A.shape).astype(np.float64)
    A = np.where(mask, inst.A, noise)
    return BlockDiagInstance(inst.n, inst.r, inst.s, inst.k, inst.W, A, inst.a_dense)


def _evaluate(approx, shape):
    if isinstance(approx, (ReweightedSolution, CssSolution)) or hasattr(approx, "to_dense"):
        return approx.to_dense()
    M = as_matrix(approx, "approx")
    if M.shape != shape:
        raise ParameterError(f"approximation has shape {M.shape}, expected {shape}")
    return M


def recover_secret(approx, inst):
    """Read the planted binary secret back from an approximation.

    Raises :class:`RecoveryError` if the weighted loss is 1/4 or more, since a
    supported entry could then be off by 1/2 and round the wrong way.
    """
    if isinstance(approx, (ReweightedSolution, CssSolution)):
        loss = weighted_loss(inst.A, inst.W, approx)
    else:
        loss = weighted_loss(inst.A, inst.W, _evaluate(approx, inst.A.shape))
    if not loss < 0.25:
        raise RecoveryError(f"weighted loss {loss:.4g} is not below 1/4")
    M = _evaluate(approx, inst.A.shape)
    rows, cols = inst.planted_positions()
    vals = M[rows, cols].reshape(inst.s * inst.r, inst.k)
    return (vals >= 0.5).astype(np.float64)


def build_sparse_column_instance(n, d, s, r, seed=0, max_value=3):
    """Integer ``A`` with exactly ``s`` non-zeros per column and an integer rank-``r`` weight.

    Used to measure how the message grows with column sparsity when ``d <= s``.
    """
    if not 1 <= s <= n or r < 1:
        raise ParameterError(f"need 1 <= s <= n and r >= 1, got s={s}, n={n}, r={r}")
    rng = make_rng(seed)
    A = np.zeros((n, d))
    for j in range(d):
        rows = rng.choice(n, s, replace=False)
        A[rows, j] = rng.integers(1, max_value + 1, s) * rng.choice([-1, 1], s)
    W = rng.integers(1, 3, (n, r)).astype(np.float64) @ rng.integers(1, 3, (r, d)).astype(np.float64)
    return A, W

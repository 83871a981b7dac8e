"""Dense quaternion tensors stored as four real component planes.

A tensor of dims ``(I1, ..., IN)`` keeps its data in a float64 array of shape
``(4, I1, ..., IN)`` holding the ``w, x, y, z`` planes. All reshapes of the
spatial axes are column-major (first index fastest), so the linear position
of an entry equals its multi-index. Index arguments of the public functions
are one-based; everything inside is zero-based.
"""

from __future__ import annotations

import struct
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .quatcore import Quaternion


class QuaternionTensor:
    """Order-N quaternion array; order-2 instances serve as quaternion matrices."""

    __slots__ = ("data",)

    def __init__(self, data):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim < 2 or data.shape[0] != 4:
            raise ValueError(f"expected component axis of length 4 first, got shape {data.shape}")
        self.data = data

    # construction -----------------------------------------------------------

    @classmethod
    def from_components(cls, w=None, x=None, y=None, z=None) -> QuaternionTensor:
        planes = [w, x, y, z]
        ref = next(np.asarray(p) for p in planes if p is not None)
        return cls(np.stack([np.zeros(ref.shape) if p is None else np.asarray(p, float) for p in planes]))

    @classmethod
    def from_complex(cls, a1: np.ndarray, a2: np.ndarray) -> QuaternionTensor:
        """Build ``a1 + a2 j`` from complex arrays ``a1 = w + x i``, ``a2 = y + z i``."""
        return cls(np.stack([a1.real, a1.imag, a2.real, a2.imag]))

    @classmethod
    def zeros(cls, dims: Sequence[int]) -> QuaternionTensor:
        return cls(np.zeros((4, *dims)))

    @classmethod
    def random(cls, dims: Sequence[int], rng: np.random.Generator, real: bool = False) -> QuaternionTensor:
        data = rng.standard_normal((4, *dims))
        if real:
            data[1:] = 0.0
        return cls(data)

    @classmethod
    def identity(cls, n: int) -> QuaternionTensor:
        data = np.zeros((4, n, n))
        data[0] = np.eye(n)
        return cls(data)

    # shape ------------------------------------------------------------------

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape[1:]

    @property
    def order(self) -> int:
        return self.data.ndim - 1

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.dims

    @property
    def w(self) -> np.ndarray:
        return self.data[0]

    @property
    def x(self) -> np.ndarray:
        return self.data[1]

    @property
    def y(self) -> np.ndarray:
        return self.data[2]

    @property
    def z(self) -> np.ndarray:
        return self.data[3]

    def to_complex(self) -> tuple[np.ndarray, np.ndarray]:
        d = self.data
        return d[0] + 1j * d[1], d[2] + 1j * d[3]

    def reshape(self, dims: Sequence[int]) -> QuaternionTensor:
        """Column-major reshape of the spatial axes."""
        return QuaternionTensor(self.data.reshape((4, *dims), order="F"))

    def flat(self) -> np.ndarray:
        """Entries as a ``(4, size)`` array in column-major order."""
        return self.data.reshape(4, -1, order="F")

    def entry(self, indices: Sequence[int]) -> Quaternion:
        """Entry at a one-based multi-index."""
        idx = _check_indices(indices, self.dims)
        return Quaternion(*(float(v) for v in self.data[(slice(None), *idx)]))

    # arithmetic -------------------------------------------------------------

    def __add__(self, other: QuaternionTensor) -> QuaternionTensor:
        _same_dims(self, other)
        return QuaternionTensor(self.data + other.data)

    def __sub__(self, other: QuaternionTensor) -> QuaternionTensor:
        _same_dims(self, other)
        return QuaternionTensor(self.data - other.data)

    def __neg__(self) -> QuaternionTensor:
        return QuaternionTensor(-self.data)

    def __mul__(self, scalar: float) -> QuaternionTensor:
        return QuaternionTensor(self.data * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> QuaternionTensor:
        return QuaternionTensor(self.data / scalar)

    def __matmul__(self, other: QuaternionTensor) -> QuaternionTensor:
        from .quatmat import left_mul

        return left_mul(self, other)

    def conj(self) -> QuaternionTensor:
        return QuaternionTensor(self.data * _CONJ_SIGN.reshape((4,) + (1,) * self.order))

    @property
    def T(self) -> QuaternionTensor:
        if self.order != 2:
            raise ValueError("transpose is defined for quaternion matrices only")
        return QuaternionTensor(self.data.transpose(0, 2, 1))

    @property
    def H(self) -> QuaternionTensor:
        return self.conj().T

    def norm(self) -> float:
        return frobenius_norm(self)

    def copy(self) -> QuaternionTensor:
        return QuaternionTensor(self.data.copy())

    def is_pure(self) -> bool:
        return bool(np.all(self.data[0] == 0.0))

    def allclose(self, other: QuaternionTensor, atol: float = 1e-12, rtol: float = 0.0) -> bool:
        return self.dims == other.dims and bool(np.allclose(self.data, other.data, atol=atol, rtol=rtol))

    def __repr__(self) -> str:
        return f"QuaternionTensor(dims={self.dims})"


QuaternionMatrix = QuaternionTensor

_CONJ_SIGN = np.array([1.0, -1.0, -1.0, -1.0])


def _same_dims(a: QuaternionTensor, b: QuaternionTensor) -> None:
    if a.dims != b.dims:
        raise ValueError(f"shape mismatch: {a.dims} vs {b.dims}")


def _check_indices(indices: Sequence[int], dims: Sequence[int]) -> tuple[int, ...]:
    if len(indices) != len(dims):
        raise IndexError(f"expected {len(dims)} indices, got {len(indices)}")
    for i, n in zip(indices, dims):
        if not 1 <= i <= n:
            raise IndexError(f"index {tuple(indices)} out of range for dims {tuple(dims)}")
    return tuple(int(i) - 1 for i in indices)


def _check_mode(k: int, lo: int, hi: int, what: str) -> None:
    if not lo <= k <= hi:
        raise ValueError(f"{what}={k} outside [{lo}, {hi}]")


def multi_index(indices: Sequence[int], dims: Sequence[int]) -> int:
    """One-based column-major linear index ``i1 + (i2-1) I1 + (i3-1) I1 I2 + ...``."""
    _check_indices(indices, dims)
    pos, stride = 1, 1
    for i, n in zip(indices, dims):
        pos += (i - 1) * stride
        stride *= n
    return pos


# unfoldings -----------------------------------------------------------------


@lru_cache(maxsize=256)
def _grouping_map(dims: tuple[int, ...], row_modes: tuple[int, ...], col_modes: tuple[int, ...]):
    """Matrix position of every tensor entry when modes are grouped into rows/cols.

    Row and column indices are multi-indices over ``row_modes`` and
    ``col_modes`` in the listed order (first listed mode fastest). Returns
    ``(position, rows, cols)`` where ``position[t]`` is the column-major
    matrix position of the tensor entry with column-major linear index ``t``.
    """
    idx = np.indices(dims).reshape(len(dims), -1, order="F")
    p = np.zeros(idx.shape[1], dtype=np.int64)
    stride = 1
    for m in row_modes:
        p += idx[m] * stride
        stride *= dims[m]
    rows = stride
    q = np.zeros_like(p)
    stride = 1
    for m in col_modes:
        q += idx[m] * stride
        stride *= dims[m]
    pos = p + q * rows
    pos.setflags(write=False)
    return pos, rows, stride


def _unfold(t: QuaternionTensor, row_modes, col_modes) -> QuaternionTensor:
    pos, rows, cols = _grouping_map(t.dims, tuple(row_modes), tuple(col_modes))
    out = np.empty((4, rows * cols))
    out[:, pos] = t.flat()
    return QuaternionTensor(out.reshape(4, rows, cols, order="F"))


def _fold(m: QuaternionTensor, dims, row_modes, col_modes) -> QuaternionTensor:
    dims = tuple(int(d) for d in dims)
    pos, rows, cols = _grouping_map(dims, tuple(row_modes), tuple(col_modes))
    if m.dims != (rows, cols):
        raise ValueError(f"matrix of shape {m.dims} cannot fold to {dims}")
    flat = m.data.reshape(4, -1, order="F")[:, pos]
    return QuaternionTensor(flat.reshape((4, *dims), order="F"))


def _k_modes(n_modes: int, k: int):
    return tuple(range(k)), tuple(range(k, n_modes))


def _mode_k_modes(n_modes: int, k: int):
    k0 = k - 1
    return (k0,), tuple(range(k0 + 1, n_modes)) + tuple(range(k0))


def _classical_modes(n_modes: int, k: int):
    k0 = k - 1
    return (k0,), tuple(m for m in range(n_modes) if m != k0)


def _circular_modes(n_modes: int, k: int, l: int):
    cyc = [(k - 1 + s) % n_modes for s in range(n_modes)]
    return tuple(cyc[:l]), tuple(cyc[l:])


def k_unfolding(t: QuaternionTensor, k: int) -> QuaternionTensor:
    """``T<k>``: modes 1..k index rows, modes k+1..N index columns."""
    _check_mode(k, 1, t.order - 1, "k")
    return _unfold(t, *_k_modes(t.order, k))


def fold_k(m: QuaternionTensor, k: int, dims: Sequence[int]) -> QuaternionTensor:
    _check_mode(k, 1, len(dims) - 1, "k")
    return _fold(m, dims, *_k_modes(len(dims), k))


def mode_k_unfolding(t: QuaternionTensor, k: int) -> QuaternionTensor:
    """``T[k]``: columns run over ``(i_{k+1}, ..., i_N, i_1, ..., i_{k-1})``."""
    _check_mode(k, 1, t.order, "k")
    return _unfold(t, *_mode_k_modes(t.order, k))


def fold_mode_k(m: QuaternionTensor, k: int, dims: Sequence[int]) -> QuaternionTensor:
    _check_mode(k, 1, len(dims), "k")
    return _fold(m, dims, *_mode_k_modes(len(dims), k))


def classical_mode_k_unfolding(t: QuaternionTensor, k: int) -> QuaternionTensor:
    """``T(k)``: columns run over ``(i_1, ..., i_{k-1}, i_{k+1}, ..., i_N)``."""
    _check_mode(k, 1, t.order, "k")
    return _unfold(t, *_classical_modes(t.order, k))


def fold_classical_mode_k(m: QuaternionTensor, k: int, dims: Sequence[int]) -> QuaternionTensor:
    _check_mode(k, 1, len(dims), "k")
    return _fold(m, dims, *_classical_modes(len(dims), k))


def circular_unfolding(t: QuaternionTensor, k: int, l: int) -> QuaternionTensor:
    """``T{k,l}``: rows over the ``l`` cyclic modes starting at ``k``, columns over the rest.

    Mode positions wrap modulo N, so the columns run over modes
    ``k+l, k+l+1, ..., k-1`` taken cyclically.
    """
    _check_mode(k, 1, t.order, "k")
    _check_mode(l, 1, t.order - 1, "l")
    return _unfold(t, *_circular_modes(t.order, k, l))


def fold_circular(m: QuaternionTensor, k: int, l: int, dims: Sequence[int]) -> QuaternionTensor:
    _check_mode(k, 1, len(dims), "k")
    _check_mode(l, 1, len(dims) - 1, "l")
    return _fold(m, dims, *_circular_modes(len(dims), k, l))


def permute_cyclic(t: QuaternionTensor, n: int) -> QuaternionTensor:
    """``T^{P_n}`` with dims ``(I_n, ..., I_N, I_1, ..., I_{n-1})``."""
    _check_mode(n, 1, t.order, "n")
    axes = [1 + (n - 1 + s) % t.order for s in range(t.order)]
    return QuaternionTensor(np.transpose(t.data, [0, *axes]))


# inner product and norms ------------------------------------------------------


def inner_product(a: QuaternionTensor, b: QuaternionTensor) -> Quaternion:
    """``sum conj(a) * b`` over all entries."""
    _same_dims(a, b)
    aw, ax, ay, az = (c.ravel() for c in a.data)
    bw, bx, by, bz = (c.ravel() for c in b.data)
    # conj(a) = (aw, -ax, -ay, -az)
    return Quaternion(
        float(aw @ bw + ax @ bx + ay @ by + az @ bz),
        float(aw @ bx - ax @ bw - ay @ bz + az @ by),
        float(aw @ by + ax @ bz - ay @ bw - az @ bx),
        float(aw @ bz - ax @ by + ay @ bx - az @ bw),
    )


def frobenius_norm(a: QuaternionTensor) -> float:
    return float(np.sqrt(np.sum(a.data * a.data)))


# QTNS binary format --------------------------------------------------------------
#
# magic b"QTNS", u32 version, u32 order N, N x u64 dims, then the entries in
# column-major order, each as four little-endian float64 (w, x, y, z).

QTNS_MAGIC = b"QTNS"
QTNS_VERSION = 1


def to_qtns_bytes(t: QuaternionTensor) -> bytes:
    head = QTNS_MAGIC + struct.pack(f"<II{t.order}Q", QTNS_VERSION, t.order, *t.dims)
    # one row of (w, x, y, z) per entry, entries in column-major order
    body = t.data.reshape(4, -1, order="F").T.astype("<f8")
    return head + body.tobytes()


def from_qtns_bytes(raw: bytes) -> QuaternionTensor:
    if raw[:4] != QTNS_MAGIC:
        raise ValueError("not a QTNS file (bad magic)")
    if len(raw) < 12:
        raise ValueError("truncated QTNS header")
    version, order = struct.unpack_from("<II", raw, 4)
    if version != QTNS_VERSION:
        raise ValueError(f"unsupported QTNS version {version}")
    off = 12 + 8 * order
    if len(raw) < off:
        raise ValueError("truncated QTNS header")
    dims = struct.unpack_from(f"<{order}Q", raw, 12)
    size = int(np.prod(dims, dtype=np.int64))
    if len(raw) != off + 32 * size:
        raise ValueError(f"QTNS payload holds {len(raw) - off} bytes, expected {32 * size}")
    body = np.frombuffer(raw, dtype="<f8", offset=off).reshape(size, 4).T
    return QuaternionTensor(body.reshape((4, *dims), order="F").astype(float))


def save_qtns(path: str | Path, t: QuaternionTensor) -> None:
    Path(path).write_bytes(to_qtns_bytes(t))


def load_qtns(path: str | Path) -> QuaternionTensor:
    return from_qtns_bytes(Path(path).read_bytes())

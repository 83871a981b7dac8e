"""Quaternion tensor left ring (QTLR) decomposition.

An order-N tensor is represented by cores ``Z_n`` of shape
``r_n x I_n x r_{n+1}`` (with ``r_{N+1} = r_1``) through

    T(i_1, ..., i_N) = Tr(Z_1(i_1) ._L Z_2(i_2) ._L ... ._L Z_N(i_N)),

where ``Z_n(i)`` is the lateral slice ``Z_n[:, i, :]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .quatcore import Quaternion
from .quatmat import left_mul, right_mul, scale_columns, truncated_qsvd
from .quattensor import QuaternionTensor, _check_indices, frobenius_norm, k_unfolding, load_qtns, save_qtns


@dataclass
class QTLRCores:
    cores: list[QuaternionTensor]

    def __post_init__(self):
        if not self.cores:
            raise ValueError("need at least one core")
        for n, z in enumerate(self.cores):
            if z.order != 3:
                raise ValueError(f"core {n + 1} has order {z.order}, expected 3")
            nxt = self.cores[(n + 1) % len(self.cores)]
            if z.dims[2] != nxt.dims[0]:
                raise ValueError(
                    f"core {n + 1} of shape {z.dims} does not chain into core "
                    f"{(n + 1) % len(self.cores) + 1} of shape {nxt.dims}"
                )

    @property
    def order(self) -> int:
        return len(self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(z.dims[0] for z in self.cores)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(z.dims[1] for z in self.cores)

    def num_params(self) -> int:
        return sum(z.size for z in self.cores)

    @classmethod
    def random(cls, dims: Sequence[int], ranks: Sequence[int], rng: np.random.Generator, real: bool = False):
        n = len(dims)
        return cls([
            QuaternionTensor.random((ranks[i], dims[i], ranks[(i + 1) % n]), rng, real=real)
            for i in range(n)
        ])


def _slice(z: QuaternionTensor, i: int) -> QuaternionTensor:
    return QuaternionTensor(z.data[:, :, i, :])


def _trace(m: QuaternionTensor) -> Quaternion:
    return Quaternion(*(float(v) for v in np.trace(m.data, axis1=1, axis2=2)))


def element(zc: QTLRCores, indices: Sequence[int]) -> Quaternion:
    """Entry at a one-based multi-index: trace of the left product of lateral slices."""
    idx = _check_indices(indices, zc.dims)
    prod = _slice(zc.cores[0], idx[0])
    for z, i in zip(zc.cores[1:], idx[1:]):
        prod = left_mul(prod, _slice(z, i))
    return _trace(prod)


def _connect(a: QuaternionTensor, b: QuaternionTensor, product) -> QuaternionTensor:
    if a.order != 3 or b.order != 3:
        raise ValueError("connection products take order-3 tensors")
    if a.dims[2] != b.dims[0]:
        raise ValueError(f"chain mismatch: {a.dims} and {b.dims}")
    ra, ia, rb = a.dims
    _, ib, rc = b.dims
    left = k_unfolding(a, 2)
    right = k_unfolding(b, 1)
    return product(left, right).reshape((ra, ia * ib, rc))


def left_connect(a: QuaternionTensor, b: QuaternionTensor) -> QuaternionTensor:
    """Left connection product, shape ``r_n x (I_n I_{n+1}) x r_{n+2}``."""
    return _connect(a, b, left_mul)


def right_connect(a: QuaternionTensor, b: QuaternionTensor) -> QuaternionTensor:
    """As :func:`left_connect` with the right matrix product."""
    return _connect(a, b, right_mul)


def chain(cores: Sequence[QuaternionTensor]) -> QuaternionTensor:
    out = cores[0]
    for z in cores[1:]:
        out = left_connect(out, z)
    return out


SUBCHAIN_KINDS = ("<", "<=", ">", ">=")


def subchain(zc: QTLRCores, kind: str, k: int) -> QuaternionTensor:
    """Subchain tensors ``Z^{<k}``, ``Z^{<=k}``, ``Z^{>k}``, ``Z^{>=k}`` (k one-based)."""
    n = zc.order
    spans = {"<": (1, k - 1), "<=": (1, k), ">": (k + 1, n), ">=": (k, n)}
    if kind not in spans:
        raise ValueError(f"unknown subchain kind {kind!r}; choose from {SUBCHAIN_KINDS}")
    lo, hi = spans[kind]
    if not (1 <= lo <= hi <= n):
        raise ValueError(f"subchain {kind}{k} is empty or out of range for {n} cores")
    return chain(zc.cores[lo - 1 : hi])


def trace_map(c: QuaternionTensor, dims: Sequence[int]) -> QuaternionTensor:
    """Trace every ``r x r`` lateral slice and reshape the fused mode to ``dims``."""
    if c.dims[0] != c.dims[2]:
        raise ValueError(f"lateral slices of {c.dims} are not square")
    return QuaternionTensor(np.trace(c.data, axis1=1, axis2=3)).reshape(dims)


def reconstruct(zc: QTLRCores) -> QuaternionTensor:
    return trace_map(chain(zc.cores), zc.dims)


def reconstruct_permuted(zc: QTLRCores, n: int) -> QuaternionTensor:
    """``T^{P_n}`` from ``(Z_n ._L ... ._L Z_N) ._R (Z_1 ._L ... ._L Z_{n-1})``."""
    order = zc.order
    if not 1 <= n <= order:
        raise ValueError(f"n={n} outside [1, {order}]")
    dims = zc.dims[n - 1 :] + zc.dims[: n - 1]
    head = chain(zc.cores[n - 1 :])
    if n == 1:
        return trace_map(head, dims)
    return trace_map(right_connect(head, chain(zc.cores[: n - 1])), dims)


def split_rank(r: int) -> tuple[int, int]:
    """Factor pair ``(r1, r2)`` of ``r`` with minimal ``|r1 - r2|`` and ``r1 <= r2``."""
    if r < 1:
        raise ValueError("rank must be positive")
    r1 = math.isqrt(r)
    while r % r1:
        r1 -= 1
    return r1, r // r1


def truncation_thresholds(norm: float, eps_p: float, order: int) -> tuple[float, float]:
    """``(delta_1, delta_n)`` for the first and the later truncations."""
    base = eps_p * norm / math.sqrt(order)
    return math.sqrt(2.0) * base, base


def qtlr_qsvd(
    t: QuaternionTensor, eps_p: float, rule: str = "tail", kernel: str = "lapack"
) -> QTLRCores:
    """Learn QTLR cores by N-1 sequential truncated QSVDs.

    With the default ``tail`` rule each truncation discards at most
    ``delta_n`` in Frobenius norm, which bounds the relative reconstruction
    error by ``eps_p``. ``rule="delta_squared"`` keeps singular values
    ``>= delta_n**2`` instead.
    """
    if eps_p <= 0:
        raise ValueError("eps_p must be positive")
    dims = t.dims
    order = len(dims)
    if order < 2:
        raise ValueError("need a tensor of order >= 2")
    norm = frobenius_norm(t)
    if norm == 0.0:
        # a zero tensor has no singular directions; return rank-1 zero cores
        return QTLRCores([QuaternionTensor.zeros((1, d, 1)) for d in dims])
    d1, dn = truncation_thresholds(norm, eps_p, order)

    f, r = truncated_qsvd(k_unfolding(t, 1), d1, rule, kernel)
    r1, r2 = split_rank(r)
    i1 = dims[0]
    # Z1 = permute(reshape(U1, [I1, r1, r2]), [2, 1, 3])
    u = f.U.data.reshape(4, i1, r1, r2, order="F").transpose(0, 2, 1, 3)
    cores = [QuaternionTensor(u)]
    rest_size = t.size // i1
    # Z^{>1} = permute(reshape(S1 V1^H, [r1, r2, prod I_{2..N}]), [2, 3, 1])
    sv = scale_columns(f.V, f.sigma).H
    rest = QuaternionTensor(sv.data.reshape(4, r1, r2, rest_size, order="F").transpose(0, 2, 3, 1))

    rn = r2
    for n in range(1, order - 1):
        i_n = dims[n]
        rest_size //= i_n
        mat = rest.reshape((rn * i_n, rest_size * r1))
        f, r_next = truncated_qsvd(mat, dn, rule, kernel)
        cores.append(f.U.reshape((rn, i_n, r_next)))
        rest = scale_columns(f.V, f.sigma).H.reshape((r_next, rest_size, r1))
        rn = r_next
    cores.append(rest)
    return QTLRCores(cores)


def relative_error(t: QuaternionTensor, zc: QTLRCores) -> float:
    """``||T - reconstruct(Z)||_F / ||T||_F``."""
    if t.dims != zc.dims:
        raise ValueError(f"shape mismatch: tensor {t.dims} vs cores {zc.dims}")
    nt = frobenius_norm(t)
    if nt == 0.0:
        raise ZeroDivisionError("relative error is undefined for a zero tensor")
    return frobenius_norm(t - reconstruct(zc)) / nt


def save_cores(zc: QTLRCores, directory: str | Path) -> None:
    """Write ``core_01.qtns``, ... and a ``cores.txt`` header of key=value lines."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for n, z in enumerate(zc.cores, 1):
        save_qtns(d / f"core_{n:02d}.qtns", z)
    (d / "cores.txt").write_text(
        f"order={zc.order}\n"
        f"ranks={','.join(map(str, zc.ranks))}\n"
        f"dims={','.join(map(str, zc.dims))}\n"
    )


def load_cores(directory: str | Path) -> QTLRCores:
    d = Path(directory)
    meta = dict(
        line.split("=", 1) for line in (d / "cores.txt").read_text().splitlines() if "=" in line
    )
    order = int(meta["order"])
    zc = QTLRCores([load_qtns(d / f"core_{n:02d}.qtns") for n in range(1, order + 1)])
    ranks = tuple(int(v) for v in meta["ranks"].split(","))
    if zc.ranks != ranks:
        raise ValueError(f"core shapes give ranks {zc.ranks}, header says {ranks}")
    return zc

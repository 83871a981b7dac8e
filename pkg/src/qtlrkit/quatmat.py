"""Quaternion matrix products, QSVD, truncation and rank.

Products are evaluated in the complex-pair form ``A = A1 + A2 j`` with
``A1 = w + x i`` and ``A2 = y + z i``, where

    (A1 + A2 j)(B1 + B2 j) = (A1 B1 - A2 conj(B2)) + (A1 B2 + A2 conj(B1)) j.

The QSVD goes through the complex adjoint ``[[A1, A2], [-conj(A2), conj(A1)]]``,
whose singular values come in coincident pairs, one pair per quaternion
singular value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quattensor import QuaternionTensor
from .svdkernel import complex_svd

PAIR_RTOL = 1e-8


class QSVDConsistencyError(RuntimeError):
    """The complex adjoint spectrum did not split into coincident pairs."""


@dataclass
class QSVDFactors:
    """``A ~= U diag(sigma) V^H`` with ``U`` (M x s), ``V`` (N x s)."""

    U: QuaternionTensor
    sigma: np.ndarray
    V: QuaternionTensor

    @property
    def s(self) -> int:
        return len(self.sigma)

    def reconstruct(self) -> QuaternionTensor:
        return left_mul(scale_columns(self.U, self.sigma), self.V.H)

    def truncate(self, r: int) -> QSVDFactors:
        return QSVDFactors(
            QuaternionTensor(self.U.data[:, :, :r]),
            self.sigma[:r].copy(),
            QuaternionTensor(self.V.data[:, :, :r]),
        )


def _check_matrix(a: QuaternionTensor, name: str) -> None:
    if a.order != 2:
        raise ValueError(f"{name} must be a quaternion matrix, got order {a.order}")


def _cmul(a1, a2, b1, b2):
    return a1 @ b1 - a2 @ b2.conj(), a1 @ b2 + a2 @ b1.conj()


def left_mul(a: QuaternionTensor, b: QuaternionTensor) -> QuaternionTensor:
    """``(A ._L B)_mp = sum_n a_mn b_np``."""
    _check_matrix(a, "A")
    _check_matrix(b, "B")
    if a.dims[1] != b.dims[0]:
        raise ValueError(f"shape mismatch: {a.dims} ._L {b.dims}")
    return QuaternionTensor.from_complex(*_cmul(*a.to_complex(), *b.to_complex()))


def right_mul(a: QuaternionTensor, b: QuaternionTensor) -> QuaternionTensor:
    """``(A ._R B)_mp = sum_n b_np a_mn``."""
    _check_matrix(a, "A")
    _check_matrix(b, "B")
    if a.dims[1] != b.dims[0]:
        raise ValueError(f"shape mismatch: {a.dims} ._R {b.dims}")
    b1, b2 = b.to_complex()
    a1, a2 = a.to_complex()
    c1, c2 = _cmul(b1.T, b2.T, a1.T, a2.T)
    return QuaternionTensor.from_complex(c1.T, c2.T)


def scale_columns(a: QuaternionTensor, d: np.ndarray) -> QuaternionTensor:
    return QuaternionTensor(a.data * np.asarray(d, float)[None, None, :])


def adjoint(a: QuaternionTensor) -> np.ndarray:
    """Complex adjoint ``[[A1, A2], [-conj(A2), conj(A1)]]`` of size 2M x 2N."""
    a1, a2 = a.to_complex()
    return np.block([[a1, a2], [-a2.conj(), a1.conj()]])


# embedded columns ---------------------------------------------------------------
#
# A quaternion vector x = x1 + x2 j is embedded as the complex vector
# e(x) = [x1; -conj(x2)], the first column of its adjoint. The partner
# e(x j) = [conj(b); -conj(a)] for e(x) = [a; b] spans the rest of the
# adjoint column pair, and quaternion orthogonality of x and y means e(y)
# is orthogonal to both e(x) and e(x j).


def _partner(e: np.ndarray) -> np.ndarray:
    m = e.shape[0] // 2
    return np.concatenate([e[m:].conj(), -e[:m].conj()])


def _to_quaternion_columns(cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = cols.shape[0] // 2
    return cols[:m], -cols[m:].conj()


def _pick_pivoted(cands: np.ndarray, need: int, q: np.ndarray, thresh: float = 1e-3):
    """Greedily take the candidate with the largest residual against ``span(q)``.

    ``q`` holds accepted embedded columns together with their partners, so
    its span stays closed under the partner map. Candidates must have unit
    norm. Returns the picked columns and the enlarged ``q``.
    """
    picked = []
    while len(picked) < need and cands.shape[1]:
        r = cands
        for _ in range(2):
            r = r - q @ (q.conj().T @ r)
        nr = np.linalg.norm(r, axis=0)
        j = int(np.argmax(nr))
        if nr[j] < thresh:
            break
        c = r[:, j] / nr[j]
        c = c - q @ (q.conj().T @ c)
        c /= np.linalg.norm(c)
        picked.append(c)
        q = np.column_stack([q, c, _partner(c)])
    return picked, q


def _fill(need: int, q: np.ndarray, first: np.ndarray | None = None, block: int = 256):
    """Extend ``q`` by ``need`` quaternion-orthonormal columns from ``first`` then unit vectors."""
    dim = q.shape[0]
    out = []
    if first is not None and first.shape[1]:
        got, q = _pick_pivoted(first / np.linalg.norm(first, axis=0).clip(1e-300), need, q)
        out += got
    start = 0
    while len(out) < need and start < dim:
        stop = min(dim, start + block)
        cands = np.zeros((dim, stop - start), complex)
        cands[np.arange(start, stop), np.arange(stop - start)] = 1.0
        got, q = _pick_pivoted(cands, need - len(out), q)
        out += got
        start = stop
    if len(out) < need:
        raise QSVDConsistencyError("could not complete a quaternion-orthonormal basis")
    return out, q


def _select_right_vectors(cv: np.ndarray, cs: np.ndarray, p: int, cluster_rtol: float = 1e-6):
    """One quaternion right singular vector per adjoint pair, pivoting inside clusters."""
    dim = cv.shape[0]
    q = np.zeros((dim, 0), complex)
    picked = []
    scale = cs[0] if cs[0] > 0 else 1.0
    i = 0
    while i < p:
        j = i + 1
        while j < p and abs(cs[2 * j] - cs[2 * j - 1]) <= cluster_rtol * scale:
            j += 1
        got, q = _pick_pivoted(cv[:, 2 * i : 2 * j], j - i, q)
        picked += got
        i = j
    if len(picked) < p:
        got, q = _fill(p - len(picked), q)
        picked += got
    return np.array(picked).T


def _right_mul_columns(x1, x2, q1, q2):
    """Right-multiply each quaternion column ``x1 + x2 j`` by scalar ``q1 + q2 j``."""
    return x1 * q1 - x2 * q2.conj(), x1 * q2 + x2 * q1.conj()


def qsvd(a: QuaternionTensor, kernel: str = "lapack") -> QSVDFactors:
    """Thin quaternion SVD with ``s = min(M, N)`` singular values.

    Each singular pair is normalised so that the largest-modulus entry of
    its right singular vector is real and positive; for real input this
    keeps every factor real.
    """
    _check_matrix(a, "A")
    m, n = a.dims
    p = min(m, n)
    if p == 0:
        return QSVDFactors(QuaternionTensor.zeros((m, 0)), np.zeros(0), QuaternionTensor.zeros((n, 0)))
    chi = adjoint(a)
    cu, cs, cvh = complex_svd(chi, kernel)
    smax = cs[0]
    pairs = cs[: 2 * p].reshape(p, 2)
    if smax > 0 and np.any(np.abs(pairs[:, 0] - pairs[:, 1]) > PAIR_RTOL * smax):
        raise QSVDConsistencyError(f"adjoint singular values do not pair up: {cs}")

    vcols = _select_right_vectors(cvh.conj().T, cs, p)
    av = chi @ vcols
    sigma = np.linalg.norm(av, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma, vcols, av = sigma[order], vcols[:, order], av[:, order]
    null_tol = max(m, n) * np.finfo(float).eps * smax
    ucols = np.zeros((2 * m, p), complex)
    q = np.zeros((2 * m, 0), complex)
    live = np.zeros(p, dtype=bool)
    for j in range(p):
        if sigma[j] <= null_tol:
            break
        # A v / sigma, re-orthogonalised: exact for separated sigma, and it
        # keeps U orthonormal when sigma sits near the noise floor
        c = av[:, j] / sigma[j]
        for _ in range(2):
            c = c - q @ (q.conj().T @ c)
        nc = np.linalg.norm(c)
        if nc < 0.5:
            break
        c /= nc
        ucols[:, j] = c
        q = np.column_stack([q, c, _partner(c)])
        live[j] = True
    nl = int(live.sum())
    sigma = np.where(live, sigma, 0.0)
    if nl < p:
        extra, _ = _fill(p - nl, q, first=cu[:, ::-1])
        ucols[:, nl:] = np.array(extra).T

    u1, u2 = _to_quaternion_columns(ucols)
    v1, v2 = _to_quaternion_columns(vcols)
    # phase normalisation: v_piv * conj(v_piv)/|v_piv| is real positive
    piv = np.argmax(np.abs(v1) ** 2 + np.abs(v2) ** 2, axis=0)
    cols = np.arange(p)
    pw1, pw2 = v1[piv, cols], v2[piv, cols]
    mod = np.sqrt(np.abs(pw1) ** 2 + np.abs(pw2) ** 2)
    mod[mod == 0] = 1.0
    q1, q2 = pw1.conj() / mod, -pw2 / mod
    v1, v2 = _right_mul_columns(v1, v2, q1, q2)
    # null-space left vectors are normalised on their own pivot
    upiv = np.argmax(np.abs(u1) ** 2 + np.abs(u2) ** 2, axis=0)
    uw1, uw2 = u1[upiv, cols], u2[upiv, cols]
    umod = np.sqrt(np.abs(uw1) ** 2 + np.abs(uw2) ** 2)
    umod[umod == 0] = 1.0
    q1 = np.where(live, q1, uw1.conj() / umod)
    q2 = np.where(live, q2, -uw2 / umod)
    u1, u2 = _right_mul_columns(u1, u2, q1, q2)
    return QSVDFactors(QuaternionTensor.from_complex(u1, u2), sigma, QuaternionTensor.from_complex(v1, v2))


TRUNCATION_RULES = ("delta_squared", "tail")


def truncation_rank(sigma: np.ndarray, delta: float, rule: str = "delta_squared") -> int:
    """Number of singular values kept at threshold ``delta`` (at least one).

    ``delta_squared`` keeps every ``sigma >= delta**2``. ``tail`` keeps the
    smallest leading block whose discarded tail has energy at most
    ``delta**2``, so the truncation error in Frobenius norm is ``<= delta``.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if len(sigma) == 0:
        return 0
    if rule == "delta_squared":
        r = int(np.sum(sigma >= delta * delta))
    elif rule == "tail":
        tail = np.concatenate([np.cumsum((sigma**2)[::-1])[::-1], [0.0]])
        r = int(np.argmax(tail <= delta * delta))
    else:
        raise ValueError(f"unknown truncation rule {rule!r}; choose from {TRUNCATION_RULES}")
    return max(r, 1)


def truncated_qsvd(
    a: QuaternionTensor, delta: float, rule: str = "delta_squared", kernel: str = "lapack"
) -> tuple[QSVDFactors, int]:
    f = qsvd(a, kernel)
    r = truncation_rank(f.sigma, delta, rule)
    return f.truncate(r), r


RANK_SIDES = ("right", "left")


def rank(a: QuaternionTensor, kernel: str = "lapack", side: str = "right") -> int:
    """Numerical rank from the QSVD singular values.

    ``side="right"`` is the QSVD rank of ``A``: the dimension of the span of
    its columns under right scalar multiplication. ``side="left"`` spans the
    columns with left scalars instead, which equals the QSVD rank of ``A^T``.
    The two differ for quaternion matrices; products built with ``._R``
    obey rank bounds in the left sense.
    """
    _check_matrix(a, "A")
    if side not in RANK_SIDES:
        raise ValueError(f"unknown rank side {side!r}; choose from {RANK_SIDES}")
    sigma = qsvd(a if side == "right" else a.T, kernel).sigma
    if len(sigma) == 0 or sigma[0] == 0:
        return 0
    tol = 1e-10 * sigma[0] * max(a.dims)
    return int(np.sum(sigma > tol))

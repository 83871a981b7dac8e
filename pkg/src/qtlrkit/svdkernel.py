"""Thin complex SVD kernels used underneath the quaternion SVD.

``jacobi`` is a one-sided (Hestenes) Jacobi SVD compiled with numba;
``lapack`` defers to ``numpy.linalg.svd``. Both return ``(U, s, Vh)`` with
``U`` of shape ``(m, p)``, ``s`` non-increasing of length ``p = min(m, n)``
and ``Vh`` of shape ``(p, n)``, with orthonormal columns/rows even where
singular values vanish.
"""

from __future__ import annotations

import numba
import numpy as np

KERNELS = ("lapack", "jacobi")


@numba.njit(cache=True)
def _hestenes(at, tol, max_sweeps):
    # at holds the columns of A as rows, so column access is contiguous
    n, m = at.shape
    vt = np.eye(n, dtype=np.complex128)
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0 + 0.0j
                for i in range(m):
                    up = at[p, i]
                    uq = at[q, i]
                    alpha += up.real * up.real + up.imag * up.imag
                    beta += uq.real * uq.real + uq.imag * uq.imag
                    gamma += up.conjugate() * uq
                g = abs(gamma)
                if g == 0.0 or g <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                phase = (gamma / g).conjugate()
                zeta = (beta - alpha) / (2.0 * g)
                sgn = 1.0 if zeta >= 0.0 else -1.0
                t = sgn / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                for i in range(m):
                    up = at[p, i]
                    uq = at[q, i] * phase
                    at[p, i] = c * up - s * uq
                    at[q, i] = s * up + c * uq
                for i in range(n):
                    vp = vt[p, i]
                    vq = vt[q, i] * phase
                    vt[p, i] = c * vp - s * vq
                    vt[q, i] = s * vp + c * vq
        if not rotated:
            break
    return at, vt, sweeps


def _complete_columns(u: np.ndarray, good: np.ndarray) -> np.ndarray:
    """Replace the columns of ``u`` not flagged ``good`` by an orthonormal completion."""
    m, p = u.shape
    basis = [u[:, j] for j in range(p) if good[j]]
    q = np.array(basis).T if basis else np.zeros((m, 0), complex)
    out = u.copy()
    e = 0
    for j in range(p):
        if good[j]:
            continue
        while True:
            c = np.zeros(m, complex)
            c[e] = 1.0
            e += 1
            for _ in range(2):
                c = c - q @ (q.conj().T @ c)
            nc = np.linalg.norm(c)
            if nc > 0.5:
                break
        c /= nc
        out[:, j] = c
        q = np.column_stack([q, c])
    return out


def jacobi_svd(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 80):
    a = np.asarray(a, dtype=np.complex128)
    m, n = a.shape
    if m < n:
        u, s, vh = jacobi_svd(a.conj().T, tol, max_sweeps)
        return vh.conj().T, s, u.conj().T
    if n == 0:
        return np.zeros((m, 0), complex), np.zeros(0), np.zeros((0, 0), complex)
    # copy: for Fortran-ordered input a.T is already contiguous and would alias
    at, vt, _ = _hestenes(np.array(a.T, order="C"), tol, max_sweeps)
    s = np.sqrt(np.sum(at.real**2 + at.imag**2, axis=1))
    order = np.argsort(-s, kind="stable")
    s = s[order]
    at = at[order]
    vt = vt[order]
    good = s > (s[0] * max(m, n) * np.finfo(float).eps if s[0] > 0 else 0.0)
    u = np.zeros((m, n), complex)
    u[:, good] = (at[good] / s[good, None]).T
    if not good.all():
        u = _complete_columns(u, good)
        s = np.where(good, s, 0.0)
    # vt rows are the right singular vectors conjugated: A V = U S with V = vt.T
    return u, s, vt.conj()


def lapack_svd(a: np.ndarray):
    return np.linalg.svd(np.asarray(a, dtype=np.complex128), full_matrices=False)


def complex_svd(a: np.ndarray, kernel: str = "lapack"):
    if kernel == "lapack":
        return lapack_svd(a)
    if kernel == "jacobi":
        return jacobi_svd(a)
    raise ValueError(f"unknown SVD kernel {kernel!r}; choose from {KERNELS}")

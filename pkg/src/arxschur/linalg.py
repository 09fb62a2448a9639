"""Dense real-matrix kernel.

Matrices are plain 2-D ``float64`` numpy arrays.  Products and Kronecker
products go through numpy; the factorizations (LU, Cholesky, Jacobi) are
written out here so that failures carry the pivot that caused them.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    ConvergenceError,
    NotPositiveDefiniteError,
    RejectedInputError,
    SingularMatrixError,
)

SINGULAR_RTOL = 1e-12
SYMMETRY_RTOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def as_matrix(a, name="matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D float64 array."""
    m = np.array(a, dtype=np.float64)
    if m.ndim == 1 and m.size == 0:
        m = m.reshape(0, 0)
    if m.ndim != 2:
        raise RejectedInputError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise RejectedInputError(f"{name} has non-finite entries")
    return m


def _require_square(a: np.ndarray, name: str) -> None:
    if a.shape[0] != a.shape[1]:
        raise RejectedInputError(f"{name} must be square, got shape {a.shape}")


def _require_symmetric(a: np.ndarray, name: str) -> None:
    _require_square(a, name)
    scale = max(np.linalg.norm(a), 1.0)
    if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_RTOL * scale:
        raise RejectedInputError(f"{name} is not symmetric")


def frobenius(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    big = float(np.max(np.abs(a), initial=0.0))
    if big == 0.0 or not math.isfinite(big):
        return big
    return big * float(np.linalg.norm(a / big))


def mat_mul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise RejectedInputError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


def lu_factor(a):
    """LU factorization with partial pivoting.

    Returns ``(lu, perm, sign)`` where ``lu`` packs unit-lower L below the
    diagonal and U on and above it, ``perm`` is the row permutation and
    ``sign`` the permutation parity.  Raises :class:`SingularMatrixError`
    when a pivot falls below ``1e-12 * ||a||_F``.
    """
    lu = as_matrix(a, "a").copy()
    _require_square(lu, "a")
    n = lu.shape[0]
    perm = np.arange(n)
    sign = 1.0
    threshold = SINGULAR_RTOL * frobenius(lu)
    for k in range(n):
        piv = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[piv, k]) <= threshold or lu[piv, k] == 0.0:
            raise SingularMatrixError(
                f"matrix is singular to working precision at pivot {k}", pivot_index=k
            )
        if piv != k:
            lu[[k, piv]] = lu[[piv, k]]
            perm[[k, piv]] = perm[[piv, k]]
            sign = -sign
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, perm, sign


def lu_solve(factors, b) -> np.ndarray:
    lu, perm, _ = factors
    n = lu.shape[0]
    x = np.array(b, dtype=np.float64)[perm]
    vec = x.ndim == 1
    if vec:
        x = x[:, None]
    for i in range(n):
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - lu[i, i + 1:] @ x[i + 1:]) / lu[i, i]
    return x[:, 0] if vec else x


def inverse(a) -> np.ndarray:
    a = as_matrix(a, "a")
    _require_square(a, "a")
    if a.shape[0] == 0:
        return a.copy()
    return lu_solve(lu_factor(a), np.eye(a.shape[0]))


def solve(a, b) -> np.ndarray:
    return lu_solve(lu_factor(a), b)


def det(a) -> float:
    """Determinant via LU; returns 0.0 for matrices singular to working precision."""
    a = as_matrix(a, "a")
    _require_square(a, "a")
    if a.shape[0] == 0:
        return 1.0
    try:
        lu, _, sign = lu_factor(a)
    except SingularMatrixError:
        return 0.0
    return float(sign * np.prod(np.diag(lu)))


def cholesky(a) -> np.ndarray:
    """Lower-triangular G with G @ G.T == a."""
    a = as_matrix(a, "a")
    _require_symmetric(a, "a")
    n = a.shape[0]
    g = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - g[j, :j] @ g[j, :j]
        if not pivot > 0.0:
            raise NotPositiveDefiniteError(
                f"matrix is not positive definite (pivot {j} = {pivot:.3e})", pivot=pivot
            )
        g[j, j] = math.sqrt(pivot)
        g[j + 1:, j] = (a[j + 1:, j] - g[j + 1:, :j] @ g[j, :j]) / g[j, j]
    return g


def sym_eig(a):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(w, v)`` with eigenvalues ``w`` sorted in descending order and
    orthonormal eigenvectors in the columns of ``v``.
    """
    a = as_matrix(a, "a")
    _require_symmetric(a, "a")
    n = a.shape[0]
    m = 0.5 * (a + a.T)
    v = np.eye(n)
    scale = frobenius(m)
    if n > 1 and scale > 0.0:
        for _ in range(JACOBI_MAX_SWEEPS):
            off = frobenius(m - np.diag(np.diag(m)))
            if off <= 1e-15 * scale:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = m[p, q]
                    if apq == 0.0:
                        continue
                    theta = (m[q, q] - m[p, p]) / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                    c = 1.0 / math.hypot(t, 1.0)
                    s = t * c
                    mp = m[:, p].copy()
                    mq = m[:, q].copy()
                    m[:, p] = c * mp - s * mq
                    m[:, q] = s * mp + c * mq
                    mp = m[p, :].copy()
                    mq = m[q, :].copy()
                    m[p, :] = c * mp - s * mq
                    m[q, :] = s * mp + c * mq
                    m[p, q] = m[q, p] = 0.0
                    vp = v[:, p].copy()
                    vq = v[:, q].copy()
                    v[:, p] = c * vp - s * vq
                    v[:, q] = s * vp + c * vq
        else:
            raise ConvergenceError(f"Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps")
    w = np.diag(m).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def sym_sqrt(a, inverse_root=False) -> np.ndarray:
    """Symmetric square root (or inverse square root) of a PD matrix."""
    w, v = sym_eig(a)
    if w.size and not w[-1] > 0.0:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite (min eigenvalue {w[-1]:.3e})", pivot=float(w[-1])
        )
    r = 1.0 / np.sqrt(w) if inverse_root else np.sqrt(w)
    return (v * r) @ v.T


def spectral_radius(a, tol=1e-10) -> float:
    """Spectral radius from norms of repeated squares, ``||a^(2^m)||_F^(1/2^m)``.

    Each square is renormalized to unit Frobenius norm and the scale is
    carried in log form, so neither overflow nor underflow occurs.
    """
    a = as_matrix(a, "a")
    _require_square(a, "a")
    if not 0.0 < tol <= 1e-2:
        raise RejectedInputError(f"tol must lie in (0, 1e-2], got {tol}")
    nrm = frobenius(a)
    if nrm == 0.0:
        return 0.0
    b = a / nrm
    log_scale = math.log(nrm)
    est = nrm
    for m in range(1, 61):
        b = b @ b
        nb = frobenius(b)
        if nb == 0.0 or not math.isfinite(nb):
            return 0.0
        b /= nb
        log_scale = 2.0 * log_scale + math.log(nb)
        new = math.exp(log_scale / 2.0 ** m)
        if abs(new - est) < 0.5 * tol * max(1.0, new):
            return new
        est = new
    return est


def block_diag(*blocks) -> np.ndarray:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out

"""Limiting excitation matrices of the closed loop.

Under adaptive tracking ``S_n / n`` converges to ``Lambda = [[L, K^T], [K, H]]``
where ``L`` collects the output lags, ``H`` the input lags and ``K`` their
cross-covariance.  ``S = H - K L^{-1} K^T`` is the Schur complement of ``L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import linalg
from .errors import (
    ConvergenceError,
    DivergentSeriesError,
    InconsistencyError,
    RejectedInputError,
    SingularMatrixError,
)
from .model import ArxModel, check_causality, check_strong_controllability

MAX_SERIES_TERMS = 1_000_000


@dataclass(frozen=True)
class LimitMatrices:
    L: np.ndarray
    K: np.ndarray
    H: np.ndarray
    Lambda: np.ndarray
    S: np.ndarray
    Lambda_inv: Optional[np.ndarray]
    truncation_k: int
    tail_bound: float
    strongly_controllable: bool

    def to_dict(self) -> dict:
        return {
            "L": self.L.tolist(),
            "K": self.K.tolist(),
            "H": self.H.tolist(),
            "Lambda": self.Lambda.tolist(),
            "S": self.S.tolist(),
            "Lambda_inv": None if self.Lambda_inv is None else self.Lambda_inv.tolist(),
            "truncation_k": self.truncation_k,
            "tail_bound": self.tail_bound,
        }


def build_L(model: ArxModel) -> np.ndarray:
    return linalg.block_diag(*([model.Gamma] * model.p)) if model.p else np.zeros((0, 0))


def build_K(model: ArxModel) -> np.ndarray:
    """``dq x dp`` matrix with block ``(i, j) = P_{j-i} Gamma`` for ``j > i`` and zero otherwise."""
    d, p, q = model.d, model.p, model.q
    K = np.zeros((d * q, d * p))
    for i in range(q):
        for j in range(i + 1, p):
            K[i * d:(i + 1) * d, j * d:(j + 1) * d] = model.pk(j - i) @ model.Gamma
    return K


def build_H(model: ArxModel, tol: float = 1e-10):
    """Truncated series ``H_i = sum_{k>=i} P_k Gamma P_{k-i+1}^T`` assembled block-Toeplitz.

    Summation stops at the first ``k >= p + q`` where the geometric tail
    estimate ``nu^2 ||Gamma||_F / (1 - r^2)`` drops below ``tol``; ``nu`` is the
    largest ``||P_m||_F`` over the last ``q`` coefficients (these determine all
    later ones) and ``r`` is the companion spectral radius padded by a tenth of
    its distance to 1.  Returns ``(H, truncation_k, tail_bound)``.
    """
    d, p, q = model.d, model.p, model.q
    if q == 0:
        return np.zeros((0, 0)), 0, 0.0
    causal, rho = check_causality(model, tol if tol <= 1e-2 else 1e-2)
    if not causal:
        raise DivergentSeriesError(
            f"B is not causal (companion spectral radius {rho:.6g}); the H series diverges"
        )
    r = rho + (1.0 - rho) / 10.0
    gamma = model.Gamma
    gnorm = linalg.frobenius(gamma)
    blocks = [np.zeros((d, d)) for _ in range(q)]
    norms = []
    k = 0
    tail = math.inf
    while True:
        k += 1
        pk = model.pk(k)
        norms.append(linalg.frobenius(pk))
        pg = pk @ gamma
        for i in range(1, min(q, k) + 1):
            blocks[i - 1] += pg @ model.pk(k - i + 1).T
        if k >= p + q:
            nu = max(norms[-q:])
            tail = nu * nu * gnorm / (1.0 - r * r)
            if tail < tol:
                break
        if k >= MAX_SERIES_TERMS:
            raise ConvergenceError(f"H series did not reach tol={tol} in {k} terms (tail {tail:.3e})")
    blocks[0] = 0.5 * (blocks[0] + blocks[0].T)
    H = np.zeros((d * q, d * q))
    for i in range(q):
        for j in range(i, q):
            blk = blocks[j - i]
            H[i * d:(i + 1) * d, j * d:(j + 1) * d] = blk
            H[j * d:(j + 1) * d, i * d:(i + 1) * d] = blk.T
    return H, k, tail


def build_lambda(model: ArxModel, tol: float = 1e-10) -> LimitMatrices:
    """Assemble ``L, K, H, Lambda``, the Schur complement ``S`` and ``Lambda^{-1}``.

    ``Lambda^{-1}`` comes from the block formula built on ``S^{-1}``.  It is
    ``None`` when the model is not strongly controllable and ``S`` turns out
    singular; a singular ``S`` for a strongly controllable model raises
    :class:`InconsistencyError`.
    """
    sc, causal, _ = check_strong_controllability(model, min(tol, 1e-2))
    if not causal:
        raise DivergentSeriesError("B is not causal; the limiting matrices do not exist")
    L = build_L(model)
    K = build_K(model)
    H, trunc_k, tail = build_H(model, tol)
    L_inv = linalg.block_diag(*([linalg.inverse(model.Gamma)] * model.p)) if model.p else L
    S = H - K @ L_inv @ K.T
    S = 0.5 * (S + S.T)
    Lambda = np.block([[L, K.T], [K, H]]) if model.p and model.q else (L if model.q == 0 else H)
    try:
        S_inv = linalg.inverse(S)
    except SingularMatrixError as exc:
        if sc:
            raise InconsistencyError(
                f"Schur complement is singular although Pi is invertible ({exc}); tighten tol"
            ) from exc
        S_inv = None
    Lambda_inv = None
    if S_inv is not None:
        Lambda_inv = block_inverse(L_inv, K, S_inv)
    return LimitMatrices(L, K, H, Lambda, S, Lambda_inv, trunc_k, tail, sc)


def block_inverse(L_inv, K, S_inv) -> np.ndarray:
    """Inverse of ``[[L, K^T], [K, H]]`` from ``L^{-1}``, ``K`` and ``S^{-1}``."""
    if L_inv.shape[0] == 0:
        return S_inv.copy()
    if S_inv.shape[0] == 0:
        return L_inv.copy()
    lk = L_inv @ K.T @ S_inv  # L^{-1} K^T S^{-1}
    top_left = L_inv + lk @ K @ L_inv
    return np.block([[top_left, -lk], [-lk.T, S_inv]])


def schur_oracle(model: ArxModel, depth: int) -> np.ndarray:
    """``T Sigma T^T`` truncated to ``depth`` block columns.

    ``T`` has block ``(i, j) = P_{p+j-i}`` (zero for non-positive index), so its
    leading ``q`` columns form ``Pi``; ``Sigma`` repeats ``Gamma`` on the diagonal.
    """
    d, p, q = model.d, model.p, model.q
    if depth < p + q:
        raise RejectedInputError(f"depth must be >= p + q = {p + q}")
    if q == 0:
        return np.zeros((0, 0))
    causal, rho = check_causality(model)
    if not causal:
        raise DivergentSeriesError(f"B is not causal (rho={rho:.6g})")
    pks = model._pk.upto(p + depth - 1)
    S = np.zeros((d * q, d * q))
    col = np.zeros((d * q, d))
    for j in range(depth):
        for i in range(q):
            k = p + j - i
            col[i * d:(i + 1) * d] = pks[k] if k >= 1 else 0.0
        S += col @ model.Gamma @ col.T
    return 0.5 * (S + S.T)

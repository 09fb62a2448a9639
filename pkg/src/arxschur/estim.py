"""Recursive least squares (LS) and weighted least squares (WLS) estimation.

``S_n(a) = sum_{k<=n} a_k Phi_k Phi_k^T + I`` is never formed; its inverse is
maintained by rank-one (Sherman-Morrison) updates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalBreakdownError, RejectedInputError


@dataclass(frozen=True)
class WeightPolicy:
    kind: str = "ls"
    gamma: float = 0.5

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in ("ls", "wls"):
            raise RejectedInputError(f"unknown weight policy {self.kind!r}")
        if kind == "wls" and not self.gamma > 0.0:
            raise RejectedInputError(f"WLS requires gamma > 0, got {self.gamma}")
        object.__setattr__(self, "kind", kind)

    @property
    def weighted(self) -> bool:
        return self.kind == "wls"

    def weight(self, s_n: float) -> float:
        """``a_n = (1 / log s_n)^(1+gamma)``, with ``s_n`` floored at ``e`` so that ``a_n <= 1``."""
        if not self.weighted:
            return 1.0
        return math.log(max(s_n, math.e)) ** -(1.0 + self.gamma)


def rank_one_update(S_inv, theta_hat, phi, innovation, a):
    """Apply one WLS step in place.

    ``innovation`` is ``X_{n+1} - U_n - theta_hat^T phi``.  Returns
    ``(g, f)`` with ``g = phi^T S_{n-1}^{-1} phi`` and ``f = a phi^T S_n^{-1} phi``.
    """
    s_phi = S_inv @ phi
    g = float(phi @ s_phi)
    denom = 1.0 + a * g
    if not denom > 0.0:
        raise NumericalBreakdownError(f"rank-one update lost positive definiteness (denominator {denom:.3e})")
    S_inv -= (a / denom) * np.outer(s_phi, s_phi)
    theta_hat += np.outer((a / denom) * s_phi, innovation)
    return g, a * g / denom


class EstimatorState:
    """Single-owner recursive estimator of the ``delta x d`` parameter."""

    def __init__(self, delta: int, d: int, theta0=None, policy: WeightPolicy | None = None):
        if theta0 is None:
            theta0 = np.zeros((delta, d))
        theta0 = np.array(theta0, dtype=np.float64)
        if theta0.shape != (delta, d):
            raise RejectedInputError(f"theta0 must have shape {(delta, d)}, got {theta0.shape}")
        self.delta = delta
        self.d = d
        self.policy = policy or WeightPolicy()
        self.theta_hat = theta0
        self.S_inv = np.eye(delta)
        self.s_n = 0.0
        self.n = 0
        self.last_f = 0.0
        self.last_a = 1.0

    def predict(self, phi) -> np.ndarray:
        return self.theta_hat.T @ phi

    def update(self, phi, x_next, u_n) -> "EstimatorState":
        phi = np.asarray(phi, dtype=np.float64)
        x_next = np.asarray(x_next, dtype=np.float64)
        u_n = np.asarray(u_n, dtype=np.float64)
        if phi.shape != (self.delta,) or x_next.shape != (self.d,) or u_n.shape != (self.d,):
            raise RejectedInputError("inconsistent regressor / output / input dimensions")
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(x_next)) and np.all(np.isfinite(u_n))):
            raise RejectedInputError("non-finite input to estimator update")
        self.s_n += float(phi @ phi)
        a = self.policy.weight(self.s_n)
        innovation = x_next - u_n - self.theta_hat.T @ phi
        _, self.last_f = rank_one_update(self.S_inv, self.theta_hat, phi, innovation, a)
        self.last_a = a
        self.n += 1
        return self


def estimator_init(delta, d, theta0=None, policy=None) -> EstimatorState:
    return EstimatorState(delta, d, theta0, policy)


def estimator_update(state: EstimatorState, phi, x_next, u_n) -> EstimatorState:
    return state.update(phi, x_next, u_n)

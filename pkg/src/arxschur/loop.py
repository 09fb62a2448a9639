"""Closed-loop adaptive tracking simulator.

Each step assembles ``Phi_n``, applies the certainty-equivalence control
``U_n = x_{n+1} - theta_hat_n^T Phi_n``, advances the true system and
updates the estimator.  The step loop itself lives in :mod:`.kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, linalg
from .errors import InstabilityError, NumericalBreakdownError, RejectedInputError
from .estim import EstimatorState, WeightPolicy
from .model import ArxModel, pack_theta, regressor, regressor_matrix

BLOWUP = 1e12
_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class NoiseGen:
    """White noise ``Gamma^{1/2} xi`` on an independent Philox stream.

    The Philox key is ``(seed, stream_id)``, so every pair addresses its own
    counter-based stream and draws are reproducible on any platform.
    """

    Gamma: np.ndarray
    seed: int = 0
    stream_id: int = 0
    kind: str = "gaussian_white"

    def __post_init__(self):
        if self.kind not in ("gaussian_white", "scaled_uniform_white", "none"):
            raise RejectedInputError(f"unknown noise kind {self.kind!r}")
        object.__setattr__(self, "Gamma_sqrt", linalg.cholesky(self.Gamma))

    def generator(self) -> np.random.Generator:
        key = [int(self.seed) & 0xFFFFFFFFFFFFFFFF, int(self.stream_id) & 0xFFFFFFFFFFFFFFFF]
        return np.random.Generator(np.random.Philox(key=key))

    def draw(self, n_steps: int) -> np.ndarray:
        """Rows ``eps_0 .. eps_N``; ``eps_0`` is zero (the first noise enters ``X_1``)."""
        d = self.Gamma.shape[0]
        out = np.zeros((n_steps + 1, d))
        if self.kind == "none":
            return out
        rng = self.generator()
        if self.kind == "gaussian_white":
            xi = rng.standard_normal((n_steps, d))
        else:
            xi = rng.uniform(-_SQRT3, _SQRT3, size=(n_steps, d))
        out[1:] = xi @ self.Gamma_sqrt.T
        return out


@dataclass(frozen=True)
class RefTrajectory:
    """Reference ``x_n``: ``zero``, ``decay`` (``amplitude (n+1)^-rate``) or ``periodic``."""

    kind: str = "zero"
    amplitude: float = 1.0
    rate: float = 0.25
    period: int = 20

    def __post_init__(self):
        if self.kind not in ("zero", "decay", "periodic"):
            raise RejectedInputError(f"unknown trajectory kind {self.kind!r}")
        if self.kind == "decay" and not 0.0 < self.rate < 0.5:
            raise RejectedInputError(f"decay rate must lie in (0, 1/2), got {self.rate}")
        if self.kind == "periodic" and self.period < 1:
            raise RejectedInputError("period must be >= 1")

    @property
    def violates_ct(self) -> bool:
        """True when ``sum ||x_k||^2`` grows linearly, outside the tracking hypotheses."""
        return self.kind == "periodic"

    def values(self, length: int, d: int) -> np.ndarray:
        n = np.arange(length, dtype=np.float64)
        if self.kind == "zero":
            col = np.zeros(length)
        elif self.kind == "decay":
            col = self.amplitude * (n + 1.0) ** -self.rate
        else:
            col = self.amplitude * np.sin(2.0 * np.pi * n / self.period)
        return np.repeat(col[:, None], d, axis=1)


@dataclass
class RunRecord:
    """Trajectories over ``n = 0 .. N``.

    ``U[N]``, ``pi[N]`` and ``f[N]`` are evaluated at the final regressor
    without advancing the system.  ``estimator`` holds ``theta_hat_N`` and
    ``S_{N-1}(a)^{-1}``.
    """

    model: ArxModel
    policy: WeightPolicy
    X: np.ndarray
    U: np.ndarray
    x_ref: np.ndarray
    epsilon: np.ndarray
    pi: np.ndarray
    theta_err_sq: np.ndarray
    f: np.ndarray
    a: np.ndarray
    s: np.ndarray
    estimator: EstimatorState
    backend: str = ""
    _phi: np.ndarray | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.X.shape[0] - 1

    @property
    def theta_hat(self) -> np.ndarray:
        return self.estimator.theta_hat

    @property
    def phi(self) -> np.ndarray:
        """Regressors ``Phi_0 .. Phi_N`` as rows."""
        if self._phi is None:
            self._phi = regressor_matrix(self.X, self.U, self.model.p, self.model.q)
        return self._phi

    def design(self, n: int) -> np.ndarray:
        """Unweighted ``S_n = sum_{k=0}^n Phi_k Phi_k^T``."""
        ph = self.phi[: n + 1]
        return ph.T @ ph

    def weighted_design(self, n: int) -> np.ndarray:
        """``S_n(a) = sum_{k=0}^n a_k Phi_k Phi_k^T + I``."""
        ph = self.phi[: n + 1]
        return (ph.T * self.a[: n + 1]) @ ph + np.eye(ph.shape[1])

    def to_csv(self, fh) -> None:
        d = self.model.d
        cols = ["n"]
        for name in ("X", "U", "xref", "eps"):
            cols += [f"{name}_{i + 1}" for i in range(d)]
        cols += ["theta_err_sq", "f_n"]
        fh.write(",".join(cols) + "\n")
        for n in range(self.N + 1):
            vals = [*self.X[n], *self.U[n], *self.x_ref[n], *self.epsilon[n],
                    self.theta_err_sq[n], self.f[n]]
            fh.write(f"{n}," + ",".join(repr(float(v)) for v in vals) + "\n")


def control_step(theta_hat, phi, x_next_ref) -> np.ndarray:
    return np.asarray(x_next_ref, dtype=np.float64) - np.asarray(theta_hat).T @ np.asarray(phi)


def system_step(model: ArxModel, phi, u_n, eps_next) -> np.ndarray:
    return pack_theta(model).T @ np.asarray(phi) + np.asarray(u_n) + np.asarray(eps_next)


def reference_closed_loop(model, policy, theta0, eps, xref, adapt=True):
    """Step-by-step composition of :func:`control_step`, :func:`system_step`
    and :class:`EstimatorState`; slow, used as the oracle for the kernels.

    With ``adapt=False`` the estimate stays at ``theta0``.
    """
    d, p, q, delta = model.d, model.p, model.q, model.delta
    N = eps.shape[0] - 1
    theta = pack_theta(model)
    est = EstimatorState(delta, d, theta0, policy)
    X = np.zeros((N + 1, d))
    U = np.zeros((N + 1, d))
    pi = np.zeros((N + 1, d))
    err_sq = np.zeros(N + 1)
    f = np.zeros(N + 1)
    a = np.zeros(N + 1)
    s = np.zeros(N + 1)
    status = -1
    for n in range(N + 1):
        phi = regressor(X, U, n, p, q)
        U[n] = control_step(est.theta_hat, phi, xref[n + 1])
        pi[n] = (theta - est.theta_hat).T @ phi
        err_sq[n] = float(np.sum((est.theta_hat - theta) ** 2))
        if n == N:
            s[n] = est.s_n + float(phi @ phi)
            a[n] = policy.weight(s[n])
            g = float(phi @ est.S_inv @ phi)
            f[n] = a[n] * g / (1.0 + a[n] * g)
            break
        X[n + 1] = system_step(model, phi, U[n], eps[n + 1])
        if not (np.linalg.norm(X[n + 1]) <= BLOWUP and np.linalg.norm(U[n]) <= BLOWUP):
            status = n + 1
            break
        if adapt:
            try:
                est.update(phi, X[n + 1], U[n])
            except NumericalBreakdownError:
                status = -2 - n
                break
            f[n], a[n], s[n] = est.last_f, est.last_a, est.s_n
        else:
            s[n] = (s[n - 1] if n else 0.0) + float(phi @ phi)
            a[n] = policy.weight(s[n])
    return {
        "X": X, "U": U, "pi": pi, "theta_err_sq": err_sq, "f": f, "a": a, "s": s,
        "theta_hat": est.theta_hat, "S_inv": est.S_inv, "status": status,
    }


def run_closed_loop(model: ArxModel, policy: WeightPolicy | None = None,
                    traj: RefTrajectory | None = None, noise: NoiseGen | None = None,
                    N: int = 1000, theta0=None, eps=None, backend=None, adapt=True) -> RunRecord:
    """Simulate ``N`` steps from zero initial conditions.

    ``eps`` may be given explicitly (rows ``eps_0 .. eps_N``); otherwise it is
    drawn from ``noise`` (default: Gaussian with the model's ``Gamma``, seed 0).
    ``backend`` is ``"cython"``, ``"python"`` or ``"reference"``; ``adapt=False``
    freezes the estimate at ``theta0`` and always runs the reference path.
    """
    if N < 1:
        raise RejectedInputError(f"N must be >= 1, got {N}")
    policy = policy or WeightPolicy()
    traj = traj or RefTrajectory()
    d, delta = model.d, model.delta
    if eps is None:
        noise = noise or NoiseGen(model.Gamma)
        eps = noise.draw(N)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (N + 1, d):
        raise RejectedInputError(f"eps must have shape {(N + 1, d)}, got {eps.shape}")
    theta0 = np.zeros((delta, d)) if theta0 is None else np.array(theta0, dtype=np.float64)
    if theta0.shape != (delta, d):
        raise RejectedInputError(f"theta0 must have shape {(delta, d)}, got {theta0.shape}")
    xref = traj.values(N + 2, d)
    name = backend or kernels.BACKEND
    if name == "reference" or not adapt:
        name = "reference"
        out = reference_closed_loop(model, policy, theta0, eps, xref, adapt)
    else:
        out = kernels.get(name)(pack_theta(model), theta0, eps, xref, model.p, model.q,
                                policy.weighted, float(policy.gamma), BLOWUP)
    status = out["status"]
    if status >= 0:
        raise InstabilityError(f"closed loop blew up at step {status} (|X| or |U| > {BLOWUP:g})", step=status)
    if status < -1:
        # only reachable once regressors span ~1e11 in scale, i.e. the loop is diverging
        step = -2 - status
        raise InstabilityError(
            f"closed loop diverging: estimator lost positive definiteness at step {step}", step=step
        ) from NumericalBreakdownError(f"rank-one update breakdown at step {step}")

    est = EstimatorState(delta, d, out["theta_hat"], policy)
    est.S_inv = out["S_inv"]
    est.n = N
    est.s_n = float(out["s"][N - 1])
    est.last_f = float(out["f"][N - 1])
    est.last_a = float(out["a"][N - 1])
    return RunRecord(
        model=model, policy=policy, X=out["X"], U=out["U"], x_ref=xref[: N + 1],
        epsilon=eps, pi=out["pi"], theta_err_sq=out["theta_err_sq"], f=out["f"],
        a=out["a"], s=out["s"], estimator=est, backend=name,
    )

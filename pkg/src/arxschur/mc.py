"""Monte-Carlo harness for the almost-sure and distributional limit theorems."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from . import linalg
from .errors import InstabilityError, RejectedInputError
from .estim import WeightPolicy
from .limit import build_lambda
from .loop import NoiseGen, RefTrajectory, RunRecord, run_closed_loop
from .model import ArxModel, pack_theta

_NORMAL = NormalDist()
HIST_BINS = 40
HIST_RANGE = (-4.0, 4.0)


def default_checkpoints(N: int) -> list[int]:
    return sorted({max(2, (N * 2 ** k) // 16) for k in range(5)})


def empirical_design(record: RunRecord, n: int) -> np.ndarray:
    """``S_n / n`` with ``S_n = sum_{k=0}^n Phi_k Phi_k^T``."""
    if not 1 <= n <= record.N:
        raise RejectedInputError(f"n must lie in [1, {record.N}], got {n}")
    return record.design(n) / n


def cost_matrices(record: RunRecord, n: int):
    """``(C_n, Gamma_n)``: average tracking cost and average noise outer product over ``k = 1..n``."""
    if not 1 <= n <= record.N:
        raise RejectedInputError(f"n must lie in [1, {record.N}], got {n}")
    e = record.X[1:n + 1] - record.x_ref[1:n + 1]
    eps = record.epsilon[1:n + 1]
    return e.T @ e / n, eps.T @ eps / n


def clt_normalize(theta_hat, theta_true, Lambda, Gamma, N) -> np.ndarray:
    """Row-major entries of ``sqrt(N) Lambda^{1/2} (theta_hat - theta) Gamma^{-1/2}``."""
    err = np.asarray(theta_hat, dtype=np.float64) - np.asarray(theta_true, dtype=np.float64)
    z = math.sqrt(N) * linalg.sym_sqrt(Lambda) @ err @ linalg.sym_sqrt(Gamma, inverse_root=True)
    return z.ravel()


def ks_statistic(samples) -> float:
    """Kolmogorov-Smirnov distance between the sample and N(0, 1)."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    m = x.size
    if m == 0:
        raise RejectedInputError("ks_statistic needs at least one sample")
    cdf = np.array([_NORMAL.cdf(v) for v in x])
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - cdf), np.max(cdf - (i - 1) / m)))


def th13_statistic(record: RunRecord, n: int, delta: int, Gamma) -> float:
    """``|| (1/log n) sum_{k=1}^n r_k r_k^T - delta Gamma ||_F`` with ``r_k = X_k - x_k - eps_k``."""
    if not 2 <= n <= record.N:
        raise RejectedInputError(f"n must lie in [2, {record.N}], got {n}")
    r = record.X[1:n + 1] - record.x_ref[1:n + 1] - record.epsilon[1:n + 1]
    return linalg.frobenius(r.T @ r / math.log(n) - delta * np.asarray(Gamma))


def lil_ratio(record: RunRecord) -> float:
    """``max_{N/10 <= n <= N} n ||theta_hat_n - theta||^2 / (2 log log n)``."""
    N = record.N
    if N < 100:
        raise RejectedInputError("the LIL envelope needs N >= 100")
    n = np.arange(max(N // 10, 3), N + 1)
    return float(np.max(n * record.theta_err_sq[n] / (2.0 * np.log(np.log(n)))))


def lil_bounds(Lambda, Gamma):
    wl, _ = linalg.sym_eig(Lambda)
    wg, _ = linalg.sym_eig(Gamma)
    return wg[-1] / wl[0], wg[0] / wl[-1]


def lil_envelope(records, Lambda, Gamma):
    """Median LIL ratio across realizations and the theoretical ``(lower, upper)`` bounds."""
    ratios = [lil_ratio(r) for r in records]
    return float(np.median(ratios)), lil_bounds(Lambda, Gamma)


def design_scale(policy: WeightPolicy, n: int) -> float:
    """Normalization that sends ``S_n(a) / n`` to ``Lambda``: ``(log n)^{1+gamma}`` for WLS, 1 for LS."""
    return math.log(n) ** (1.0 + policy.gamma) if policy.weighted else 1.0


@dataclass
class McSummary:
    M: int
    N: int
    checkpoints: list
    Lambda: np.ndarray
    empirical_Sn_over_n: np.ndarray
    Sn_rel_err: np.ndarray
    Z_samples: np.ndarray
    ks_stats: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    tracking_ratio: np.ndarray
    param_ratio: np.ndarray
    th13_ratio: np.ndarray
    design_dist: np.ndarray
    lil_ratios: np.ndarray
    lil_envelope: float
    lil_bounds: tuple

    def medians(self, field_name: str) -> np.ndarray:
        return np.median(getattr(self, field_name), axis=0)

    def histogram(self):
        """``(edges, counts)`` with ``counts[b, j]`` for bin ``b`` and coordinate ``j``.

        Samples outside the range are clipped into the end bins.
        """
        edges = np.linspace(*HIST_RANGE, HIST_BINS + 1)
        z = np.clip(self.Z_samples, HIST_RANGE[0], HIST_RANGE[1])
        counts = np.stack([np.histogram(z[:, j], bins=edges)[0] for j in range(z.shape[1])], axis=1)
        return edges, counts

    def to_dict(self) -> dict:
        rel = linalg.frobenius(self.empirical_Sn_over_n - self.Lambda) / linalg.frobenius(self.Lambda)
        return {
            "M": self.M,
            "N": self.N,
            "checkpoints": list(self.checkpoints),
            "Lambda": self.Lambda.tolist(),
            "empirical_Sn_over_n": self.empirical_Sn_over_n.tolist(),
            "Sn_mean_rel_err": rel,
            "Sn_median_rel_err": float(np.median(self.Sn_rel_err)),
            "ks_stats": self.ks_stats.tolist(),
            "ks_critical_1pct": 1.63 / math.sqrt(self.M),
            "mean": self.mean.tolist(),
            "var": self.var.tolist(),
            "tracking_ratio_median": self.medians("tracking_ratio").tolist(),
            "param_ratio_median": self.medians("param_ratio").tolist(),
            "th13_median": self.medians("th13_ratio").tolist(),
            "design_dist_median": self.medians("design_dist").tolist(),
            "lil_envelope": self.lil_envelope,
            "lil_bounds": list(self.lil_bounds),
        }


def realization_stats(model, policy, traj, noise_kind, N, seed, stream_id, checkpoints, Lambda,
                      backend=None) -> dict:
    """Run one closed loop and reduce it to the statistics used by :func:`run_montecarlo`."""
    noise = NoiseGen(model.Gamma, seed=seed, stream_id=stream_id, kind=noise_kind)
    try:
        rec = run_closed_loop(model, policy, traj, noise, N, backend=backend)
    except InstabilityError as exc:
        exc.realization = stream_id
        raise
    lam_norm = linalg.frobenius(Lambda)
    sn = empirical_design(rec, N)
    out = {
        "Sn_over_n": sn,
        "Sn_rel_err": linalg.frobenius(sn - Lambda) / lam_norm,
        "theta_hat": rec.theta_hat.copy(),
        "tracking": [], "param": [], "th13": [], "design": [],
        "lil": lil_ratio(rec) if N >= 100 else math.nan,
    }
    for n in checkpoints:
        c, g = cost_matrices(rec, n)
        out["tracking"].append(linalg.frobenius(c - g) * n / math.log(n))
        out["param"].append(rec.theta_err_sq[n] * n / math.log(n))
        out["th13"].append(th13_statistic(rec, n, model.delta, model.Gamma))
        scaled = design_scale(policy, n) * rec.weighted_design(n) / n
        out["design"].append(linalg.frobenius(scaled - Lambda) / lam_norm)
    return out


def _star(args):
    return realization_stats(*args)


def run_montecarlo(model: ArxModel, policy: WeightPolicy | None = None, traj: RefTrajectory | None = None,
                   noise_kind="gaussian_white", M=500, N=1000, base_seed=0, checkpoints=None,
                   n_jobs=1, backend=None) -> McSummary:
    """``M`` independent closed loops on Philox streams ``(base_seed, 0..M-1)``.

    Results are reduced in stream order, so the summary does not depend on ``n_jobs``.
    """
    if M < 2 or N < 2:
        raise RejectedInputError("run_montecarlo needs M >= 2 and N >= 2")
    policy = policy or WeightPolicy()
    traj = traj or RefTrajectory()
    checkpoints = sorted(set(checkpoints or default_checkpoints(N)))
    if checkpoints[0] < 2 or checkpoints[-1] > N:
        raise RejectedInputError(f"checkpoints must lie in [2, {N}]")
    lim = build_lambda(model)
    Lambda = lim.Lambda
    jobs = [(model, policy, traj, noise_kind, N, base_seed, m, checkpoints, Lambda, backend)
            for m in range(M)]
    if n_jobs and n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_star, jobs, chunksize=max(1, M // (4 * n_jobs))))
    else:
        results = [_star(j) for j in jobs]

    theta = pack_theta(model)
    Z = np.stack([clt_normalize(r["theta_hat"], theta, Lambda, model.Gamma, N) for r in results])
    lil = np.array([r["lil"] for r in results])
    return McSummary(
        M=M, N=N, checkpoints=checkpoints, Lambda=Lambda,
        empirical_Sn_over_n=np.mean(np.stack([r["Sn_over_n"] for r in results]), axis=0),
        Sn_rel_err=np.array([r["Sn_rel_err"] for r in results]),
        Z_samples=Z,
        ks_stats=np.array([ks_statistic(Z[:, j]) for j in range(Z.shape[1])]),
        mean=Z.mean(axis=0),
        var=Z.var(axis=0, ddof=1),
        tracking_ratio=np.array([r["tracking"] for r in results]),
        param_ratio=np.array([r["param"] for r in results]),
        th13_ratio=np.array([r["th13"] for r in results]),
        design_dist=np.array([r["design"] for r in results]),
        lil_ratios=lil,
        lil_envelope=float(np.median(lil)) if N >= 100 else math.nan,
        lil_bounds=lil_bounds(Lambda, model.Gamma),
    )

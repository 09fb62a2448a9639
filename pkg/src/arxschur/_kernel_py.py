"""Pure-Python closed-loop kernel (fallback for the compiled ``_kernel``)."""

import math

import numpy as np

from .errors import NumericalBreakdownError
from .estim import rank_one_update


def closed_loop(theta, theta0, eps, xref, p, q, weighted, gamma, blowup):
    """Run ``N = len(eps) - 1`` closed-loop steps from rest.

    ``eps`` has rows ``eps_0 .. eps_N`` (``eps_0`` unused) and ``xref`` rows
    ``x_0 .. x_{N+1}``.  Per-step arrays cover ``n = 0 .. N``; at ``n = N``
    the control, prediction error and leverage are evaluated without
    advancing the system.  ``status`` is ``-1`` on success, otherwise the
    step whose output ``X_{n+1}`` or input ``U_n`` exceeded ``blowup`` in
    norm (or became non-finite), and ``-2 - n`` when the estimator update at
    step ``n`` lost positive definiteness.
    """
    delta, d = theta.shape
    N = eps.shape[0] - 1
    X = np.zeros((N + 1, d))
    U = np.zeros((N + 1, d))
    pi = np.zeros((N + 1, d))
    err_sq = np.zeros(N + 1)
    f = np.zeros(N + 1)
    a_arr = np.zeros(N + 1)
    s_arr = np.zeros(N + 1)
    theta_hat = np.array(theta0, dtype=np.float64)
    S_inv = np.eye(delta)
    phi = np.zeros(delta)
    s = 0.0
    status = -1
    expo = -(1.0 + gamma)
    for n in range(N + 1):
        phi[:] = 0.0
        for i in range(min(p, n + 1)):
            phi[i * d:(i + 1) * d] = X[n - i]
        for j in range(1, min(q, n) + 1):
            phi[(p + j - 1) * d:(p + j) * d] = U[n - j]
        pred_hat = theta_hat.T @ phi
        pred_true = theta.T @ phi
        U[n] = xref[n + 1] - pred_hat
        pi[n] = pred_true - pred_hat
        err_sq[n] = float(np.sum((theta_hat - theta) ** 2))
        s += float(phi @ phi)
        a = math.log(max(s, math.e)) ** expo if weighted else 1.0
        a_arr[n] = a
        s_arr[n] = s
        if n == N:
            g = float(phi @ S_inv @ phi)
            f[n] = a * g / (1.0 + a * g)
            break
        X[n + 1] = pred_true + U[n] + eps[n + 1]
        xn = float(np.sqrt(X[n + 1] @ X[n + 1]))
        un = float(np.sqrt(U[n] @ U[n]))
        if not (xn <= blowup and un <= blowup):
            status = n + 1
            break
        try:
            _, f[n] = rank_one_update(S_inv, theta_hat, phi, X[n + 1] - U[n] - pred_hat, a)
        except NumericalBreakdownError:
            status = -2 - n
            break
    return {
        "X": X, "U": U, "pi": pi, "theta_err_sq": err_sq, "f": f, "a": a_arr, "s": s_arr,
        "theta_hat": theta_hat, "S_inv": S_inv, "status": status,
    }

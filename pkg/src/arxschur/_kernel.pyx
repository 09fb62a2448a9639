# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled closed-loop kernel; same contract as ``_kernel_py.closed_loop``."""

import numpy as np
from libc.math cimport log, pow, sqrt, M_E


def closed_loop(theta, theta0, eps, xref, int p, int q, bint weighted, double gamma, double blowup):
    cdef double[:, ::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef double[:, ::1] E = np.ascontiguousarray(eps, dtype=np.float64)
    cdef double[:, ::1] XR = np.ascontiguousarray(xref, dtype=np.float64)
    cdef Py_ssize_t delta = th.shape[0], d = th.shape[1]
    cdef Py_ssize_t N = E.shape[0] - 1

    X_arr = np.zeros((N + 1, d))
    U_arr = np.zeros((N + 1, d))
    pi_arr = np.zeros((N + 1, d))
    err_arr = np.zeros(N + 1)
    f_arr = np.zeros(N + 1)
    a_arr = np.zeros(N + 1)
    s_arr = np.zeros(N + 1)
    theta_hat_arr = np.array(theta0, dtype=np.float64, order="C", copy=True)
    S_inv_arr = np.eye(delta)

    cdef double[:, ::1] X = X_arr
    cdef double[:, ::1] U = U_arr
    cdef double[:, ::1] PI = pi_arr
    cdef double[::1] err = err_arr
    cdef double[::1] F = f_arr
    cdef double[::1] A = a_arr
    cdef double[::1] Sn = s_arr
    cdef double[:, ::1] th_hat = theta_hat_arr
    cdef double[:, ::1] S_inv = S_inv_arr

    cdef double[::1] phi = np.zeros(delta)
    cdef double[::1] s_phi = np.zeros(delta)
    cdef double[::1] pred_hat = np.zeros(d)
    cdef double[::1] pred_true = np.zeros(d)
    cdef double[::1] innov = np.zeros(d)

    cdef Py_ssize_t n, i, j, r, c, idx
    cdef double s = 0.0, a, g, denom, acc, acc2, diff, xn, un, coef
    cdef double expo = -(1.0 + gamma)
    cdef long status = -1

    for n in range(N + 1):
        for r in range(delta):
            phi[r] = 0.0
        for i in range(p):
            idx = n - i
            if idx < 0:
                break
            for c in range(d):
                phi[i * d + c] = X[idx, c]
        for j in range(1, q + 1):
            idx = n - j
            if idx < 0:
                break
            for c in range(d):
                phi[(p + j - 1) * d + c] = U[idx, c]

        acc2 = 0.0
        for c in range(d):
            acc = 0.0
            coef = 0.0
            for r in range(delta):
                acc = acc + th_hat[r, c] * phi[r]
                coef = coef + th[r, c] * phi[r]
                diff = th_hat[r, c] - th[r, c]
                acc2 = acc2 + diff * diff
            pred_hat[c] = acc
            pred_true[c] = coef
            U[n, c] = XR[n + 1, c] - acc
            PI[n, c] = coef - acc
        err[n] = acc2

        acc = 0.0
        for r in range(delta):
            acc = acc + phi[r] * phi[r]
        s = s + acc
        if weighted:
            a = pow(log(s if s > M_E else M_E), expo)
        else:
            a = 1.0
        A[n] = a
        Sn[n] = s

        g = 0.0
        for r in range(delta):
            acc = 0.0
            for c in range(delta):
                acc = acc + S_inv[r, c] * phi[c]
            s_phi[r] = acc
            g = g + phi[r] * acc
        denom = 1.0 + a * g
        if n == N:
            F[n] = a * g / denom
            break

        xn = 0.0
        un = 0.0
        for c in range(d):
            X[n + 1, c] = pred_true[c] + U[n, c] + E[n + 1, c]
            xn = xn + X[n + 1, c] * X[n + 1, c]
            un = un + U[n, c] * U[n, c]
        if not (sqrt(xn) <= blowup and sqrt(un) <= blowup):
            status = n + 1
            break
        if not denom > 0.0:
            status = -2 - n
            break

        coef = a / denom
        for r in range(delta):
            for c in range(delta):
                S_inv[r, c] = S_inv[r, c] - coef * (s_phi[r] * s_phi[c])
        for c in range(d):
            innov[c] = X[n + 1, c] - U[n, c] - pred_hat[c]
        for r in range(delta):
            acc = coef * s_phi[r]
            for c in range(d):
                th_hat[r, c] = th_hat[r, c] + acc * innov[c]
        F[n] = a * g / denom

    return {
        "X": X_arr, "U": U_arr, "pi": pi_arr, "theta_err_sq": err_arr, "f": f_arr,
        "a": a_arr, "s": s_arr, "theta_hat": theta_hat_arr, "S_inv": S_inv_arr,
        "status": int(status),
    }

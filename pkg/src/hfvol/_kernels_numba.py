"""JIT-compiled twins of the kernels in ``_kernels``.

Same signatures, same recursions written as explicit loops. Imported only
when the numba backend is enabled (see ``_backend``).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ._kernels import CIR1_INIT, CIR2_INIT, GARCH_INIT, LOG85, LOG_VOL_INIT, LOGLIN_SCALE


@njit(cache=True)
def _s_exp(u):
    if u <= LOG85:
        return math.exp(u)
    return 8.5 * math.sqrt(1.0 - LOG85 + u * u / LOG85)


@njit(cache=True)
def _fill_diag(diag, x1, v1a, v2a, g3, v1b, v2b, theta_scaled):
    q = x1.shape[0]
    for i in range(q):
        diag[i] = math.exp(x1[i]) * theta_scaled[i]
        diag[q + i] = 0.98 * (v1a[i] + v2a[i]) * theta_scaled[q + i]
        diag[2 * q + i] = g3[i] * theta_scaled[2 * q + i]
        diag[3 * q + i] = (
            LOGLIN_SCALE * _s_exp(0.04 * v1b[i] + 1.5 * v2b[i] - 1.2) * theta_scaled[3 * q + i]
        )


@njit(cache=True)
def _fill_gamma(gamma, kp, diag, kappa):
    p = diag.shape[0]
    kp[0] = 1.0
    for d in range(1, p):
        kp[d] = kp[d - 1] * kappa
    for i in range(p):
        gamma[i, i] = diag[i]
    for i in range(p):
        si = math.sqrt(diag[i])
        for j in range(i + 1, p):
            v = si * math.sqrt(diag[j]) * kp[j - i]
            gamma[i, j] = v
            gamma[j, i] = v


@njit(cache=True)
def sim_paths(dt, u0, theta_scaled, d_w_kappa, d_b, d_w1, d_w2, stride):
    L = d_w_kappa.shape[0]
    p = theta_scaled.shape[0]
    q = p // 4

    kappa_path = np.empty(L)
    diag_vols = np.empty((L, p))
    log_prices = np.empty((L, p))
    gamma_sum = np.zeros((p, p))

    u = u0
    kappa = math.tanh(u)
    x1 = np.full(q, LOG_VOL_INIT)
    v1a = np.full(q, CIR1_INIT)
    v2a = np.full(q, CIR2_INIT)
    g3 = np.full(q, GARCH_INIT)
    v1b = np.zeros(q)
    v2b = np.zeros(q)

    diag = np.empty(p)
    kp = np.empty(p)
    gamma = np.empty((p, p))
    _fill_diag(diag, x1, v1a, v2a, g3, v1b, v2b, theta_scaled)
    _fill_gamma(gamma, kp, diag, kappa)
    x = np.zeros(p)
    retained = 0

    for l in range(L):
        chol = np.linalg.cholesky(gamma)
        x = x + np.dot(chol, d_b[l])
        for i in range(p):
            log_prices[l, i] = x[i]

        u = u + 0.03 * (0.64 - u) * dt + 0.118 * u * d_w_kappa[l]
        kappa = math.tanh(u)
        for i in range(q):
            x1[i] = x1[i] + (-0.6) * (0.157 + x1[i]) * dt + 0.25 * d_w1[l, i]
            v = v1a[i] + 0.0429 * (0.108 - v1a[i]) * dt + 0.1539 * math.sqrt(v1a[i]) * d_w1[l, q + i]
            v1a[i] = v if v > 0.0 else 0.0
            v = v2a[i] + 3.74 * (0.401 - v2a[i]) * dt + 1.4369 * math.sqrt(v2a[i]) * d_w2[l, q + i]
            v2a[i] = v if v > 0.0 else 0.0
            g3[i] = g3[i] + (0.1 - g3[i]) * dt + 0.2 * g3[i] * d_w1[l, 2 * q + i]
            v1b[i] = v1b[i] + (-0.00137) * v1b[i] * dt + d_w1[l, 3 * q + i]
            v2b[i] = v2b[i] + (-1.386) * v2b[i] * dt + (1.0 + 0.25 * v2b[i]) * d_w2[l, 3 * q + i]

        _fill_diag(diag, x1, v1a, v2a, g3, v1b, v2b, theta_scaled)
        kappa_path[l] = kappa
        for i in range(p):
            diag_vols[l, i] = diag[i]
        _fill_gamma(gamma, kp, diag, kappa)
        if (l + 1) % stride == 0:
            for i in range(p):
                for j in range(p):
                    gamma_sum[i, j] += gamma[i, j]
            retained += 1

    return kappa_path, diag_vols, log_prices, gamma_sum, retained


@njit(cache=True)
def block3_batch(dt, scale, d_b, d_w1):
    R, L = d_b.shape
    log_prices = np.empty((R, L))
    vols = np.empty((R, L))
    for r in range(R):
        g = GARCH_INIT
        x = 0.0
        for l in range(L):
            x = x + math.sqrt(g * scale) * d_b[r, l]
            g = g + (0.1 - g) * dt + 0.2 * g * d_w1[r, l]
            log_prices[r, l] = x
            vols[r, l] = g * scale
    return log_prices, vols

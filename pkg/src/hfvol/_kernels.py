"""Pure-numpy path-simulation kernels (fallback backend).

Each public function here has a JIT-compiled twin in ``_kernels_numba``
implementing the same recursion step for step. Keep the arithmetic
expressions in the two modules literally aligned: within a backend results
are bit-reproducible, and across backends they agree to the last ulps of
the transcendental functions.

All random increments are drawn by the caller; the kernels are pure
deterministic arithmetic.
"""

from __future__ import annotations

import math

import numpy as np

# Drift fixed points used as initial states, and model constants shared by
# both backends.
LOG_VOL_INIT = -0.157  # geometric OU block, log-volatility fixed point
CIR1_INIT = 0.108
CIR2_INIT = 0.401
GARCH_INIT = 0.1
LOGLIN_SCALE = math.exp(-6.8753)
LOG85 = math.log(8.5)


def s_exp_scalar(u: float) -> float:
    """Spliced exponential: e^u below log(8.5), square-root growth above."""
    if u <= LOG85:
        return math.exp(u)
    return 8.5 * math.sqrt(1.0 - LOG85 + u * u / LOG85)


def _s_exp_vec(u):
    out = np.empty_like(u)
    small = u <= LOG85
    out[small] = np.exp(u[small])
    big = ~small
    ub = u[big]
    out[big] = 8.5 * np.sqrt(1.0 - LOG85 + ub * ub / LOG85)
    return out


def _diag_from_states(x1, v1a, v2a, g3, v1b, v2b, theta_scaled):
    """Assemble the p instantaneous variances from the four block states."""
    q = x1.shape[0]
    d = np.empty(4 * q)
    d[:q] = np.exp(x1)
    d[q : 2 * q] = 0.98 * (v1a + v2a)
    d[2 * q : 3 * q] = g3
    d[3 * q :] = LOGLIN_SCALE * _s_exp_vec(0.04 * v1b + 1.5 * v2b - 1.2)
    d *= theta_scaled
    return d


def _gamma_from(diag, kappa, didx):
    """Correlation-scaled covariance: sqrt(d_i d_j) * kappa^{|i-j|}."""
    p = diag.shape[0]
    kp = np.empty(p)
    kp[0] = 1.0
    if p > 1:
        kp[1:] = np.cumprod(np.full(p - 1, kappa))
    sd = np.sqrt(diag)
    return (sd[:, None] * sd[None, :]) * kp[didx]


def sim_paths(dt, u0, theta_scaled, d_w_kappa, d_b, d_w1, d_w2, stride):
    """Joint Euler recursion for the correlation process, the four
    stochastic-volatility blocks, and the latent log prices.

    Parameters
    ----------
    dt : float
        Step size, 1/L.
    u0 : float
        Initial state of the correlation driver (atanh of kappa(0)).
    theta_scaled : (p,) ndarray
        Per-asset variance scale (1000 * theta_i).
    d_w_kappa : (L,) ndarray
        Increments of the correlation driver's Brownian motion.
    d_b, d_w1, d_w2 : (L, p) ndarrays
        Increments of the price Brownian motions and of the two leveraged
        volatility Brownian motions.
    stride : int
        Every ``stride``-th step's covariance enters the running truth sum.

    Returns
    -------
    kappa_path : (L,) ndarray
    diag_vols : (L, p) ndarray
    log_prices : (L, p) ndarray
    gamma_sum : (p, p) ndarray
        Sum of the covariance matrices at the retained steps.
    retained : int
        Number of retained steps.
    """
    L = d_w_kappa.shape[0]
    p = theta_scaled.shape[0]
    q = p // 4
    ar = np.arange(p)
    didx = np.abs(ar[:, None] - ar[None, :])

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

    diag = _diag_from_states(x1, v1a, v2a, g3, v1b, v2b, theta_scaled)
    gamma = _gamma_from(diag, kappa, didx)
    x = np.zeros(p)
    retained = 0

    for l in range(L):
        chol = np.linalg.cholesky(gamma)
        x = x + chol @ d_b[l]
        log_prices[l] = x

        u = u + 0.03 * (0.64 - u) * dt + 0.118 * u * d_w_kappa[l]
        kappa = math.tanh(u)
        x1 = x1 + (-0.6) * (0.157 + x1) * dt + 0.25 * d_w1[l, :q]
        v = v1a + 0.0429 * (0.108 - v1a) * dt + 0.1539 * np.sqrt(v1a) * d_w1[l, q : 2 * q]
        v1a = np.maximum(v, 0.0)
        v = v2a + 3.74 * (0.401 - v2a) * dt + 1.4369 * np.sqrt(v2a) * d_w2[l, q : 2 * q]
        v2a = np.maximum(v, 0.0)
        g3 = g3 + (0.1 - g3) * dt + 0.2 * g3 * d_w1[l, 2 * q : 3 * q]
        v1b = v1b + (-0.00137) * v1b * dt + d_w1[l, 3 * q :]
        v2b = v2b + (-1.386) * v2b * dt + (1.0 + 0.25 * v2b) * d_w2[l, 3 * q :]

        diag = _diag_from_states(x1, v1a, v2a, g3, v1b, v2b, theta_scaled)
        kappa_path[l] = kappa
        diag_vols[l] = diag
        gamma = _gamma_from(diag, kappa, didx)
        if (l + 1) % stride == 0:
            gamma_sum += gamma
            retained += 1

    return kappa_path, diag_vols, log_prices, gamma_sum, retained


def block3_batch(dt, scale, d_b, d_w1):
    """Batch of independent single-asset paths under the GARCH-diffusion
    volatility block.

    Parameters
    ----------
    dt : float
    scale : float
        Variance scale (1000 * theta).
    d_b, d_w1 : (R, L) ndarrays
        Per-path increments of the price and (leveraged) volatility
        Brownian motions.

    Returns
    -------
    log_prices : (R, L) ndarray
    vols : (R, L) ndarray
        Scaled instantaneous variances at steps 1..L.
    """
    R, L = d_b.shape
    log_prices = np.empty((R, L))
    vols = np.empty((R, L))
    g = np.full(R, GARCH_INIT)
    x = np.zeros(R)
    for l in range(L):
        x = x + np.sqrt(g * scale) * d_b[:, l]
        g = g + (0.1 - g) * dt + 0.2 * g * d_w1[:, l]
        log_prices[:, l] = x
        vols[:, l] = g * scale
    return log_prices, vols

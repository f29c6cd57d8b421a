"""Monte Carlo generative engine for noisy high-frequency price panels.

The latent log prices follow a zero-drift diffusion whose instantaneous
covariance couples four families of stochastic volatility (geometric OU,
sum of two square-root factors, GARCH-diffusion limit, two-factor
log-linear) through a common correlation process kappa(t), with leverage
wiring between the price and volatility Brownian motions. Observations are
the latent prices plus i.i.d. Gaussian noise, optionally desynchronized by
keeping one of every three time points per asset at random.

All randomness is drawn from streams derived from the config seed by
purpose, so runs are reproducible and independent repetitions (seeded via
:func:`hfvol.harness.derive_rep_seed`) are order-independent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ._backend import kernels
from ._kernels import (
    CIR1_INIT,
    CIR2_INIT,
    GARCH_INIT,
    LOG_VOL_INIT,
    LOGLIN_SCALE,
    s_exp_scalar,
    _s_exp_vec,
)
from .estimator import VolMatrix
from .panel import Panel, TickSeries

NOISE_MULTIPLIERS = {"low": 0.002, "medium": 0.127, "high": 0.2}
SYNC_MODES = ("synchronized", "nonsynchronized")
RHO_BLOCKS = (-0.62, -0.50, -0.25, -0.30)

# purpose codes for seed-derived RNG streams
_KAPPA_DRIVER = 0
_ASSET_BM = 1
_VOL_FACTOR_1 = 2
_VOL_FACTOR_2 = 3
_NOISE = 4
_DESYNC = 5


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def default_theta(p: int) -> np.ndarray:
    """Deterministic decreasing variance-scale profile, 2e-4 * i^-0.3."""
    return 2e-4 * np.arange(1, p + 1) ** -0.3


def default_asset_ids(p: int) -> tuple[str, ...]:
    return tuple(f"a{i:04d}" for i in range(p))


def load_theta_csv(path) -> np.ndarray:
    """One positive value per line (an optional non-numeric header is skipped)."""
    vals = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            s = line.strip()
            if not s:
                continue
            try:
                vals.append(float(s.split(",")[-1]))
            except ValueError:
                if i == 0:
                    continue
                raise ValueError(f"{path}: cannot parse theta value {s!r}") from None
    if not vals:
        raise ValueError(f"{path}: no theta values")
    return np.asarray(vals)


@dataclass(frozen=True)
class SimConfig:
    """Full parameterization of one simulated trading day.

    ``p`` must be divisible by 4 (the four volatility blocks), ``n`` is the
    target number of observations per asset, ``kappa0`` the initial value
    of the correlation process, and ``theta`` the per-asset variance scale
    (defaults to :func:`default_theta`). Noise standard deviations are
    ``multiplier(noise_level) * sqrt(theta_i)``.
    """

    p: int
    n: int
    kappa0: float
    noise_level: str = "low"
    theta: np.ndarray | None = None
    sync_mode: str = "synchronized"
    seed: int = 0

    def __post_init__(self):
        if self.p <= 0 or self.p % 4 != 0:
            raise ValueError(f"p must be a positive multiple of 4, got {self.p}")
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if not abs(self.kappa0) < 1:
            raise ValueError(f"|kappa0| must be < 1, got {self.kappa0}")
        if self.noise_level not in NOISE_MULTIPLIERS:
            raise ValueError(f"noise_level must be one of {sorted(NOISE_MULTIPLIERS)}")
        if self.sync_mode not in SYNC_MODES:
            raise ValueError(f"sync_mode must be one of {SYNC_MODES}")
        theta = default_theta(self.p) if self.theta is None else np.asarray(self.theta, dtype=np.float64)
        if theta.shape != (self.p,):
            raise ValueError(f"theta must have length p={self.p}")
        if np.any(theta <= 0):
            raise ValueError("theta must be strictly positive")
        theta = theta.copy()
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def rho(self) -> np.ndarray:
        """Per-asset leverage, constant on each quartile block."""
        return np.repeat(RHO_BLOCKS, self.p // 4)

    @property
    def n_steps(self) -> int:
        return self.n if self.sync_mode == "synchronized" else 3 * self.n


def sim_config_from_json(path) -> SimConfig:
    """Build a :class:`SimConfig` from a JSON file.

    Recognized keys mirror the field names (``p``, ``n``, ``kappa0``,
    ``noise_level``, ``sync_mode``, ``seed``) plus ``theta`` (list of p
    values) or ``theta_csv`` (path to a one-column file).
    """
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    theta = None
    if raw.get("theta") is not None:
        theta = np.asarray(raw["theta"], dtype=np.float64)
    elif raw.get("theta_csv"):
        theta = load_theta_csv(raw["theta_csv"])
    return SimConfig(
        p=int(raw["p"]),
        n=int(raw["n"]),
        kappa0=float(raw["kappa0"]),
        noise_level=raw.get("noise_level", "low"),
        theta=theta,
        sync_mode=raw.get("sync_mode", "synchronized"),
        seed=int(raw.get("seed", 0)),
    )


@dataclass(frozen=True)
class PathBundle:
    """Simulated paths on the step grid t_l = l/L, l = 1..L."""

    kappa_path: np.ndarray
    diag_vols: np.ndarray
    log_prices: np.ndarray
    noisy_prices: np.ndarray
    step_times: np.ndarray

    def __post_init__(self):
        kp = np.asarray(self.kappa_path)
        dv = np.asarray(self.diag_vols)
        L = kp.shape[0]
        p = dv.shape[0]
        if dv.shape != (p, L) or self.log_prices.shape != (p, L) or self.noisy_prices.shape != (p, L):
            raise ValueError("inconsistent path array shapes")
        if self.step_times.shape != (L,):
            raise ValueError("step_times must have length L")
        if not np.all(np.abs(kp) < 1.0):
            raise ValueError("kappa path escaped (-1, 1)")
        if not np.all(dv > 0.0):
            raise ValueError("diagonal volatilities must stay positive")
        for name in ("kappa_path", "diag_vols", "log_prices", "noisy_prices", "step_times"):
            a = np.asarray(getattr(self, name))
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def p(self) -> int:
        return int(self.diag_vols.shape[0])

    @property
    def n_steps(self) -> int:
        return int(self.kappa_path.shape[0])


@dataclass(frozen=True)
class TruthBundle:
    """Ground-truth integrated volatility matrix of a simulated day."""

    gamma_truth: VolMatrix


def kappa_from_u(u: float) -> float:
    """Map the latent driver to a correlation in (-1, 1): tanh(u)."""
    return math.tanh(u)


def s_exp(u):
    """Spliced exponential used by the log-linear volatility block.

    Equal to e^u for u <= log(8.5) and to 8.5*sqrt(1 - log(8.5) +
    u^2/log(8.5)) above, which matches e^u at the splice point. Accepts a
    scalar or an ndarray.
    """
    if np.ndim(u) == 0:
        return s_exp_scalar(float(u))
    return _s_exp_vec(np.asarray(u, dtype=np.float64))


def simulate_kappa_path(kappa0: float, L: int, kappa_driver_increments) -> np.ndarray:
    """Euler path of the correlation process from its driver increments.

    The driver mean-reverts at rate 0.03 toward 0.64 with multiplicative
    diffusion 0.118*u; the correlation is tanh of the driver. The initial
    driver state is atanh(kappa0).
    """
    if not abs(kappa0) < 1:
        raise ValueError("|kappa0| must be < 1")
    dw = np.asarray(kappa_driver_increments, dtype=np.float64)
    if dw.shape != (L,):
        raise ValueError(f"need exactly L={L} driver increments")
    dt = 1.0 / L
    u = math.atanh(kappa0)
    out = np.empty(L)
    for l in range(L):
        u = u + 0.03 * (0.64 - u) * dt + 0.118 * u * dw[l]
        out[l] = math.tanh(u)
    return out


def make_kappa_increments(d_w0, d_b) -> np.ndarray:
    """Combine the idiosyncratic driver and the price Brownian motions.

    sqrt(0.96) * dW0 - 0.2 * sum_i dB_i / sqrt(p); the weights make the
    result a standard Brownian motion (0.96 + 0.2^2 = 1).
    """
    d_b = np.asarray(d_b)
    p = d_b.shape[0]
    return math.sqrt(0.96) * np.asarray(d_w0) - 0.2 * d_b.sum(axis=0) / math.sqrt(p)


def make_leverage_increments(config: SimConfig, d_b, d_u) -> np.ndarray:
    """Volatility Brownian increments correlated with the price ones:
    rho_i * dB_i + sqrt(1 - rho_i^2) * dU_i, rowwise over assets."""
    rho = config.rho[:, None]
    return rho * np.asarray(d_b) + np.sqrt(1.0 - rho**2) * np.asarray(d_u)


def initial_diag(config: SimConfig) -> np.ndarray:
    """Initial instantaneous variances: each block starts at its drift
    fixed point (zero for the log-linear factors), scaled by 1000*theta."""
    q = config.p // 4
    d = np.empty(config.p)
    d[:q] = math.exp(LOG_VOL_INIT)
    d[q : 2 * q] = 0.98 * (CIR1_INIT + CIR2_INIT)
    d[2 * q : 3 * q] = GARCH_INIT
    d[3 * q :] = LOGLIN_SCALE * s_exp_scalar(-1.2)
    return d * (1000.0 * config.theta)


def simulate_diag_vols(config: SimConfig, d_w1, d_w2) -> np.ndarray:
    """Euler paths of the four diagonal volatility blocks.

    ``d_w1``/``d_w2`` are the (p, L) leveraged Brownian increments from
    :func:`make_leverage_increments`. Square-root factors use fully
    truncated Euler steps (the negative part is clipped in both the state
    and the square root). Output is (p, L), scaled by 1000*theta.
    """
    w1 = np.asarray(d_w1, dtype=np.float64)
    w2 = np.asarray(d_w2, dtype=np.float64)
    p = config.p
    q = p // 4
    if w1.shape != w2.shape or w1.ndim != 2 or w1.shape[0] != p:
        raise ValueError("increment arrays must both be (p, L)")
    L = w1.shape[1]
    dt = 1.0 / L
    theta_scaled = 1000.0 * config.theta

    x1 = np.full(q, LOG_VOL_INIT)
    v1a = np.full(q, CIR1_INIT)
    v2a = np.full(q, CIR2_INIT)
    g3 = np.full(q, GARCH_INIT)
    v1b = np.zeros(q)
    v2b = np.zeros(q)
    out = np.empty((p, L))
    for l in range(L):
        x1 = x1 + (-0.6) * (0.157 + x1) * dt + 0.25 * w1[:q, l]
        v = v1a + 0.0429 * (0.108 - v1a) * dt + 0.1539 * np.sqrt(v1a) * w1[q : 2 * q, l]
        v1a = np.maximum(v, 0.0)
        v = v2a + 3.74 * (0.401 - v2a) * dt + 1.4369 * np.sqrt(v2a) * w2[q : 2 * q, l]
        v2a = np.maximum(v, 0.0)
        g3 = g3 + (0.1 - g3) * dt + 0.2 * g3 * w1[2 * q : 3 * q, l]
        v1b = v1b + (-0.00137) * v1b * dt + w1[3 * q :, l]
        v2b = v2b + (-1.386) * v2b * dt + (1.0 + 0.25 * v2b) * w2[3 * q :, l]
        out[:q, l] = np.exp(x1)
        out[q : 2 * q, l] = 0.98 * (v1a + v2a)
        out[2 * q : 3 * q, l] = g3
        out[3 * q :, l] = LOGLIN_SCALE * _s_exp_vec(0.04 * v1b + 1.5 * v2b - 1.2)
    return out * theta_scaled[:, None]


def build_gamma(diag, kappa: float) -> np.ndarray:
    """Instantaneous covariance from its diagonal and the correlation level.

    Off-diagonal (i, j) is kappa^{|i-j|} * sqrt(diag_i * diag_j): a
    positive-definite matrix D^{1/2} R D^{1/2} with R the power-decay
    Toeplitz correlation, for any |kappa| < 1.
    """
    d = np.asarray(diag, dtype=np.float64)
    if not abs(kappa) < 1:
        raise ValueError("|kappa| must be < 1")
    if np.any(d <= 0):
        raise ValueError("diagonal must be strictly positive")
    p = d.shape[0]
    kp = np.empty(p)
    kp[0] = 1.0
    if p > 1:
        kp[1:] = np.cumprod(np.full(p - 1, float(kappa)))
    ar = np.arange(p)
    sd = np.sqrt(d)
    return (sd[:, None] * sd[None, :]) * kp[np.abs(ar[:, None] - ar[None, :])]


def cholesky_factor(gamma) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T equal to the input.

    Non-positive-definite input is a hard error naming the first failing
    leading minor; matrices from :func:`build_gamma` are always positive
    definite, so failure signals a bug upstream.
    """
    g = np.asarray(gamma, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("need a square matrix")
    if not np.array_equal(g, g.T):
        raise ValueError("need an exactly symmetric matrix")
    try:
        return np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        order = g.shape[0]
        for k in range(1, g.shape[0] + 1):
            try:
                np.linalg.cholesky(g[:k, :k])
            except np.linalg.LinAlgError:
                order = k
                break
        raise ValueError(
            f"matrix is not positive definite: leading minor of order {order} is not positive"
        ) from None


def simulate_prices(config: SimConfig, diag_vols, kappa_path, d_b) -> np.ndarray:
    """Latent log prices from the volatility paths and price increments.

    X(0) = 0 per asset; each step adds the Cholesky factor of the previous
    step's covariance applied to that step's Brownian increments. The
    covariance at step l is rebuilt from ``diag_vols[:, l-1]`` and
    ``kappa_path[l-1]`` (the initial state comes from the config), so this
    standalone routine reproduces the fused simulation kernel exactly.
    """
    dv = np.asarray(diag_vols, dtype=np.float64)
    kp = np.asarray(kappa_path, dtype=np.float64)
    db = np.asarray(d_b, dtype=np.float64)
    p, L = dv.shape
    if kp.shape != (L,) or db.shape != (p, L):
        raise ValueError("inconsistent path/increment shapes")
    x = np.zeros(p)
    out = np.empty((p, L))
    diag = initial_diag(config)
    kappa = config.kappa0
    for l in range(L):
        gamma = build_gamma(diag, kappa)
        x = x + np.linalg.cholesky(gamma) @ db[:, l]
        out[:, l] = x
        diag = dv[:, l]
        kappa = float(kp[l])
    return out


def add_noise(log_prices, config: SimConfig, rng: np.random.Generator | None = None,
              multiplier: float | None = None) -> np.ndarray:
    """Observed prices: latent prices plus i.i.d. Gaussian noise.

    Noise is independent across assets and times and of every price-driving
    draw; the per-asset standard deviation is multiplier * sqrt(theta_i).
    ``multiplier`` overrides the config's noise level (0 gives Y = X).
    """
    x = np.asarray(log_prices, dtype=np.float64)
    if multiplier is None:
        multiplier = NOISE_MULTIPLIERS[config.noise_level]
    if rng is None:
        rng = _stream(config.seed, _NOISE)
    std = multiplier * np.sqrt(config.theta)
    return x + std[:, None] * rng.standard_normal(x.shape)


def integrated_truth(gamma_sum, n_retained: int, asset_ids=None) -> TruthBundle:
    """Ground truth as the entrywise mean of the retained covariance matrices."""
    vals = np.asarray(gamma_sum, dtype=np.float64) / n_retained
    if np.any(np.diag(vals) <= 0):
        raise ValueError("truth matrix has a nonpositive diagonal entry")
    meta = {"n_retained": int(n_retained)}
    if asset_ids is not None:
        meta["asset_ids"] = tuple(asset_ids)
    return TruthBundle(gamma_truth=VolMatrix(vals, "truth", meta))


def simulate_paths(config: SimConfig) -> tuple[PathBundle, TruthBundle]:
    """Run the full path engine for one day.

    Synchronized mode simulates L = n steps and retains every step for the
    truth; nonsynchronized mode simulates L = 3n steps and retains every
    third. Covariance matrices are accumulated streaming inside the kernel
    rather than stored per step.
    """
    p, n = config.p, config.n
    L = config.n_steps
    stride = 1 if config.sync_mode == "synchronized" else 3
    dt = 1.0 / L
    sq = math.sqrt(dt)

    d_w0 = _stream(config.seed, _KAPPA_DRIVER).standard_normal(L) * sq
    d_b = _stream(config.seed, _ASSET_BM).standard_normal((p, L)) * sq
    d_u1 = _stream(config.seed, _VOL_FACTOR_1).standard_normal((p, L)) * sq
    d_u2 = _stream(config.seed, _VOL_FACTOR_2).standard_normal((p, L)) * sq

    d_wk = make_kappa_increments(d_w0, d_b)
    d_w1 = make_leverage_increments(config, d_b, d_u1)
    d_w2 = make_leverage_increments(config, d_b, d_u2)

    kappa_path, diag_vols, log_prices, gamma_sum, retained = kernels.sim_paths(
        dt,
        math.atanh(config.kappa0),
        1000.0 * np.asarray(config.theta),
        d_wk,
        np.ascontiguousarray(d_b.T),
        np.ascontiguousarray(d_w1.T),
        np.ascontiguousarray(d_w2.T),
        stride,
    )
    if retained != n:
        raise RuntimeError(f"truth grid retained {retained} steps, expected {n}")

    x = np.ascontiguousarray(log_prices.T)
    y = add_noise(x, config)
    bundle = PathBundle(
        kappa_path=kappa_path,
        diag_vols=np.ascontiguousarray(diag_vols.T),
        log_prices=x,
        noisy_prices=y,
        step_times=np.arange(1, L + 1) / L,
    )
    truth = integrated_truth(gamma_sum, retained, asset_ids=default_asset_ids(p))
    return bundle, truth


def desynchronize(bundle: PathBundle, config: SimConfig,
                  rng: np.random.Generator | None = None) -> Panel:
    """Panel of nonsynchronized observations from a 3n-step bundle.

    The 3n steps split into n consecutive groups of three; each asset keeps
    one uniformly chosen time per group, independently across assets and
    groups, ending with exactly n observations per asset.
    """
    n = config.n
    if bundle.n_steps != 3 * n:
        raise ValueError(f"bundle has {bundle.n_steps} steps, expected 3n = {3 * n}")
    if rng is None:
        rng = _stream(config.seed, _DESYNC)
    choices = rng.integers(0, 3, size=(bundle.p, n))
    base = 3 * np.arange(n)
    ids = default_asset_ids(bundle.p)
    assets = []
    for i in range(bundle.p):
        sel = base + choices[i]
        assets.append(TickSeries(ids[i], bundle.step_times[sel], bundle.noisy_prices[i, sel]))
    return Panel(tuple(assets))


def _sync_panel(bundle: PathBundle) -> Panel:
    ids = default_asset_ids(bundle.p)
    assets = tuple(
        TickSeries(ids[i], bundle.step_times, bundle.noisy_prices[i]) for i in range(bundle.p)
    )
    return Panel(assets)


def simulate_scenario(config: SimConfig) -> tuple[Panel, TruthBundle]:
    """One simulated day: observation panel plus ground-truth matrix.

    Deterministic given the config (including its seed); reruns are
    bit-identical within a kernel backend.
    """
    bundle, truth = simulate_paths(config)
    if config.sync_mode == "synchronized":
        panel = _sync_panel(bundle)
    else:
        panel = desynchronize(bundle, config)
    return panel, truth


def simulate_daily_panels(config: SimConfig, days: int) -> list[tuple[Panel, TruthBundle]]:
    """A sequence of independent daily scenarios with per-day derived seeds."""
    out = []
    for d in range(days):
        day_seed = int(np.random.SeedSequence(entropy=config.seed, spawn_key=(d,)).generate_state(1, np.uint64)[0])
        out.append(simulate_scenario(replace(config, seed=day_seed)))
    return out


def simulate_block3_batch(n_obs: int, n_paths: int, theta0: float, noise_std: float,
                          seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Independent single-asset days under the GARCH-diffusion block.

    Used by the convergence-rate study: one asset, n_obs synchronized
    observations per path, leverage -0.25, variance scale 1000*theta0.

    Returns
    -------
    times : (n_obs,) ndarray
    noisy_prices : (n_paths, n_obs) ndarray
    truths : (n_paths,) ndarray
        Integrated volatility of each path on the observation grid.
    """
    L = int(n_obs)
    R = int(n_paths)
    dt = 1.0 / L
    sq = math.sqrt(dt)
    rho = RHO_BLOCKS[2]
    d_b = np.empty((R, L))
    d_u1 = np.empty((R, L))
    noise = np.empty((R, L))
    for r in range(R):
        d_b[r] = _stream(seed, r, _ASSET_BM).standard_normal(L) * sq
        d_u1[r] = _stream(seed, r, _VOL_FACTOR_1).standard_normal(L) * sq
        noise[r] = _stream(seed, r, _NOISE).standard_normal(L)
    d_w1 = rho * d_b + math.sqrt(1.0 - rho**2) * d_u1
    x, vols = kernels.block3_batch(dt, 1000.0 * theta0, d_b, d_w1)
    y = x + noise_std * noise
    times = np.arange(1, L + 1) / L
    return times, y, vols.mean(axis=1)

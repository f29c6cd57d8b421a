"""Monte Carlo studies: MSE tables, oracle regularizer selection,
convergence-rate slopes, the random-matrix sanity check, the permutation
experiment, and threshold calibration on simulated multi-day panels.

Repetition seeds are derived from the master seed by repetition index, so
cells of a study share common random numbers and aggregation order never
affects results.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .estimator import VolMatrix, arvm_estimate
from .panel import Panel, TickSeries
from .regularize import (
    CalibrationResult,
    band,
    calibrate_threshold_lambda,
    eigen_diagnostics,
    operator_norm,
    quantile_threshold,
    threshold,
)
from .simulate import (
    SimConfig,
    default_theta,
    simulate_block3_batch,
    simulate_daily_panels,
    simulate_scenario,
)

ESTIMATORS = ("arvm", "barvm", "tarvm")
K_RULES = ("n_two_thirds", "n_one_third")


def derive_rep_seed(master_seed: int, rep: int) -> int:
    """Order-independent per-repetition seed from the master seed."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(rep,))
    return int(ss.generate_state(1, np.uint64)[0])


def default_b_grid(p: int) -> tuple[int, ...]:
    """Geometric band-width grid with both endpoints: 0, 1, 2, 4, ..., p-1."""
    grid = [0, 1]
    b = 2
    while b < p - 1:
        grid.append(b)
        b *= 2
    grid.append(p - 1)
    return tuple(sorted(set(g for g in grid if 0 <= g <= p - 1)))


def default_a_grid() -> tuple[float, ...]:
    """Quantile levels 0.50, 0.55, ..., 0.95 plus 0.99."""
    return tuple(np.round(np.arange(0.50, 0.96, 0.05), 2)) + (0.99,)


def mse_l2(estimate: VolMatrix, truth: VolMatrix) -> float:
    """Squared spectral norm of the estimation error."""
    if estimate.p != truth.p:
        raise ValueError(f"dimension mismatch: {estimate.p} vs {truth.p}")
    return operator_norm(estimate.values - truth.values, 2) ** 2


def select_band_oracle(estimate: VolMatrix, truth: VolMatrix, b_grid) -> tuple[int, float]:
    """Exhaustive band-width search against the truth; ties take the
    smaller (sparser) width."""
    grid = sorted(set(int(b) for b in b_grid))
    if not grid:
        raise ValueError("b_grid must be nonempty")
    best_b, best = grid[0], math.inf
    for b in grid:
        err = mse_l2(band(estimate, b), truth)
        if err < best:
            best_b, best = b, err
    return best_b, best


def select_threshold_oracle(estimate: VolMatrix, truth: VolMatrix, a_grid) -> tuple[float, float, float]:
    """Exhaustive search over quantile-level thresholds; ties take the
    larger (sparser) level. Returns (threshold, level, mse)."""
    levels = sorted(float(a) for a in a_grid)
    if not levels:
        raise ValueError("a_grid must be nonempty")
    best_w, best_a, best = 0.0, levels[0], math.inf
    for a in levels:
        w = quantile_threshold(estimate, a)
        err = mse_l2(threshold(estimate, w), truth)
        if err <= best:
            best_w, best_a, best = w, a, err
    return best_w, best_a, best


@dataclass(frozen=True)
class ExperimentConfig:
    """Factor grid and scale of an MSE study."""

    p: int = 64
    n: int = 200
    kappa0_grid: tuple = (0.537, 0.762, 0.905, 0.964, 0.980, 0.995)
    noise_levels: tuple = ("low",)
    K_list: tuple = (1, 5)
    repetitions: int = 50
    estimators: tuple = ESTIMATORS
    sync_mode: str = "synchronized"
    seed: int = 0
    b_grid: tuple | None = None
    a_grid: tuple | None = None
    theta: np.ndarray | None = None

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.kappa0_grid or not self.noise_levels or not self.K_list:
            raise ValueError("factor grids must be nonempty")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimators: {sorted(unknown)}")
        for K in self.K_list:
            if (self.n // K) * K > self.n:
                raise ValueError("m*K must not exceed n")

    def resolved_b_grid(self) -> tuple[int, ...]:
        return tuple(self.b_grid) if self.b_grid is not None else default_b_grid(self.p)

    def resolved_a_grid(self) -> tuple[float, ...]:
        return tuple(self.a_grid) if self.a_grid is not None else default_a_grid()


def experiment_config_from_json(path) -> ExperimentConfig:
    """Load an :class:`ExperimentConfig` from JSON keys mirroring the fields."""
    import json

    from .simulate import load_theta_csv

    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    theta = None
    if raw.get("theta") is not None:
        theta = np.asarray(raw["theta"], dtype=np.float64)
    elif raw.get("theta_csv"):
        theta = load_theta_csv(raw["theta_csv"])
    kwargs = {}
    for key in ("p", "n", "repetitions", "seed"):
        if key in raw:
            kwargs[key] = int(raw[key])
    for key, cast in (
        ("kappa0_grid", float),
        ("noise_levels", str),
        ("K_list", int),
        ("estimators", str),
        ("a_grid", float),
        ("b_grid", int),
    ):
        if raw.get(key) is not None:
            kwargs[key] = tuple(cast(x) for x in raw[key])
    if "sync_mode" in raw:
        kwargs["sync_mode"] = raw["sync_mode"]
    return ExperimentConfig(theta=theta, **kwargs)


@dataclass(frozen=True)
class MseRow:
    """One aggregated cell of an MSE study."""

    noise_level: str
    estimator: str
    K: int
    kappa0: float
    mse: float
    mc_se: float
    err_l2: float
    b_star: float | None = None
    w_star: float | None = None
    a_star: float | None = None
    failures: int = 0


@dataclass(frozen=True)
class MseTable:
    """Aggregated Monte Carlo MSEs keyed by (noise level, estimator, K, kappa0)."""

    rows: tuple
    repetitions: int
    p: int
    n: int
    sync_mode: str
    seed: int

    def row(self, noise_level: str, estimator: str, K: int, kappa0: float) -> MseRow:
        for r in self.rows:
            if (
                r.noise_level == noise_level
                and r.estimator == estimator
                and r.K == K
                and abs(r.kappa0 - kappa0) < 1e-12
            ):
                return r
        raise KeyError((noise_level, estimator, K, kappa0))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["noise_level", "estimator", "K", "kappa0", "mse", "mc_se", "err_l2",
                 "b_star", "w_star", "a_star", "failures"]
            )
            for r in self.rows:
                writer.writerow(
                    [r.noise_level, r.estimator, r.K, r.kappa0, repr(r.mse), repr(r.mc_se),
                     repr(r.err_l2),
                     "" if r.b_star is None else repr(r.b_star),
                     "" if r.w_star is None else repr(r.w_star),
                     "" if r.a_star is None else repr(r.a_star),
                     r.failures]
                )

    def summary(self) -> str:
        headers = ["noise", "estimator", "K", "kappa0", "mse", "mc_se", "sel"]
        rows = []
        for r in self.rows:
            sel = ""
            if r.b_star is not None:
                sel = f"b*={r.b_star:g}"
            elif r.a_star is not None:
                sel = f"a*={r.a_star:g}"
            rows.append(
                [r.noise_level, r.estimator, str(r.K), f"{r.kappa0:g}",
                 f"{r.mse:.4g}", f"{r.mc_se:.2g}", sel]
            )
        return format_table(headers, rows)


def format_table(headers, rows) -> str:
    """Aligned fixed-width text table."""
    cols = [headers] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cols) for i in range(len(headers))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in cols[1:]:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)


def _estimate_cell(panel, truth_vm, m, estimators, b_grid, a_grid):
    """Per-repetition errors for one (panel, K) combination."""
    est, _ = arvm_estimate(panel, m)
    out = {}
    if "arvm" in estimators:
        out["arvm"] = (mse_l2(est, truth_vm), None, None, None)
    if "barvm" in estimators:
        b_star, err = select_band_oracle(est, truth_vm, b_grid)
        out["barvm"] = (err, float(b_star), None, None)
    if "tarvm" in estimators:
        w_star, a_star, err = select_threshold_oracle(est, truth_vm, a_grid)
        out["tarvm"] = (err, None, w_star, a_star)
    return out


def run_mse_study(config: ExperimentConfig) -> MseTable:
    """Monte Carlo MSE study over the config's factor grid.

    Each repetition simulates one day per (kappa0, noise level) cell and
    evaluates every K and estimator on it, with band widths and thresholds
    selected by oracle against the known truth. Failures in single
    repetitions are counted per cell and the study continues.
    """
    b_grid = config.resolved_b_grid()
    a_grid = config.resolved_a_grid()
    errors: dict[tuple, list] = {}
    params: dict[tuple, list] = {}
    failures: dict[tuple, int] = {}

    for rep in range(config.repetitions):
        rep_seed = derive_rep_seed(config.seed, rep)
        for kappa0 in config.kappa0_grid:
            for noise in config.noise_levels:
                sim = SimConfig(
                    p=config.p, n=config.n, kappa0=kappa0, noise_level=noise,
                    theta=config.theta, sync_mode=config.sync_mode, seed=rep_seed,
                )
                try:
                    panel, truth = simulate_scenario(sim)
                except Exception:
                    for K in config.K_list:
                        for est_name in config.estimators:
                            failures[(noise, est_name, K, kappa0)] = (
                                failures.get((noise, est_name, K, kappa0), 0) + 1
                            )
                    continue
                for K in config.K_list:
                    m = config.n // K
                    try:
                        cell = _estimate_cell(
                            panel, truth.gamma_truth, m, config.estimators, b_grid, a_grid
                        )
                    except Exception:
                        for est_name in config.estimators:
                            failures[(noise, est_name, K, kappa0)] = (
                                failures.get((noise, est_name, K, kappa0), 0) + 1
                            )
                        continue
                    for est_name, (err, b_star, w_star, a_star) in cell.items():
                        key = (noise, est_name, K, kappa0)
                        errors.setdefault(key, []).append(err)
                        params.setdefault(key, []).append((b_star, w_star, a_star))

    rows = []
    for noise in config.noise_levels:
        for est_name in config.estimators:
            for K in config.K_list:
                for kappa0 in config.kappa0_grid:
                    key = (noise, est_name, K, kappa0)
                    errs = np.asarray(errors.get(key, []))
                    if errs.size == 0:
                        continue
                    sel = params[key]
                    b_med = w_med = a_med = None
                    if est_name == "barvm":
                        b_med = float(np.median([s[0] for s in sel]))
                    if est_name == "tarvm":
                        w_med = float(np.median([s[1] for s in sel]))
                        a_med = float(np.median([s[2] for s in sel]))
                    se = float(np.std(errs, ddof=1) / math.sqrt(errs.size)) if errs.size > 1 else 0.0
                    rows.append(
                        MseRow(
                            noise_level=noise, estimator=est_name, K=K, kappa0=kappa0,
                            mse=float(errs.mean()), mc_se=se,
                            err_l2=float(np.sqrt(errs).mean()),
                            b_star=b_med, w_star=w_med, a_star=a_med,
                            failures=failures.get(key, 0),
                        )
                    )
    return MseTable(
        rows=tuple(rows), repetitions=config.repetitions, p=config.p, n=config.n,
        sync_mode=config.sync_mode, seed=config.seed,
    )


# ---------------------------------------------------------------------------
# permutation experiment

def permute_panel(panel: Panel, perm) -> Panel:
    """Reorder the panel's assets by the given permutation."""
    perm = np.asarray(perm)
    assets = tuple(panel.assets[i] for i in perm)
    return Panel(assets, time_mapping=panel.time_mapping)


def permute_matrix(matrix: VolMatrix, perm) -> VolMatrix:
    """Apply the same permutation to rows and columns."""
    perm = np.asarray(perm)
    values = matrix.values[np.ix_(perm, perm)]
    meta = dict(matrix.meta)
    if "asset_ids" in meta:
        meta["asset_ids"] = tuple(meta["asset_ids"][i] for i in perm)
    return VolMatrix(values, matrix.kind, meta)


@dataclass(frozen=True)
class PermutationRow:
    estimator: str
    K: int
    kappa0: float
    noise_level: str
    mse_base: float
    mse_permuted: float
    ratio: float
    max_rel_dev: float


@dataclass(frozen=True)
class PermutationReport:
    rows: tuple
    repetitions: int

    def row(self, estimator: str) -> PermutationRow:
        for r in self.rows:
            if r.estimator == estimator:
                return r
        raise KeyError(estimator)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["estimator", "K", "kappa0", "noise_level", "mse_base", "mse_permuted",
                 "ratio", "max_rel_dev"]
            )
            for r in self.rows:
                writer.writerow(
                    [r.estimator, r.K, r.kappa0, r.noise_level, repr(r.mse_base),
                     repr(r.mse_permuted), repr(r.ratio), repr(r.max_rel_dev)]
                )

    def summary(self) -> str:
        headers = ["estimator", "K", "kappa0", "mse_base", "mse_perm", "ratio"]
        rows = [
            [r.estimator, str(r.K), f"{r.kappa0:g}", f"{r.mse_base:.4g}",
             f"{r.mse_permuted:.4g}", f"{r.ratio:.3g}"]
            for r in self.rows
        ]
        return format_table(headers, rows)


_PERM_PURPOSE = 101


def run_permutation_study(config: ExperimentConfig) -> PermutationReport:
    """Joint random row/column shuffles of panel and truth with identical draws.

    A permuted asset list leaves the sparsity of the truth unchanged but
    destroys its decay away from the diagonal, so banding degrades while
    quantile thresholding is exactly equivariant.
    """
    b_grid = config.resolved_b_grid()
    a_grid = config.resolved_a_grid()
    kappa0 = config.kappa0_grid[0]
    noise = config.noise_levels[0]
    K = config.K_list[0]
    m = config.n // K

    acc: dict[str, list] = {"barvm": [], "tarvm": []}
    for rep in range(config.repetitions):
        rep_seed = derive_rep_seed(config.seed, rep)
        sim = SimConfig(
            p=config.p, n=config.n, kappa0=kappa0, noise_level=noise,
            theta=config.theta, sync_mode=config.sync_mode, seed=rep_seed,
        )
        panel, truth = simulate_scenario(sim)
        perm_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=rep_seed, spawn_key=(_PERM_PURPOSE,))
        )
        perm = perm_rng.permutation(config.p)
        panel_p = permute_panel(panel, perm)
        truth_p = permute_matrix(truth.gamma_truth, perm)

        base = _estimate_cell(panel, truth.gamma_truth, m, ("barvm", "tarvm"), b_grid, a_grid)
        shuf = _estimate_cell(panel_p, truth_p, m, ("barvm", "tarvm"), b_grid, a_grid)
        for name in ("barvm", "tarvm"):
            acc[name].append((base[name][0], shuf[name][0]))

    rows = []
    for name in ("barvm", "tarvm"):
        pairs = np.asarray(acc[name])
        base_mean = float(pairs[:, 0].mean())
        perm_mean = float(pairs[:, 1].mean())
        rel_dev = np.abs(pairs[:, 1] - pairs[:, 0]) / np.abs(pairs[:, 0])
        rows.append(
            PermutationRow(
                estimator=name, K=K, kappa0=kappa0, noise_level=noise,
                mse_base=base_mean, mse_permuted=perm_mean,
                ratio=perm_mean / base_mean, max_rel_dev=float(rel_dev.max()),
            )
        )
    return PermutationReport(rows=tuple(rows), repetitions=config.repetitions)


# ---------------------------------------------------------------------------
# convergence-rate study

@dataclass(frozen=True)
class ConvergenceSpec:
    """Design of a single-asset convergence-rate study.

    ``K_rule`` picks the subsampling scale: ``n_two_thirds`` (for noisy
    data, medium noise injected, target slope -1/6) or ``n_one_third``
    (noiseless, target slope -1/3).
    """

    n_list: tuple = (256, 512, 1024, 2048, 4096)
    K_rule: str = "n_two_thirds"
    reps_per_n: int = 200
    target_slope: float | None = None
    theta0: float = float(default_theta(1)[0])
    seed: int = 0

    def __post_init__(self):
        if self.K_rule not in K_RULES:
            raise ValueError(f"K_rule must be one of {K_RULES}")
        ns = tuple(int(n) for n in self.n_list)
        if len(ns) < 4:
            raise ValueError("n_list needs at least 4 sizes")
        for a, b in zip(ns, ns[1:]):
            if b < 2 * a:
                raise ValueError("n_list must increase by factors >= 2")
        object.__setattr__(self, "n_list", ns)
        if self.target_slope is None:
            target = -1.0 / 6.0 if self.K_rule == "n_two_thirds" else -1.0 / 3.0
            object.__setattr__(self, "target_slope", target)

    @property
    def noise_std(self) -> float:
        if self.K_rule == "n_two_thirds":
            return 0.127 * math.sqrt(self.theta0)
        return 0.0

    def K_for(self, n: int) -> int:
        exponent = 2.0 / 3.0 if self.K_rule == "n_two_thirds" else 1.0 / 3.0
        return max(1, round(n**exponent))


@dataclass(frozen=True)
class ConvergenceReport:
    n_list: tuple
    K_used: tuple
    m_used: tuple
    median_errors: tuple
    slope: float
    target_slope: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "K", "m", "median_abs_error"])
            for n, K, m, e in zip(self.n_list, self.K_used, self.m_used, self.median_errors):
                writer.writerow([n, K, m, repr(e)])
            writer.writerow([])
            writer.writerow(["slope", repr(self.slope)])
            writer.writerow(["target_slope", repr(self.target_slope)])

    def summary(self) -> str:
        headers = ["n", "K", "m", "median_err"]
        rows = [
            [str(n), str(K), str(m), f"{e:.4g}"]
            for n, K, m, e in zip(self.n_list, self.K_used, self.m_used, self.median_errors)
        ]
        table = format_table(headers, rows)
        return f"{table}\nfitted slope {self.slope:.4f} (target {self.target_slope:.4f})"


def run_convergence_study(spec: ConvergenceSpec) -> ConvergenceReport:
    """Median single-asset estimation error against sample size, log-log slope.

    For each n, simulates ``reps_per_n`` single-asset days, estimates the
    integrated volatility with m = floor(n / K(n)), and fits a least-squares
    line to log(median absolute error) against log(n).
    """
    medians = []
    K_used = []
    m_used = []
    for n in spec.n_list:
        K = spec.K_for(n)
        m = n // K
        times, noisy, truths = simulate_block3_batch(
            n, spec.reps_per_n, spec.theta0, spec.noise_std, spec.seed
        )
        errs = np.empty(spec.reps_per_n)
        for r in range(spec.reps_per_n):
            panel = Panel((TickSeries("a0000", times, noisy[r]),))
            est, _ = arvm_estimate(panel, m)
            errs[r] = abs(est.values[0, 0] - truths[r])
        medians.append(float(np.median(errs)))
        K_used.append(K)
        m_used.append(m)
    slope = float(np.polyfit(np.log(spec.n_list), np.log(medians), 1)[0])
    return ConvergenceReport(
        n_list=tuple(spec.n_list), K_used=tuple(K_used), m_used=tuple(m_used),
        median_errors=tuple(medians), slope=slope, target_slope=spec.target_slope,
    )


# ---------------------------------------------------------------------------
# random-matrix sanity experiment

@dataclass(frozen=True)
class MpReport:
    n: int
    p: int
    repetitions: int
    mean_largest: float
    reference: float
    largest_per_rep: tuple

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rep", "largest_eigenvalue"])
            for r, v in enumerate(self.largest_per_rep):
                writer.writerow([r, repr(v)])
            writer.writerow([])
            writer.writerow(["mean_largest", repr(self.mean_largest)])
            writer.writerow(["reference", repr(self.reference)])

    def summary(self) -> str:
        return (
            f"sample covariance of iid normal returns, p={self.p} n={self.n} "
            f"reps={self.repetitions}\nmean largest eigenvalue {self.mean_largest:.4f} "
            f"vs (1+sqrt(p/n))^2 = {self.reference:.4f}"
        )


def run_mp_sanity(n: int, p: int, reps: int, seed: int = 0) -> MpReport:
    """Largest eigenvalue of the idealized realized matrix under iid noise-free
    unit-volatility returns, against the high-dimensional limit (1+sqrt(p/n))^2.

    With truth equal to the identity, the excess of the largest eigenvalue
    over 1 is pure dimensionality distortion and motivates regularization.
    """
    largest = []
    for rep in range(reps):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(rep,)))
        z = rng.standard_normal((p, n))
        g = (z @ z.T) / n
        largest.append(float(np.linalg.eigvalsh(g)[-1]))
    c = p / n
    return MpReport(
        n=n, p=p, repetitions=reps,
        mean_largest=float(np.mean(largest)),
        reference=(1.0 + math.sqrt(c)) ** 2,
        largest_per_rep=tuple(largest),
    )


# ---------------------------------------------------------------------------
# threshold-calibration demo

@dataclass(frozen=True)
class CalibrationDemoReport:
    calibration: CalibrationResult
    days: tuple
    largest_raw: tuple
    largest_thresholded: tuple

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["day", "largest_raw_truncated", "largest_thresholded_truncated"])
            for d, lr, lt in zip(self.days, self.largest_raw, self.largest_thresholded):
                writer.writerow([d, repr(lr), repr(lt)])

    def summary(self) -> str:
        headers = ["day", "largest_raw", "largest_thresholded"]
        rows = [
            [str(d), f"{lr:.5g}", f"{lt:.5g}"]
            for d, lr, lt in zip(self.days, self.largest_raw, self.largest_thresholded)
        ]
        table = format_table(headers, rows)
        return f"selected a* = {self.calibration.a_star:g}\n{table}"


def run_calibration_demo(panels, m: int, a_grid) -> CalibrationDemoReport:
    """Daily ARVM estimates, quantile-level calibration, and the per-day
    largest truncated eigenvalues of the raw vs. thresholded matrices."""
    panels = list(panels)
    if len(panels) < 2:
        raise ValueError("need at least 2 daily panels")
    daily = [arvm_estimate(p, m)[0] for p in panels]
    calib = calibrate_threshold_lambda(daily, a_grid)
    raw = []
    thr = []
    for vm in daily:
        raw.append(float(eigen_diagnostics(vm).truncated[0]))
        w = quantile_threshold(vm, calib.a_star)
        thr.append(float(eigen_diagnostics(threshold(vm, w)).truncated[0]))
    return CalibrationDemoReport(
        calibration=calib,
        days=tuple(range(1, len(daily) + 1)),
        largest_raw=tuple(raw),
        largest_thresholded=tuple(thr),
    )


def make_daily_panels(config: SimConfig, days: int) -> list[Panel]:
    """Independent daily panels for the calibration demo."""
    return [panel for panel, _ in simulate_daily_panels(config, days)]

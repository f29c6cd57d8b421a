"""Banding/thresholding regularizers, matrix norms, threshold calibration.

An unregularized realized volatility matrix is inconsistent when the number
of assets grows with the sample size; banding suits matrices whose entries
decay away from the diagonal, thresholding suits sparse matrices with
unknown support. Threshold levels are calibrated from a sequence of daily
estimates by minimizing one-day-ahead prediction error in spectral norm.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .estimator import VolMatrix


@dataclass(frozen=True)
class RegSpec:
    """Exactly one regularization mode: band width, threshold, or quantile level."""

    band_width: int | None = None
    threshold: float | None = None
    quantile_level: float | None = None

    def __post_init__(self):
        set_modes = sum(x is not None for x in (self.band_width, self.threshold, self.quantile_level))
        if set_modes != 1:
            raise ValueError("exactly one of band_width, threshold, quantile_level must be set")
        if self.band_width is not None and self.band_width < 0:
            raise ValueError("band width must be nonnegative")
        if self.threshold is not None and self.threshold < 0:
            raise ValueError("threshold must be nonnegative")
        if self.quantile_level is not None and not 0.0 < self.quantile_level < 1.0:
            raise ValueError("quantile level must be in (0, 1)")


def band(matrix: VolMatrix, b: int) -> VolMatrix:
    """Keep entries within |i-j| <= b of the diagonal, zero the rest.

    ``b >= p-1`` is the identity transform.
    """
    if b < 0:
        raise ValueError("band width must be nonnegative")
    p = matrix.p
    idx = np.arange(p)
    keep = np.abs(idx[:, None] - idx[None, :]) <= b
    values = np.where(keep, matrix.values, 0.0)
    return VolMatrix(values, "banded", {**matrix.meta, "b": int(b)})


def threshold(matrix: VolMatrix, w: float, keep_diagonal: bool = False) -> VolMatrix:
    """Keep entries with |value| >= w (inclusive), zero the rest.

    Applies to all entries, diagonal included; pass ``keep_diagonal=True``
    to exempt the diagonal.
    """
    if w < 0:
        raise ValueError("threshold must be nonnegative")
    keep = np.abs(matrix.values) >= w
    if keep_diagonal:
        keep[np.diag_indices(matrix.p)] = True
    values = np.where(keep, matrix.values, 0.0)
    return VolMatrix(values, "thresholded", {**matrix.meta, "threshold": float(w)})


def quantile_threshold(matrix: VolMatrix, a: float) -> float:
    """The a-quantile of the p^2 absolute entries.

    Inverse empirical CDF convention: the smallest entry value v with
    (fraction of entries <= v) >= a, i.e. the ceil(a*N)-th order statistic.
    """
    if not 0.0 < a < 1.0:
        raise ValueError("quantile level must be in (0, 1)")
    flat = np.sort(np.abs(matrix.values), axis=None)
    n = flat.shape[0]
    # tiny slop so an exactly integer a*n does not tip to the next statistic
    rank = int(math.ceil(a * n - 1e-9))
    rank = min(max(rank, 1), n)
    return float(flat[rank - 1])


def operator_norm(matrix, d) -> float:
    """Matrix norm induced by the vector l_d norm, d in {1, 2, inf}.

    d=1 is the max absolute column sum, d=inf the max absolute row sum.
    d=2 is the square root of the largest eigenvalue of U U^T: computed via
    symmetric eigendecomposition for exactly symmetric input, singular
    values otherwise.
    """
    u = np.asarray(matrix, dtype=np.float64)
    if u.ndim != 2:
        raise ValueError("operator_norm expects a 2-d matrix")
    if d == 1:
        return float(np.abs(u).sum(axis=0).max())
    if d in (np.inf, "inf", float("inf")):
        return float(np.abs(u).sum(axis=1).max())
    if d == 2:
        try:
            if u.shape[0] == u.shape[1] and np.array_equal(u, u.T):
                return float(np.abs(np.linalg.eigvalsh(u)).max())
            return float(np.linalg.svd(u, compute_uv=False)[0])
        except np.linalg.LinAlgError as err:
            raise np.linalg.LinAlgError(
                f"spectral norm failed to converge for {u.shape[0]}x{u.shape[1]} matrix: {err}"
            ) from err
    raise ValueError(f"unsupported norm order {d!r}; use 1, 2 or inf")


@dataclass(frozen=True)
class EigenDiagnostics:
    """Spectrum of a symmetric matrix, with negatives truncated at zero."""

    eigenvalues: np.ndarray
    truncated: np.ndarray

    @property
    def largest(self) -> float:
        return float(self.eigenvalues[0])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rank", "eigenvalue", "truncated"])
            for r, (ev, tv) in enumerate(zip(self.eigenvalues, self.truncated)):
                writer.writerow([r, repr(float(ev)), repr(float(tv))])


def eigen_diagnostics(matrix: VolMatrix) -> EigenDiagnostics:
    """Full spectrum in descending order plus its negatives-at-zero truncation."""
    try:
        ev = np.linalg.eigvalsh(matrix.values)[::-1]
    except np.linalg.LinAlgError as err:
        raise np.linalg.LinAlgError(
            f"eigendecomposition failed for {matrix.p}x{matrix.p} matrix: {err}"
        ) from err
    return EigenDiagnostics(eigenvalues=ev.copy(), truncated=np.maximum(ev, 0.0))


@dataclass(frozen=True)
class CalibrationResult:
    """Outcome of quantile-level calibration over a matrix sequence."""

    a_star: float
    lambda_values: dict

    def __post_init__(self):
        if self.a_star not in self.lambda_values:
            raise ValueError("a_star must be one of the evaluated levels")
        lo = min(self.lambda_values.values())
        if self.lambda_values[self.a_star] != lo:
            raise ValueError("a_star must attain the minimum of the lambda map")
        if any(v < 0 for v in self.lambda_values.values()):
            raise ValueError("prediction errors must be nonnegative")
        object.__setattr__(self, "lambda_values", dict(self.lambda_values))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["a", "lambda"])
            for a in sorted(self.lambda_values):
                writer.writerow([repr(float(a)), repr(float(self.lambda_values[a]))])


def calibrate_threshold_lambda(sequence, a_grid) -> CalibrationResult:
    """Pick the quantile level minimizing one-day-ahead prediction error.

    For each level a, thresholds day i's matrix at its own a-quantile and
    scores the squared spectral norm of the difference from day i+1's
    matrix, summed over consecutive pairs. Ties break toward larger a
    (the sparser model).
    """
    matrices = list(sequence)
    if len(matrices) < 2:
        raise ValueError("need at least 2 matrices to calibrate")
    dim = matrices[0].p
    if any(m.p != dim for m in matrices):
        raise ValueError("all matrices must have the same dimension")
    levels = sorted(float(a) for a in a_grid)
    if not levels:
        raise ValueError("a_grid must be nonempty")

    lam: dict[float, float] = {}
    for a in levels:
        total = 0.0
        for cur, nxt in zip(matrices[:-1], matrices[1:]):
            w = quantile_threshold(cur, a)
            pred = threshold(cur, w)
            total += operator_norm(nxt.values - pred.values, 2) ** 2
        lam[a] = total

    best_a = levels[0]
    for a in levels[1:]:
        if lam[a] <= lam[best_a]:
            best_a = a
    return CalibrationResult(a_star=best_a, lambda_values=lam)

"""Averaged realized volatility matrix (ARVM) estimation.

The estimator aligns nonsynchronized assets on each pre-sampling grid via
previous ticks, forms per-grid realized co-volatility matrices, averages
them over the K grid classes, and subtracts the microstructure-noise bias
2*m*eta_i from each diagonal entry. The diagonal entries coincide with the
two-scale realized volatility of the individual assets. The result is not
guaranteed positive semidefinite; see ``regularize.eigen_diagnostics``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .grids import GridSpec, SyncTable, make_grids, resolve_previous_ticks
from .panel import Panel, TickSeries

VOL_KINDS = ("per_grid", "averaged", "arvm", "banded", "thresholded", "truth")


@dataclass(frozen=True)
class VolMatrix:
    """A symmetric p x p volatility matrix with provenance metadata.

    ``kind`` records where the matrix came from (one of ``VOL_KINDS``) and
    ``meta`` carries the estimation parameters that produced it (m, K,
    band width, threshold, asset ids, ... as applicable). Symmetry is exact
    by construction and verified here.
    """

    values: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("values must be a square matrix")
        if not np.all(np.isfinite(v)):
            raise ValueError("matrix entries must be finite")
        if not np.array_equal(v, v.T):
            raise ValueError("matrix must be exactly symmetric")
        if self.kind not in VOL_KINDS:
            raise ValueError(f"unknown matrix kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def p(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class NoiseVarianceVector:
    """Per-asset microstructure noise variance estimates (nonnegative)."""

    eta_hat: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.eta_hat, dtype=np.float64)
        if e.ndim != 1:
            raise ValueError("eta_hat must be 1-d")
        if not np.all(np.isfinite(e)) or np.any(e < 0):
            raise ValueError("noise variances must be finite and nonnegative")
        e.setflags(write=False)
        object.__setattr__(self, "eta_hat", e)


def _mirror_upper(v: np.ndarray) -> np.ndarray:
    """Exactly symmetric copy: upper triangle mirrored onto the lower."""
    out = np.triu(v, 1)
    return out + out.T + np.diag(np.diag(v))


def _grid_increments(panel: Panel, sync: SyncTable, k: int) -> np.ndarray:
    """(p, m) previous-tick price increments on grid class k.

    Increments whose left endpoint precedes the asset's first tick are
    zeroed (the previous-tick value is undefined there, matching the
    zero-term convention for empty grid intervals).
    """
    if not 1 <= k <= sync.K:
        raise ValueError(f"grid class k must be in 1..{sync.K}, got {k}")
    p, m = sync.p, sync.m
    out = np.empty((p, m))
    for i, s in enumerate(panel.assets):
        prices = s.log_prices[sync.indices[i, k - 1]]
        d = prices[1:] - prices[:-1]
        d[sync.flags[i, k - 1, :-1]] = 0.0
        out[i] = d
    return out


def realized_covol(panel: Panel, i: int, j: int, sync: SyncTable, k: int) -> float:
    """Previous-tick realized co-volatility of assets i and j on grid class k.

    Sum over the m grid intervals of the products of the two assets'
    previous-tick price increments; repeated previous-tick indices yield
    zero increments automatically.
    """
    d = _grid_increments(panel, sync, k)
    return float(d[i] @ d[j])


def realized_matrix(panel: Panel, sync: SyncTable, k: int) -> VolMatrix:
    """Realized volatility matrix on a single grid class (exactly symmetric)."""
    d = _grid_increments(panel, sync, k)
    values = _mirror_upper(d @ d.T)
    meta = {"m": sync.m, "k": k, "asset_ids": panel.asset_ids}
    return VolMatrix(values, "per_grid", meta)


def avg_realized_matrix(panel: Panel, grid: GridSpec, sync: SyncTable | None = None) -> VolMatrix:
    """Mean of the K per-grid realized matrices (fixed ascending-k order)."""
    if sync is None:
        sync = resolve_previous_ticks(panel, grid)
    acc = np.zeros((panel.p, panel.p))
    for k in range(1, grid.K + 1):
        acc += realized_matrix(panel, sync, k).values
    acc /= grid.K
    meta = {"m": grid.m, "K": grid.K, "asset_ids": panel.asset_ids}
    return VolMatrix(acc, "averaged", meta)


def noise_variance(series: TickSeries) -> float:
    """Noise variance from consecutive squared returns.

    With N observations there are N-1 consecutive differences; the divisor
    2(N-1) makes the estimate unbiased for pure i.i.d. noise regardless of
    sample size.
    """
    d = np.diff(series.log_prices)
    return float(d @ d) / (2.0 * d.shape[0])


def noise_variances(panel: Panel) -> NoiseVarianceVector:
    """Per-asset noise variances, in panel order."""
    return NoiseVarianceVector(np.array([noise_variance(s) for s in panel.assets]))


def arvm_estimate(panel: Panel, m: int) -> tuple[VolMatrix, NoiseVarianceVector]:
    """ARVM estimate of the integrated volatility matrix at grid size m.

    Builds the K = floor(n/m) grid classes from the panel's average sample
    size, averages the per-grid realized matrices, and subtracts 2*m*eta_i
    from diagonal entry i only. Off-diagonals are left untouched. The
    output may have negative eigenvalues.
    """
    n = panel.avg_sample_size
    grid = make_grids(n, m)
    sync = resolve_previous_ticks(panel, grid)
    avg = avg_realized_matrix(panel, grid, sync=sync)
    eta = noise_variances(panel)
    values = avg.values.copy()
    idx = np.diag_indices(panel.p)
    values[idx] = values[idx] - 2.0 * m * eta.eta_hat
    meta = {"m": m, "K": grid.K, "asset_ids": panel.asset_ids}
    return VolMatrix(values, "arvm", meta), eta


# ---------------------------------------------------------------------------
# serialization

def write_matrix_csv(matrix: VolMatrix, path) -> None:
    """Dense CSV: one header row of asset ids, then p rows of p values."""
    ids = matrix.meta.get("asset_ids") or [f"a{i}" for i in range(matrix.p)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ids)
        for row in matrix.values:
            writer.writerow([repr(float(x)) for x in row])


def read_matrix_csv(path, kind: str = "arvm") -> VolMatrix:
    """Read a dense matrix CSV written by :func:`write_matrix_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if len(rows) < 2:
        raise ValueError(f"matrix file {path} has no data rows")
    ids = tuple(h.strip() for h in rows[0])
    values = np.array([[float(x) for x in row] for row in rows[1:]])
    if values.shape != (len(ids), len(ids)):
        raise ValueError(
            f"matrix file {path}: expected {len(ids)}x{len(ids)} values, got {values.shape}"
        )
    return VolMatrix(values, kind, {"asset_ids": ids})


def write_matrix_triplets(matrix: VolMatrix, path) -> None:
    """Sparse triplet CSV ``i,j,value`` of the nonzero entries (0-based)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "value"])
        nz = np.nonzero(matrix.values)
        for i, j in zip(*nz):
            writer.writerow([int(i), int(j), repr(float(matrix.values[i, j]))])


def write_noise_csv(noise: NoiseVarianceVector, path, asset_ids=None) -> None:
    """Two-column CSV ``asset_id,eta_hat``."""
    ids = asset_ids if asset_ids is not None else [f"a{i}" for i in range(noise.eta_hat.shape[0])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["asset_id", "eta_hat"])
        for aid, e in zip(ids, noise.eta_hat):
            writer.writerow([aid, repr(float(e))])

"""Pre-sampling grids and previous-tick resolution.

For a grid size m and average sample size n there are K = floor(n/m)
nonoverlapping regular grid classes; class k consists of the anchor point
(k-1)/n followed by r/m + (k-1)/n for r = 1..m. Points of classes k > 1
can exceed 1 and are clamped to the last observation at lookup time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .panel import Panel


@dataclass(frozen=True)
class GridSpec:
    """K = floor(n/m) shifted regular grids of m intervals each."""

    n: int
    m: int

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError(f"grid size m must be positive, got {self.m}")
        if self.m > self.n:
            raise ValueError(f"grid size m={self.m} exceeds average sample size n={self.n}")

    @property
    def K(self) -> int:
        return self.n // self.m

    def grid_points(self, k: int, r: int) -> float:
        """Point r (0..m) of grid class k (1..K); r=0 is the class anchor."""
        self._check_k(k)
        if not 0 <= r <= self.m:
            raise ValueError(f"r must be in 0..{self.m}, got {r}")
        return r / self.m + (k - 1) / self.n

    def points(self, k: int) -> np.ndarray:
        """All m+1 points of grid class k, strictly increasing with spacing 1/m."""
        self._check_k(k)
        return np.arange(self.m + 1) / self.m + (k - 1) / self.n

    def all_points(self) -> np.ndarray:
        """(K, m+1) array of every class's points."""
        return np.stack([self.points(k) for k in range(1, self.K + 1)])

    def _check_k(self, k: int) -> None:
        if not 1 <= k <= self.K:
            raise ValueError(f"grid class k must be in 1..{self.K}, got {k}")


def make_grids(n: int, m: int) -> GridSpec:
    """Validated constructor for :class:`GridSpec` (requires 1 <= m <= n)."""
    return GridSpec(int(n), int(m))


@dataclass(frozen=True)
class SyncTable:
    """Resolved previous-tick observation indices for all assets and grids.

    ``indices[i, k-1, r]`` is the index into asset i's series of the latest
    observation at or before grid point r of class k; ``flags`` marks grid
    points that precede the asset's first observation.
    """

    indices: np.ndarray
    flags: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        flg = np.asarray(self.flags, dtype=bool)
        if idx.ndim != 3 or idx.shape != flg.shape:
            raise ValueError("indices and flags must be (p, K, m+1) arrays of equal shape")
        idx.setflags(write=False)
        flg.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "flags", flg)

    @property
    def p(self) -> int:
        return int(self.indices.shape[0])

    @property
    def K(self) -> int:
        return int(self.indices.shape[1])

    @property
    def m(self) -> int:
        return int(self.indices.shape[2]) - 1

    def to_csv(self, path, asset_ids=None) -> None:
        """Long-format dump for debugging."""
        ids = asset_ids if asset_ids is not None else [f"a{i}" for i in range(self.p)]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["asset_id", "grid_class", "r", "index", "no_prior"])
            for i in range(self.p):
                for k in range(self.K):
                    for r in range(self.m + 1):
                        writer.writerow(
                            [ids[i], k + 1, r, int(self.indices[i, k, r]), int(self.flags[i, k, r])]
                        )


def resolve_previous_ticks(panel: Panel, grid: GridSpec) -> SyncTable:
    """Previous-tick indices for every asset at every grid point.

    Vectorized per asset; points beyond the last tick clamp to the last
    index and points before the first tick resolve to index 0, flagged.
    """
    pts = grid.all_points().ravel()
    p = panel.p
    indices = np.empty((p, grid.K, grid.m + 1), dtype=np.int64)
    flags = np.zeros((p, grid.K, grid.m + 1), dtype=bool)
    for i, s in enumerate(panel.assets):
        idx = np.searchsorted(s.times, pts, side="right") - 1
        flg = idx < 0
        idx[flg] = 0
        indices[i] = idx.reshape(grid.K, grid.m + 1)
        flags[i] = flg.reshape(grid.K, grid.m + 1)
    return SyncTable(indices, flags)

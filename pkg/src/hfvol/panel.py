"""Tick panels: data model, CSV ingestion, validation, previous-tick lookup.

A panel holds per-asset irregular observations of log prices on the unit
interval (fractions of a trading day). Assets are typically nonsynchronized:
each series carries its own observation times. All types are immutable
after construction and safe to share across workers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

PANEL_HEADER = ("asset_id", "time", "log_price")


class PanelFormatError(ValueError):
    """Raised when a tick file fails to parse or validate."""


class PrevTick(NamedTuple):
    """Result of a previous-tick lookup."""

    index: int
    no_prior: bool


def _lock(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TickSeries:
    """One asset's observed log prices at strictly increasing times in [0, 1]."""

    asset_id: str
    times: np.ndarray
    log_prices: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        y = np.asarray(self.log_prices, dtype=np.float64)
        if t.ndim != 1 or y.ndim != 1 or t.shape != y.shape:
            raise ValueError("times and log_prices must be 1-d and of equal length")
        if t.shape[0] < 2:
            raise ValueError(f"asset {self.asset_id!r}: need at least 2 observations")
        if not np.all(np.diff(t) > 0):
            raise ValueError(f"asset {self.asset_id!r}: times must be strictly increasing")
        if t[0] < 0.0 or t[-1] > 1.0:
            raise ValueError(f"asset {self.asset_id!r}: time outside unit interval")
        if not np.all(np.isfinite(y)):
            raise ValueError(f"asset {self.asset_id!r}: log prices must be finite")
        object.__setattr__(self, "times", _lock(t))
        object.__setattr__(self, "log_prices", _lock(y))

    @property
    def n_obs(self) -> int:
        return int(self.times.shape[0])


@dataclass(frozen=True)
class Panel:
    """An ordered collection of tick series with unique asset ids.

    ``avg_sample_size`` is the rounded mean observation count across assets
    and is the ``n`` that the pre-sampling grids are built from.
    """

    assets: tuple[TickSeries, ...]
    time_mapping: tuple[float, float] | None = None

    def __post_init__(self):
        assets = tuple(self.assets)
        if len(assets) == 0:
            raise ValueError("panel needs at least one asset")
        ids = [s.asset_id for s in assets]
        if len(set(ids)) != len(ids):
            raise ValueError("asset ids must be unique")
        object.__setattr__(self, "assets", assets)

    @property
    def p(self) -> int:
        return len(self.assets)

    @property
    def asset_ids(self) -> tuple[str, ...]:
        return tuple(s.asset_id for s in self.assets)

    @property
    def avg_sample_size(self) -> int:
        mean = sum(s.n_obs for s in self.assets) / self.p
        return int(math.floor(mean + 0.5))


def previous_tick(series: TickSeries, t: float) -> PrevTick:
    """Index of the latest observation at or before time ``t``.

    Queries beyond the last tick clamp to the last index. Queries before
    the first tick return index 0 flagged ``no_prior``; downstream realized
    co-volatility treats increments with a flagged left endpoint as zero.
    """
    idx = int(np.searchsorted(series.times, t, side="right")) - 1
    if idx < 0:
        return PrevTick(0, True)
    return PrevTick(idx, False)


def load_panel(path, format: str = "long_csv", session: tuple[float, float] | None = None) -> Panel:
    """Read a long-format tick CSV into a :class:`Panel`.

    The file must carry the header ``asset_id,time,log_price``. Rows may be
    unsorted; each asset's rows are sorted by time. With ``session=(open,
    close)``, raw timestamps are mapped affinely onto [0, 1] and the mapping
    is recorded on the panel (and echoed by :func:`validate_panel`).
    """
    if format != "long_csv":
        raise ValueError(f"unsupported panel format: {format!r}")
    if session is not None:
        t_open, t_close = float(session[0]), float(session[1])
        if not t_close > t_open:
            raise ValueError("session close must be after session open")

    order: list[str] = []
    times: dict[str, list[float]] = {}
    prices: dict[str, list[float]] = {}
    seen: dict[str, set[float]] = {}

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != PANEL_HEADER:
            raise PanelFormatError(
                f"expected header {','.join(PANEL_HEADER)!r}, got {header!r}"
            )
        for rownum, row in enumerate(reader, start=2):
            if len(row) == 0:
                continue
            if len(row) != 3:
                raise PanelFormatError(f"row {rownum}: expected 3 fields, got {len(row)}")
            asset = row[0].strip()
            if not asset:
                raise PanelFormatError(f"row {rownum}, column asset_id: empty")
            try:
                t = float(row[1])
            except ValueError:
                raise PanelFormatError(
                    f"row {rownum}, column time: cannot parse {row[1]!r}"
                ) from None
            try:
                y = float(row[2])
            except ValueError:
                raise PanelFormatError(
                    f"row {rownum}, column log_price: cannot parse {row[2]!r}"
                ) from None
            if session is not None:
                t = (t - t_open) / (t_close - t_open)
            if not 0.0 <= t <= 1.0:
                raise PanelFormatError(f"row {rownum}, column time: time outside unit interval")
            if not math.isfinite(y):
                raise PanelFormatError(f"row {rownum}, column log_price: not finite")
            if asset not in times:
                order.append(asset)
                times[asset] = []
                prices[asset] = []
                seen[asset] = set()
            if t in seen[asset]:
                raise PanelFormatError(
                    f"row {rownum}: duplicate (asset, time) pair ({asset!r}, {t})"
                )
            seen[asset].add(t)
            times[asset].append(t)
            prices[asset].append(y)

    if not order:
        raise PanelFormatError("no data rows")
    assets = []
    for asset in order:
        t = np.asarray(times[asset])
        y = np.asarray(prices[asset])
        srt = np.argsort(t, kind="stable")
        assets.append(TickSeries(asset, t[srt], y[srt]))
    mapping = (t_open, t_close) if session is not None else None
    return Panel(tuple(assets), time_mapping=mapping)


def write_panel(panel: Panel, path) -> None:
    """Write a panel as a long-format tick CSV.

    Values are written with round-tripping precision, so
    ``load_panel(write_panel(p))`` reproduces ``p`` exactly.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PANEL_HEADER)
        for s in panel.assets:
            for t, y in zip(s.times, s.log_prices):
                writer.writerow([s.asset_id, repr(float(t)), repr(float(y))])


@dataclass(frozen=True)
class PanelDiagnostics:
    """Denseness diagnostics of a panel against a pre-sampling grid.

    ``empty_intervals[i, k-1]`` counts grid intervals of class ``k`` that
    contain no observation of asset ``i``. The estimator tolerates empty
    intervals (they contribute zero increments); the counts quantify how
    far the panel is from the at-least-one-tick-per-interval regime.
    """

    asset_ids: tuple[str, ...]
    m: int
    n_classes: int
    empty_intervals: np.ndarray
    sample_size_ratio_min: float
    sample_size_ratio_max: float
    max_gaps: np.ndarray
    time_mapping: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "empty_intervals", _lock(np.asarray(self.empty_intervals)))
        object.__setattr__(self, "max_gaps", _lock(np.asarray(self.max_gaps)))

    @property
    def max_gap(self) -> float:
        return float(self.max_gaps.max())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["asset_id", "grid_class", "empty_intervals", "max_gap"])
            for i, aid in enumerate(self.asset_ids):
                for k in range(self.n_classes):
                    writer.writerow([aid, k + 1, int(self.empty_intervals[i, k]), repr(float(self.max_gaps[i]))])

    def __str__(self) -> str:
        lines = [
            f"panel diagnostics: p={len(self.asset_ids)} m={self.m} K={self.n_classes}",
            f"  sample-size ratio n_i/n: min={self.sample_size_ratio_min:.6g} "
            f"max={self.sample_size_ratio_max:.6g}",
            f"  max observation gap: {self.max_gap:.6g}",
            f"  empty grid intervals: total={int(self.empty_intervals.sum())} "
            f"worst asset/class={int(self.empty_intervals.max())}",
        ]
        if self.time_mapping is not None:
            lines.append(f"  time mapping: open={self.time_mapping[0]} close={self.time_mapping[1]}")
        return "\n".join(lines)


def validate_panel(panel: Panel, grid) -> PanelDiagnostics:
    """Diagnostics only: empty-interval counts per asset and grid class,
    the spread of n_i/n, and the largest inter-observation gap."""
    p = panel.p
    K = grid.K
    empty = np.zeros((p, K), dtype=np.int64)
    max_gaps = np.empty(p)
    n = panel.avg_sample_size
    ratios = np.array([s.n_obs / n for s in panel.assets])
    for i, s in enumerate(panel.assets):
        max_gaps[i] = float(np.diff(s.times).max())
        for k in range(1, K + 1):
            pts = grid.points(k)
            cum = np.searchsorted(s.times, pts, side="right")
            empty[i, k - 1] = int(np.count_nonzero(np.diff(cum) == 0))
    return PanelDiagnostics(
        asset_ids=panel.asset_ids,
        m=grid.m,
        n_classes=K,
        empty_intervals=empty,
        sample_size_ratio_min=float(ratios.min()),
        sample_size_ratio_max=float(ratios.max()),
        max_gaps=max_gaps,
        time_mapping=panel.time_mapping,
    )

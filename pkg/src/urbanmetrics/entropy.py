"""User/record entropy metrics and their per-grid aggregation.

A user's feature vector p is the normalized sum of the q-rows of their
records (a record's q-row is its grid cell's POI-class profile, or a one-hot
over administrative divisions). User entropy is the Shannon entropy of p;
record entropy redistributes the user's entropy sum onto individual records
as the cross term -sum_j q_ij * ln p_j. The natural logarithm is used
throughout, with the 0*ln(0) = 0 convention.

Five metric layers are built from these:

  vibrancy     user entropy, POI-class basis
  commutation  user entropy, division basis
  diversity    record entropy, POI-class basis
  fluidity     record entropy, division basis
  density      per-cell record count

Fields are aggregated shard-parallel: each worker owns whole shards (a
device never spans shards), emits sparse per-cell partials, and a single
merger folds them in shard order with compensated summation so the result
is byte-stable no matter how many workers ran.
"""
from __future__ import annotations

import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path

import numpy as np

from .geo import Lattice, assign_grid_array

FIELD_MAGIC = b"UFMF"

# time-of-day bands in minutes since midnight, ids 0..6
# (the first six partition 6:00-24:00; midnight completes the day)
BAND_NAMES = ["morning", "forenoon", "noon", "afternoon", "evening", "night", "midnight"]
BAND_MINUTES = [(360, 540), (540, 720), (720, 840), (840, 1020), (1020, 1260), (1260, 1440), (0, 360)]
COMPARE_BANDS = range(6)  # midnight is excluded from the 3x2 comparison


class MetricKind(str, Enum):
    VIBRANCY = "vibrancy"
    COMMUTATION = "commutation"
    DIVERSITY = "diversity"
    FLUIDITY = "fluidity"
    DENSITY = "density"

    @property
    def basis(self) -> str | None:
        if self in (MetricKind.VIBRANCY, MetricKind.DIVERSITY):
            return "poi"
        if self in (MetricKind.COMMUTATION, MetricKind.FLUIDITY):
            return "div"
        return None


METRIC_ORDER = [m.value for m in MetricKind]
_METRIC_CODE = {m: i for i, m in enumerate(MetricKind)}


@dataclass(frozen=True)
class TimeFilter:
    mode: str = "all"  # "all" | "tod" | "dow"
    band: int = 0  # tod band id 0..6
    day_kind: str = "weekday"  # "weekday" | "weekend"

    def __post_init__(self):
        if self.mode not in ("all", "tod", "dow"):
            raise ValueError(f"unknown filter mode {self.mode!r}")
        if self.mode == "tod" and not 0 <= self.band < len(BAND_MINUTES):
            raise ValueError(f"band {self.band} outside 0..6")
        if self.mode == "dow" and self.day_kind not in ("weekday", "weekend"):
            raise ValueError(f"day_kind {self.day_kind!r}")

    @classmethod
    def all(cls) -> "TimeFilter":
        return cls("all")

    @classmethod
    def time_of_day(cls, band: int) -> "TimeFilter":
        return cls("tod", band=band)

    @classmethod
    def day_of_week(cls, day_kind: str) -> "TimeFilter":
        return cls("dow", day_kind=day_kind)

    @classmethod
    def parse(cls, text: str) -> "TimeFilter":
        t = text.strip().lower()
        if t == "all":
            return cls.all()
        if t in ("weekday", "weekend"):
            return cls.day_of_week(t)
        if t in BAND_NAMES:
            return cls.time_of_day(BAND_NAMES.index(t))
        if t.startswith("tod") and t[3:].isdigit():
            return cls.time_of_day(int(t[3:]))
        raise ValueError(f"unknown time filter {text!r}")

    @property
    def slug(self) -> str:
        if self.mode == "all":
            return "all"
        if self.mode == "tod":
            return BAND_NAMES[self.band]
        return self.day_kind

    def matches_array(self, timeslots: np.ndarray, epoch: date) -> np.ndarray:
        slots = np.asarray(timeslots, dtype=np.int64)
        if self.mode == "all":
            return np.ones(slots.shape, dtype=bool)
        if self.mode == "tod":
            minute = (slots * 10) % 1440
            lo, hi = BAND_MINUTES[self.band]
            return (minute >= lo) & (minute < hi)
        weekday = (epoch.weekday() + (slots * 10) // 1440) % 7
        return weekday < 5 if self.day_kind == "weekday" else weekday >= 5

    def matches(self, timeslot: int, epoch: date) -> bool:
        return bool(self.matches_array(np.asarray([timeslot]), epoch)[0])


def all_filters() -> list[TimeFilter]:
    return (
        [TimeFilter.all()]
        + [TimeFilter.time_of_day(b) for b in range(len(BAND_MINUTES))]
        + [TimeFilter.day_of_week(k) for k in ("weekday", "weekend")]
    )


# ---------------------------------------------------------------------------
# Entropy primitives
# ---------------------------------------------------------------------------

@dataclass
class UserFeatureVector:
    mid: str
    basis: str  # "poi" | "div"
    p: np.ndarray
    n_effective: int

    @property
    def usable(self) -> bool:
        return self.n_effective > 0


def build_user_vector(q_rows: np.ndarray, basis: str = "poi", mid: str = "") -> UserFeatureVector:
    """Normalize the summed q-rows of one device into its p-vector.

    All-zero rows are skipped and do not count toward n_effective; an
    all-zero row set yields an unusable vector.
    """
    q_rows = np.asarray(q_rows, dtype=np.float64)
    usable = q_rows.sum(axis=1) > 0
    n_eff = int(usable.sum())
    if n_eff == 0:
        return UserFeatureVector(mid, basis, np.zeros(q_rows.shape[1]), 0)
    sums = q_rows[usable].sum(axis=0)
    return UserFeatureVector(mid, basis, sums / sums.sum(), n_eff)


def shannon_entropy(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    pos = p[p > 0]
    return float(-(pos * np.log(pos)).sum() + 0.0)  # +0.0 folds -0.0 into 0.0


def user_entropy(v: UserFeatureVector) -> float | None:
    """H_p = -sum p_j ln p_j, in [0, ln M]; None for an unusable vector."""
    if not v.usable:
        return None
    return shannon_entropy(v.p)


def record_entropy(q_row: np.ndarray, p: np.ndarray) -> float | None:
    """H_r = -sum_j q_ij ln p_j for one record; None for an all-zero q-row.

    Every class the row touches must carry user probability; that holds by
    construction because p aggregates the same rows.
    """
    q_row = np.asarray(q_row, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if q_row.sum() <= 0:
        return None
    if np.any((q_row > 0) & (p <= 0)):
        raise ValueError("record q-row touches a class with zero user probability")
    return float(record_entropies(q_row[None, :], p)[0])


def record_entropies(q_rows: np.ndarray, p: np.ndarray) -> np.ndarray:
    # ln p masked where p == 0; those classes must have q == 0 by construction
    logp = np.zeros_like(p)
    np.log(p, out=logp, where=p > 0)
    return -(q_rows @ logp)


# ---------------------------------------------------------------------------
# Grid metric fields
# ---------------------------------------------------------------------------

@dataclass
class GridMetricField:
    metric: MetricKind
    tfilter: TimeFilter
    cols: int
    rows: int
    mean: np.ndarray  # (rows, cols) float64; density stores the count itself
    count: np.ndarray  # (rows, cols) int64

    def items(self):
        """Yield ((col, row), mean, count) for occupied cells in row-major order."""
        rr, cc = np.nonzero(self.count)
        for r, c in zip(rr.tolist(), cc.tolist()):
            yield (c, r), float(self.mean[r, c]), int(self.count[r, c])

    @property
    def n_cells(self) -> int:
        return int((self.count > 0).sum())

    @property
    def total_count(self) -> int:
        return int(self.count.sum())

    def occupied_means(self) -> np.ndarray:
        return self.mean[self.count > 0]


@dataclass
class FieldContext:
    """Immutable per-city inputs for field computation."""
    lattice: Lattice
    bbox: tuple
    epoch: date
    profiles: np.ndarray | None = None  # (rows, cols, 10)
    cell_div: np.ndarray | None = None  # (rows, cols) int32, -1 = outside
    n_divisions: int = 0
    p_scope: str = "filtered"  # "filtered": p is rebuilt on the filtered subset


def _device_stamps(slots, lons, lats, metric: MetricKind, tfilter: TimeFilter, ctx: FieldContext):
    """Flat cell indices + stamped values for one device, or None."""
    tmask = tfilter.matches_array(slots, ctx.epoch)
    if not tmask.any():
        return None
    cols, rows, inside = assign_grid_array(lons[tmask], lats[tmask], ctx.lattice, ctx.bbox)
    cols, rows = cols[inside], rows[inside]
    if cols.size == 0:
        return None
    flat = rows * ctx.lattice.cols + cols

    if metric is MetricKind.DENSITY:
        return flat, np.ones(flat.size, dtype=np.float64)

    if metric.basis == "poi":
        q = ctx.profiles[rows, cols]
        usable = q.sum(axis=1) > 0
        if not usable.any():
            return None
        if ctx.p_scope == "global":
            ac, ar, ains = assign_grid_array(lons, lats, ctx.lattice, ctx.bbox)
            q_all = ctx.profiles[ar[ains], ac[ains]]
            base = q_all[q_all.sum(axis=1) > 0]
        else:
            base = q[usable]
        p = base.sum(axis=0)
        p /= p.sum()
        if metric is MetricKind.VIBRANCY:
            values = np.full(int(usable.sum()), shannon_entropy(p))
        else:  # diversity
            values = record_entropies(q[usable], p)
        return flat[usable], values

    # division basis
    div = ctx.cell_div[rows, cols]
    usable = div >= 0
    if not usable.any():
        return None
    if ctx.p_scope == "global":
        ac, ar, ains = assign_grid_array(lons, lats, ctx.lattice, ctx.bbox)
        d_all = ctx.cell_div[ar[ains], ac[ains]]
        d_base = d_all[d_all >= 0]
    else:
        d_base = div[usable]
    counts = np.bincount(d_base, minlength=ctx.n_divisions).astype(np.float64)
    p = counts / counts.sum()
    if metric is MetricKind.COMMUTATION:
        values = np.full(int(usable.sum()), shannon_entropy(p))
    else:  # fluidity: one-hot q-row collapses H_r to -ln p_j
        values = -np.log(p[div[usable]])
    return flat[usable], values


def _compute_shard(shard_path, metric: MetricKind, tfilter: TimeFilter, ctx: FieldContext):
    """Sparse (flat_idx, sums, counts) partial for one shard."""
    idx_parts: list = []
    val_parts: list = []

    cur_mid = None
    slots: list = []
    lons: list = []
    lats: list = []

    def close_device():
        if not slots:
            return
        out = _device_stamps(
            np.asarray(slots, dtype=np.int64),
            np.asarray(lons, dtype=np.float64),
            np.asarray(lats, dtype=np.float64),
            metric, tfilter, ctx,
        )
        if out is not None:
            idx_parts.append(out[0])
            val_parts.append(out[1])

    with open(shard_path, "r", encoding="utf-8") as f:
        for line in f:
            slot_s, lon_s, lat_s, mid, _src = line.rstrip("\n").split(",")
            if mid != cur_mid:
                close_device()
                cur_mid = mid
                slots.clear()
                lons.clear()
                lats.clear()
            slots.append(int(slot_s))
            lons.append(float(lon_s))
            lats.append(float(lat_s))
    close_device()

    if not idx_parts:
        empty = np.array([], dtype=np.int64)
        return empty, np.array([], dtype=np.float64), empty
    idx = np.concatenate(idx_parts)
    values = np.concatenate(val_parts)
    order = np.argsort(idx, kind="stable")
    sidx, svals = idx[order], values[order]
    uniq, starts = np.unique(sidx, return_index=True)
    sums = np.add.reduceat(svals, starts)
    counts = np.diff(np.append(starts, sidx.size)).astype(np.int64)
    return uniq, sums, counts


_WORKER_CTX: dict = {}


def _init_worker(metric, tfilter, ctx):
    _WORKER_CTX["args"] = (metric, tfilter, ctx)


def _worker_shard(shard_path):
    metric, tfilter, ctx = _WORKER_CTX["args"]
    return _compute_shard(shard_path, metric, tfilter, ctx)


def compute_metric_field(
    shard_files,
    metric: MetricKind,
    tfilter: TimeFilter,
    ctx: FieldContext,
    workers: int = 1,
) -> GridMetricField:
    """Aggregate one metric layer over the shard set.

    Worker count never changes the output: partials are merged in shard
    order with Kahan-compensated per-cell sums.
    """
    metric = MetricKind(metric)
    if metric.basis == "poi" and ctx.profiles is None:
        raise ValueError(f"{metric.value} needs POI profiles")
    if metric.basis == "div" and (ctx.cell_div is None or ctx.n_divisions == 0):
        raise ValueError(f"{metric.value} needs divisions")

    shard_files = [Path(p) for p in shard_files]
    if workers > 1 and len(shard_files) > 1:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(metric, tfilter, ctx)
        ) as pool:
            partials = list(pool.map(_worker_shard, shard_files))
    else:
        partials = [_compute_shard(p, metric, tfilter, ctx) for p in shard_files]

    n_flat = ctx.lattice.rows * ctx.lattice.cols
    sum_flat = np.zeros(n_flat, dtype=np.float64)
    comp_flat = np.zeros(n_flat, dtype=np.float64)
    count_flat = np.zeros(n_flat, dtype=np.int64)
    for uniq, sums, counts in partials:  # shard order fixes the fold order
        y = sums - comp_flat[uniq]
        t = sum_flat[uniq] + y
        comp_flat[uniq] = (t - sum_flat[uniq]) - y
        sum_flat[uniq] = t
        count_flat[uniq] += counts

    count = count_flat.reshape(ctx.lattice.rows, ctx.lattice.cols)
    if metric is MetricKind.DENSITY:
        mean = count.astype(np.float64)
    else:
        mean = np.zeros(n_flat, dtype=np.float64)
        occupied = count_flat > 0
        mean[occupied] = sum_flat[occupied] / count_flat[occupied]
        mean = mean.reshape(ctx.lattice.rows, ctx.lattice.cols)
    return GridMetricField(metric, tfilter, ctx.lattice.cols, ctx.lattice.rows, mean, count)


# ---------------------------------------------------------------------------
# Field cache file ("UFMF")
# ---------------------------------------------------------------------------

_FILTER_MODE_CODE = {"all": 0, "tod": 1, "dow": 2}
_FILTER_MODE_NAME = {v: k for k, v in _FILTER_MODE_CODE.items()}


def save_field(path, f: GridMetricField) -> None:
    """Sparse little-endian cache: header then (col, row, mean:f32, count:u32)."""
    mode = _FILTER_MODE_CODE[f.tfilter.mode]
    if f.tfilter.mode == "tod":
        param = f.tfilter.band
    elif f.tfilter.mode == "dow":
        param = 0 if f.tfilter.day_kind == "weekday" else 1
    else:
        param = 0
    rr, cc = np.nonzero(f.count)
    entries = np.empty(rr.size, dtype=[("col", "<u4"), ("row", "<u4"), ("mean", "<f4"), ("count", "<u4")])
    entries["col"] = cc
    entries["row"] = rr
    entries["mean"] = f.mean[rr, cc]
    entries["count"] = f.count[rr, cc]
    with open(path, "wb") as out:
        out.write(FIELD_MAGIC)
        out.write(struct.pack("<BBBBII", _METRIC_CODE[f.metric], mode, param, 0, f.cols, f.rows))
        out.write(entries.tobytes())


def load_field(path) -> GridMetricField:
    with open(path, "rb") as fh:
        if fh.read(4) != FIELD_MAGIC:
            raise ValueError(f"not a field cache: {path}")
        metric_code, mode, param, _pad, cols, rows = struct.unpack("<BBBBII", fh.read(12))
        raw = fh.read()
    entries = np.frombuffer(raw, dtype=[("col", "<u4"), ("row", "<u4"), ("mean", "<f4"), ("count", "<u4")])
    metric = list(MetricKind)[metric_code]
    mode_name = _FILTER_MODE_NAME[mode]
    if mode_name == "tod":
        tfilter = TimeFilter.time_of_day(param)
    elif mode_name == "dow":
        tfilter = TimeFilter.day_of_week("weekday" if param == 0 else "weekend")
    else:
        tfilter = TimeFilter.all()
    mean = np.zeros((rows, cols), dtype=np.float64)
    count = np.zeros((rows, cols), dtype=np.int64)
    rr = entries["row"].astype(np.int64)
    cc = entries["col"].astype(np.int64)
    mean[rr, cc] = entries["mean"].astype(np.float64)
    count[rr, cc] = entries["count"].astype(np.int64)
    return GridMetricField(metric, tfilter, cols, rows, mean, count)


def field_cache_name(metric: MetricKind, tfilter: TimeFilter) -> str:
    return f"{MetricKind(metric).value}_{tfilter.slug}.ufmf"


# ---------------------------------------------------------------------------
# Histograms and region statistics
# ---------------------------------------------------------------------------

@dataclass
class DistributionHistogram:
    edges: np.ndarray  # bins + 1 edges
    densities: np.ndarray  # integrate to 1 over the edges
    counts: np.ndarray

    @property
    def empty(self) -> bool:
        return self.counts.sum() == 0

    def to_dict(self) -> dict:
        return {
            "edges": [float(e) for e in self.edges],
            "densities": [float(d) for d in self.densities],
            "counts": [int(c) for c in self.counts],
        }


def field_histogram(f: GridMetricField, bins: int) -> DistributionHistogram:
    """Equal-width probability density of occupied-cell means."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    means = f.occupied_means()
    if means.size == 0:
        edges = np.linspace(0.0, 1.0, bins + 1)
        return DistributionHistogram(edges, np.zeros(bins), np.zeros(bins, dtype=np.int64))
    counts, edges = np.histogram(means, bins=bins)
    densities, _ = np.histogram(means, bins=bins, density=True)
    return DistributionHistogram(edges, densities, counts.astype(np.int64))


def cells_in_rect(lattice: Lattice, rect) -> np.ndarray:
    """Mask of cells whose center lies in [lon_min,lon_max]x[lat_min,lat_max]."""
    lon_min, lat_min, lon_max, lat_max = rect
    lons, lats = lattice.center_arrays()
    return (lons >= lon_min) & (lons <= lon_max) & (lats >= lat_min) & (lats <= lat_max)


def cells_in_polygon(lattice: Lattice, rings) -> np.ndarray:
    from .geo import point_in_rings

    pts = np.vstack(rings)
    mask = cells_in_rect(
        lattice, (pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max())
    )
    lons, lats = lattice.center_arrays()
    rr, cc = np.nonzero(mask)
    for r, c in zip(rr.tolist(), cc.tolist()):
        if not point_in_rings(lons[r, c], lats[r, c], rings):
            mask[r, c] = False
    return mask


def cells_for_division(cell_div: np.ndarray, division_index: int) -> np.ndarray:
    return cell_div == division_index


def cells_iso(f: GridMetricField, lattice: Lattice, bbox, point, tolerance: float) -> np.ndarray:
    """Occupied cells whose mean is within tolerance of the clicked cell's mean."""
    cell = _cell_of_point(point, lattice, bbox)
    mask = np.zeros((lattice.rows, lattice.cols), dtype=bool)
    if cell is None:
        return mask
    col, row = cell
    if f.count[row, col] == 0:
        return mask
    ref = f.mean[row, col]
    return (f.count > 0) & (np.abs(f.mean - ref) <= tolerance)


def _cell_of_point(point, lattice, bbox):
    from .geo import assign_grid

    return assign_grid(point[0], point[1], lattice, bbox)


@dataclass
class RegionStats:
    n_cells: int
    metrics: dict = field(default_factory=dict)  # metric -> {"mean", "count"}
    poi_breakdown: list | None = None  # share per POI class
    div_breakdown: list | None = None  # [{"index", "share"}] per division

    def to_dict(self) -> dict:
        return {
            "n_cells": self.n_cells,
            "metrics": self.metrics,
            "poi_breakdown": self.poi_breakdown,
            "div_breakdown": self.div_breakdown,
        }


def region_stats(
    fields: dict,
    mask: np.ndarray,
    profiles: np.ndarray | None = None,
    cell_div: np.ndarray | None = None,
) -> RegionStats:
    """Count-weighted per-metric means over the masked cells.

    The class breakdown aggregates the cell profiles of every stamped record
    in the region (records in a cell share its q-row, so the aggregate is
    sum of count * q over cells, normalized).
    """
    stats = RegionStats(n_cells=int(mask.sum()))
    poi_counts = None  # (count array, selected-cell mask) feeding each breakdown
    div_counts = None
    for name, f in fields.items():
        metric = MetricKind(name)
        sel = mask & (f.count > 0)
        total = int(f.count[sel].sum())
        if total == 0:
            stats.metrics[metric.value] = {"mean": None, "count": 0}
            continue
        if metric is MetricKind.DENSITY:
            mean = total / stats.n_cells if stats.n_cells else None
        else:
            mean = float((f.mean[sel] * f.count[sel]).sum() / total)
        stats.metrics[metric.value] = {"mean": mean, "count": total}
        # prefer basis-specific record counts; fall back to density counts
        if metric.basis == "poi" or (metric is MetricKind.DENSITY and poi_counts is None):
            poi_counts = (f.count, sel)
        if metric.basis == "div" or (metric is MetricKind.DENSITY and div_counts is None):
            div_counts = (f.count, sel)

    if poi_counts is not None and profiles is not None:
        count, sel = poi_counts
        agg = (profiles[sel] * count[sel][:, None]).sum(axis=0)
        tot = agg.sum()
        stats.poi_breakdown = [float(x) for x in (agg / tot if tot > 0 else agg)]
    if div_counts is not None and cell_div is not None:
        count, sel = div_counts
        div = cell_div[sel]
        cnt = count[sel]
        keep = div >= 0
        if keep.any():
            shares = np.bincount(div[keep], weights=cnt[keep])
            tot = shares.sum()
            stats.div_breakdown = [
                {"index": int(i), "share": float(s / tot)}
                for i, s in enumerate(shares)
                if s > 0
            ]
        else:
            stats.div_breakdown = []
    return stats

"""BEV pooling: three interchangeable backends over one contract.

The value of cell g, channel c is `reducer` over the multiset
{ weight(n,h,w,d) * features[n,c,h,w] : cell_of_point[(n,h,w,d)] = g }.
Empty cells are 0 for every reducer. Point values are produced on the
fly from (features, dist); the NHWD x C lifted tensor never exists.

Backends:
  naive:     single-pass scatter in original point order (the oracle)
  prefixsum: reorder by the cached ranks, materialize the full running
             sum per channel, subtract at interval boundaries (the
             baseline; deliberately not optimized further)
  interval:  one independent reduction job per interval (the fast path)

All backends accumulate in 64-bit and store float32.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._threads import get_parallelism, set_parallelism  # noqa: F401 (re-export)
from .bevgrid import OUT_OF_RANGE, AssociationCache, BevGridSpec
from .errors import (
    ConfigurationError,
    StaleCacheError,
    UnsupportedReducerError,
    ValidationError,
)


class Reducer(enum.Enum):
    SUM = "sum"
    MEAN = "mean"
    MAX = "max"

    @classmethod
    def parse(cls, name: str) -> "Reducer":
        try:
            return cls(name.lower())
        except ValueError:
            raise ConfigurationError(
                f"unknown reducer {name!r}; expected one of "
                f"{[r.value for r in cls]}"
            ) from None


BACKENDS = ("naive", "prefixsum", "interval")


@dataclass(eq=False)
class BevFeatureMap:
    """Dense C x nx x ny float32 feature tensor in the shared BEV space."""

    values: np.ndarray
    grid: BevGridSpec

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape[1:] != (self.grid.nx, self.grid.ny):
            raise ValidationError(
                f"values shape {self.values.shape} does not match grid "
                f"({self.grid.nx}, {self.grid.ny})"
            )
        if self.values.dtype != np.float32:
            raise ValidationError(f"values must be float32, got {self.values.dtype}")

    @property
    def channels(self) -> int:
        return self.values.shape[0]


def _check_inputs(features, dist, cache: AssociationCache, grid: BevGridSpec):
    if not isinstance(features, np.ndarray) or features.ndim != 4:
        raise ValidationError("features must be an (N, C, H, W) ndarray")
    if not isinstance(dist, np.ndarray) or dist.ndim != 4:
        raise ValidationError("dist must be an (N, D, H, W) ndarray")
    if features.dtype != np.float32 or dist.dtype != np.float32:
        raise ValidationError(
            f"features and dist must be float32, got "
            f"{features.dtype} and {dist.dtype}"
        )
    n, c, h, w = features.shape
    nd, d, hd, wd = dist.shape
    if (n, h, w) != (nd, hd, wd):
        raise ValidationError(
            f"features {features.shape} and dist {dist.shape} disagree on (N, H, W)"
        )
    if not np.isfinite(features).all():
        raise ValidationError("features contain non-finite values")
    if not np.isfinite(dist).all():
        raise ValidationError("dist contains non-finite values")
    if cache.n_points != n * h * w * d:
        raise StaleCacheError(
            f"cache covers {cache.n_points} points but the workload has "
            f"{n * h * w * d} (N*H*W*D for N={n}, H={h}, W={w}, D={d})"
        )
    if cache.grid is not None and cache.grid != grid:
        raise StaleCacheError("cache was built for a different BEV grid")
    if cache.frustum is not None and (
        cache.n_cameras != n
        or cache.frustum.height != h
        or cache.frustum.width != w
        or cache.frustum.depth_bins != d
    ):
        raise StaleCacheError("cache was built for a different rig/frustum")
    if cache.interval_cells.size and int(cache.interval_cells.max()) >= grid.n_cells:
        raise StaleCacheError(
            "cache contains cell ids beyond this grid; it was built "
            "for a different grid"
        )
    return n, c, h, w, d


def _point_fields(idx: np.ndarray, height: int, width: int, depth_bins: int):
    """Split flat point indices into (camera, row, col, depth-bin) arrays."""
    d = idx % depth_bins
    rest = idx // depth_bins
    w = rest % width
    rest //= width
    h = rest % height
    n = rest // height
    return n, h, w, d


def _empty_map(channels: int, grid: BevGridSpec) -> BevFeatureMap:
    return BevFeatureMap(
        np.zeros((channels, grid.nx, grid.ny), dtype=np.float32), grid
    )


def pool_naive(features, dist, cache, grid, reducer=Reducer.SUM) -> BevFeatureMap:
    """Reference backend: scatter every point in original order."""
    n_, c_, h_, w_, d_ = _check_inputs(features, dist, cache, grid)
    idx = np.nonzero(cache.cell_of_point != OUT_OF_RANGE)[0].astype(np.int64)
    if idx.size == 0 or c_ == 0:
        return _empty_map(c_, grid)
    cells = cache.cell_of_point[idx].astype(np.int64)
    n, h, w, d = _point_fields(idx, h_, w_, d_)
    weights = dist[n, d, h, w].astype(np.float64)
    ncells = grid.n_cells
    out = np.empty((c_, ncells), dtype=np.float32)
    if reducer is Reducer.MAX:
        for c in range(c_):
            best = np.full(ncells, -np.inf)
            np.maximum.at(best, cells, weights * features[n, c, h, w])
            out[c] = np.where(np.isneginf(best), 0.0, best)
    else:
        counts = np.bincount(cells, minlength=ncells) if reducer is Reducer.MEAN else None
        for c in range(c_):
            acc = np.bincount(cells, weights=weights * features[n, c, h, w],
                              minlength=ncells)
            if counts is not None:
                acc = np.divide(acc, counts, out=np.zeros_like(acc), where=counts > 0)
            out[c] = acc
    return BevFeatureMap(out.reshape(c_, grid.nx, grid.ny), grid)


def pool_prefixsum(features, dist, cache, grid, reducer=Reducer.SUM) -> BevFeatureMap:
    """Baseline backend: running sum over sorted points, then boundary diffs.

    The full inclusive prefix sum is computed and kept per channel even
    though only the boundary values are used; that waste is the point of
    comparison and must stay.
    """
    if reducer is Reducer.MAX:
        raise UnsupportedReducerError(
            "prefix-sum cannot express max; use the interval or naive backend"
        )
    n_, c_, h_, w_, d_ = _check_inputs(features, dist, cache, grid)
    if cache.n_intervals == 0 or c_ == 0:
        return _empty_map(c_, grid)
    ranks = cache.ranks.astype(np.int64)
    n, h, w, d = _point_fields(ranks, h_, w_, d_)
    weights = dist[n, d, h, w].astype(np.float64)
    starts = cache.interval_starts.astype(np.int64)
    bounds = np.append(starts, ranks.size)
    ends = bounds[1:] - 1
    lengths = np.diff(bounds)
    out_cells = cache.interval_cells.astype(np.int64)
    ncells = grid.n_cells
    out = np.empty((c_, ncells), dtype=np.float32)
    for c in range(c_):
        values = weights * features[n, c, h, w]
        running = np.cumsum(values)
        segment = running[ends]
        segment[1:] -= running[ends[:-1]]
        if reducer is Reducer.MEAN:
            segment /= lengths
        channel = np.zeros(ncells)
        channel[out_cells] = segment
        out[c] = channel
    return BevFeatureMap(out.reshape(c_, grid.nx, grid.ny), grid)


_MODE_OF = {
    Reducer.SUM: _kernels.MODE_SUM,
    Reducer.MEAN: _kernels.MODE_MEAN,
    Reducer.MAX: _kernels.MODE_MAX,
}


def pool_interval(features, dist, cache, grid, reducer=Reducer.SUM) -> BevFeatureMap:
    """Fast backend: one independent reduction per interval.

    Output is bit-identical for any worker count because each interval
    is accumulated sequentially by exactly one job.
    """
    n_, c_, h_, w_, d_ = _check_inputs(features, dist, cache, grid)
    out = np.zeros((c_, grid.n_cells), dtype=np.float32)
    if cache.n_intervals > 0 and c_ > 0:
        feats_t = np.ascontiguousarray(features.transpose(0, 2, 3, 1))
        dist_t = np.ascontiguousarray(dist.transpose(0, 2, 3, 1))
        _kernels.interval_reduce(
            cache.ranks, cache.interval_starts, cache.interval_cells,
            dist_t, feats_t, out, h_, w_, d_, _MODE_OF[reducer],
        )
    return BevFeatureMap(out.reshape(c_, grid.nx, grid.ny), grid)


_BACKEND_FN = {
    "naive": pool_naive,
    "prefixsum": pool_prefixsum,
    "interval": pool_interval,
}


def pool(features, dist, cache, grid, reducer=Reducer.SUM,
         backend: str = "interval") -> BevFeatureMap:
    """Dispatch to the named backend ("naive", "prefixsum", "interval")."""
    try:
        fn = _BACKEND_FN[backend]
    except KeyError:
        raise ConfigurationError(
            f"unknown backend {backend!r}; expected one of {BACKENDS}"
        ) from None
    return fn(features, dist, cache, grid, reducer)


def reorder_weights(dist: np.ndarray, cache: AssociationCache) -> np.ndarray:
    """Depth weights of the in-range points in cell-sorted order.

    This is the cached association step: features are associated with
    cells purely by reordering through the precomputed ranks; no
    projection and no quantization happen here.
    """
    if dist.ndim != 4:
        raise ValidationError(f"dist must be (N, D, H, W), got {dist.shape}")
    nd, d_, hd, wd = dist.shape
    if cache.n_points != nd * hd * wd * d_:
        raise StaleCacheError(
            f"cache covers {cache.n_points} points, dist implies "
            f"{nd * hd * wd * d_}"
        )
    # a point's flat index in the (N, H, W, D) layout IS its point index,
    # so the reorder is one transpose and one gather
    by_point = np.ascontiguousarray(dist.transpose(0, 2, 3, 1)).reshape(-1)
    return by_point[cache.ranks]

"""Compiled interval-reduction kernel.

One parallel job per interval: the job reads its slice of the sorted
point ranks, accumulates the depth-weighted features in 64-bit, and
writes exactly one output cell per channel. There is no cross-interval
communication and no partial sums are stored, so the result is
bit-identical for any worker count.
"""

from __future__ import annotations

import numpy as np

from . import _threads  # noqa: F401  (sizes the thread pool before numba loads)
from numba import njit, prange

MODE_SUM = 0
MODE_MEAN = 1
MODE_MAX = 2


@njit(parallel=True, cache=True)
def interval_reduce(ranks, starts, interval_cells, dist_t, feats_t, out,
                    height, width, depth_bins, mode):
    """Reduce each interval of sorted points into its BEV cell.

    dist_t is (N, H, W, D) and feats_t is (N, H, W, C), both contiguous
    so a ray's bins and a pixel's channels are unit-stride. out is
    (C, n_cells) float32, pre-zeroed.
    """
    n_intervals = starts.shape[0]
    n_sorted = ranks.shape[0]
    n_channels = feats_t.shape[3]
    for i in prange(n_intervals):
        lo = np.int64(starts[i])
        hi = np.int64(starts[i + 1]) if i + 1 < n_intervals else n_sorted
        acc = np.full(n_channels, -np.inf) if mode == MODE_MAX \
            else np.zeros(n_channels, dtype=np.float64)
        for j in range(lo, hi):
            p = np.int64(ranks[j])
            d = p % depth_bins
            rest = p // depth_bins
            w = rest % width
            rest //= width
            h = rest % height
            n = rest // height
            wt = np.float64(dist_t[n, h, w, d])
            if mode == MODE_MAX:
                for c in range(n_channels):
                    v = wt * feats_t[n, h, w, c]
                    if v > acc[c]:
                        acc[c] = v
            else:
                for c in range(n_channels):
                    acc[c] += wt * feats_t[n, h, w, c]
        cell = np.int64(interval_cells[i])
        if mode == MODE_MEAN:
            inv = 1.0 / np.float64(hi - lo)
            for c in range(n_channels):
                out[c, cell] = acc[c] * inv
        else:
            for c in range(n_channels):
                out[c, cell] = acc[c]

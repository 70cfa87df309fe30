"""Shared-BEV fusion: LiDAR flattening, channel concat, grid resampling.

The LiDAR branch produces hand-crafted pillar statistics (count,
intensity, height) rather than learned features; what matters here is
the fusion contract: same BEV space, channel concatenation. Cell
"center" means edge + r/2 throughout; that one convention drives all
resampling geometry.
"""

from __future__ import annotations

import numpy as np

from .bevgrid import OUT_OF_RANGE, BevGridSpec, quantize_points
from .errors import ValidationError
from .pooling import BevFeatureMap, Reducer


def lidar_to_bev(points: np.ndarray, grid: BevGridSpec,
                 reducer: Reducer = Reducer.SUM) -> BevFeatureMap:
    """Flatten an (M, 4) LiDAR cloud (x, y, z, intensity) along z.

    Returns a 3-channel map per cell: point count, reduced intensity,
    reduced height. The count channel ignores the reducer. Points
    outside the grid contribute nothing; an empty cloud gives zeros.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 4:
        raise ValidationError(f"expected an (M, 4) point array, got {points.shape}")
    if points.size and not np.isfinite(points).all():
        raise ValidationError("point cloud contains non-finite values")
    ncells = grid.n_cells
    out = np.zeros((3, ncells), dtype=np.float32)
    if points.shape[0]:
        cells = quantize_points(grid, points[:, :3])
        keep = cells != OUT_OF_RANGE
        cells = cells[keep].astype(np.int64)
        intensity = points[keep, 3]
        height = points[keep, 2]
        counts = np.bincount(cells, minlength=ncells)
        out[0] = counts
        for ch, values in ((1, intensity), (2, height)):
            if reducer is Reducer.MAX:
                best = np.full(ncells, -np.inf)
                np.maximum.at(best, cells, values)
                out[ch] = np.where(np.isneginf(best), 0.0, best)
            else:
                acc = np.bincount(cells, weights=values, minlength=ncells)
                if reducer is Reducer.MEAN:
                    acc = np.divide(acc, counts, out=np.zeros_like(acc),
                                    where=counts > 0)
                out[ch] = acc
    return BevFeatureMap(out.reshape(3, grid.nx, grid.ny), grid)


def fuse_concat(a: BevFeatureMap, b: BevFeatureMap) -> BevFeatureMap:
    """Concatenate two BEV maps along channels (a's channels first).

    Both maps must live on the same grid; resample one with
    `grid_resample` first if they do not. Values are copied.
    """
    if a.grid != b.grid:
        raise ValidationError(
            "cannot concatenate maps on different grids; "
            "use grid_resample to bring one onto the other's grid"
        )
    return BevFeatureMap(np.concatenate([a.values, b.values], axis=0), a.grid)


def grid_resample(src: BevFeatureMap, dst_grid: BevGridSpec) -> BevFeatureMap:
    """Resample a BEV map onto another grid by bilinear interpolation.

    Each destination cell center is mapped to metric coordinates and
    sampled from the four surrounding source cell centers. Destination
    centers outside the source center span get 0 (no edge clamping).
    z extents do not participate.
    """
    sg = src.grid
    nxs, nys = sg.nx, sg.ny
    # destination centers in source-grid index coordinates; centers that
    # land on the coverage boundary up to rounding count as covered
    eps = 1e-9
    gx = (dst_grid.x_min + (np.arange(dst_grid.nx) + 0.5) * dst_grid.r
          - sg.x_min) / sg.r - 0.5
    gy = (dst_grid.y_min + (np.arange(dst_grid.ny) + 0.5) * dst_grid.r
          - sg.y_min) / sg.r - 0.5
    cov_x = (gx >= -eps) & (gx <= nxs - 1 + eps)
    cov_y = (gy >= -eps) & (gy <= nys - 1 + eps)
    gx = np.clip(gx, 0.0, nxs - 1)
    gy = np.clip(gy, 0.0, nys - 1)
    x0 = np.floor(gx).astype(np.int64)
    y0 = np.floor(gy).astype(np.int64)
    x1 = np.minimum(x0 + 1, nxs - 1)
    y1 = np.minimum(y0 + 1, nys - 1)
    fx = np.clip(gx - x0, 0.0, 1.0)[None, :, None]
    fy = np.clip(gy - y0, 0.0, 1.0)[None, None, :]

    v = src.values.astype(np.float64)
    ix0, ix1 = x0[:, None], x1[:, None]
    iy0, iy1 = y0[None, :], y1[None, :]
    interp = (
        v[:, ix0, iy0] * (1 - fx) * (1 - fy)
        + v[:, ix1, iy0] * fx * (1 - fy)
        + v[:, ix0, iy1] * (1 - fx) * fy
        + v[:, ix1, iy1] * fx * fy
    )
    interp *= (cov_x[:, None] & cov_y[None, :])[None, :, :]
    return BevFeatureMap(interp.astype(np.float32), dst_grid)


def bev_encoder(fused: BevFeatureMap) -> BevFeatureMap:
    """Stable call site for a BEV encoder; currently the identity.

    In a full perception stack a convolutional encoder would run here
    to blend the concatenated modality channels.
    """
    return fused

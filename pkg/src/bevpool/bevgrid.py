"""BEV grid quantization and the precomputed point-to-cell association.

Cells are half-open [edge, edge + r) squares; a point on an interior
boundary belongs to the higher-index cell and the global upper bound is
exclusive. Flat cell ids are ix-major (ix * ny + iy), matching the
memory layout of BEV feature maps so interval writes are contiguous.
The z extent is only a keep/drop range; flattening along z never
produces an index.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from . import debug
from .errors import ConfigurationError, FileFormatError
from .geometry import CameraCalibration, FrustumSpec, generate_frustum

#: Sentinel cell id for points outside the grid (also the wire encoding).
OUT_OF_RANGE = 0xFFFFFFFF

_CACHE_MAGIC = b"BVPC"
_CACHE_VERSION = 1


@dataclass(frozen=True)
class BevGridSpec:
    """Metric extents and cell size of the shared BEV grid."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    z_min: float
    z_max: float
    r: float

    def __post_init__(self):
        if self.r <= 0:
            raise ConfigurationError(f"cell size must be positive, got {self.r}")
        if self.z_min >= self.z_max:
            raise ConfigurationError(
                f"need z_min < z_max, got [{self.z_min}, {self.z_max})"
            )
        for axis, lo, hi in (("x", self.x_min, self.x_max), ("y", self.y_min, self.y_max)):
            span = hi - lo
            ncells = span / self.r
            if span <= 0 or abs(ncells - round(ncells)) > 1e-9 or round(ncells) < 1:
                raise ConfigurationError(
                    f"{axis} extent [{lo}, {hi}) is not a positive integer "
                    f"multiple of r={self.r}"
                )

    @property
    def nx(self) -> int:
        return round((self.x_max - self.x_min) / self.r)

    @property
    def ny(self) -> int:
        return round((self.y_max - self.y_min) / self.r)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny


def quantize(spec: BevGridSpec, p) -> int:
    """Flat cell id of ego point `p`, or OUT_OF_RANGE.

    ix = floor((p.x - x_min) / r) and likewise for iy; the z coordinate
    only gates membership (z_min <= z < z_max).
    """
    x, y, z = float(p[0]), float(p[1]), float(p[2])
    ix = int(np.floor((x - spec.x_min) / spec.r))
    iy = int(np.floor((y - spec.y_min) / spec.r))
    if 0 <= ix < spec.nx and 0 <= iy < spec.ny and spec.z_min <= z < spec.z_max:
        return ix * spec.ny + iy
    return OUT_OF_RANGE


def quantize_points(spec: BevGridSpec, points: np.ndarray) -> np.ndarray:
    """Vectorized `quantize` over an (M, 3) array; returns uint32 cell ids."""
    points = np.asarray(points, dtype=np.float64)
    ix = np.floor((points[:, 0] - spec.x_min) / spec.r).astype(np.int64)
    iy = np.floor((points[:, 1] - spec.y_min) / spec.r).astype(np.int64)
    z = points[:, 2]
    in_range = (
        (ix >= 0) & (ix < spec.nx)
        & (iy >= 0) & (iy < spec.ny)
        & (z >= spec.z_min) & (z < spec.z_max)
    )
    cells = np.where(in_range, ix * spec.ny + iy, OUT_OF_RANGE).astype(np.uint32)
    debug.count("quantize", len(points))
    return cells


@dataclass(eq=False)
class AssociationCache:
    """Precomputed association of every frustum point with its BEV cell.

    `ranks` lists the in-range point indices sorted by cell id (stable,
    ties in original order); interval i covers
    ranks[interval_starts[i] : interval_starts[i+1]] and all its points
    share cell id interval_cells[i]. Arrays are immutable after build.

    `n_cameras`, `frustum`, and `grid` describe the inputs the cache was
    built from; they are None on caches loaded from disk (the wire
    format carries only the fingerprint).
    """

    cell_of_point: np.ndarray
    ranks: np.ndarray
    interval_starts: np.ndarray
    interval_cells: np.ndarray
    fingerprint: int
    n_cameras: int | None = None
    frustum: FrustumSpec | None = field(default=None, repr=False)
    grid: BevGridSpec | None = field(default=None, repr=False)

    def __post_init__(self):
        for arr in (self.cell_of_point, self.ranks, self.interval_starts,
                    self.interval_cells):
            arr.flags.writeable = False

    @property
    def n_points(self) -> int:
        return self.cell_of_point.shape[0]

    @property
    def n_in_range(self) -> int:
        return self.ranks.shape[0]

    @property
    def n_intervals(self) -> int:
        return self.interval_starts.shape[0]


def ranks_and_intervals(cells: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sort point indices by cell id and find the interval boundaries.

    `cells` is a uint32 array (OUT_OF_RANGE entries are dropped).
    Returns (ranks, interval_starts, interval_cells), all uint32.
    """
    in_range = np.nonzero(cells != OUT_OF_RANGE)[0]
    order = np.argsort(cells[in_range], kind="stable")
    ranks = in_range[order].astype(np.uint32)
    sorted_cells = cells[ranks]
    if ranks.size == 0:
        empty = np.empty(0, dtype=np.uint32)
        return ranks, empty.copy(), empty.copy()
    starts = np.concatenate(
        ([0], np.nonzero(np.diff(sorted_cells.astype(np.int64)))[0] + 1)
    ).astype(np.uint32)
    return ranks, starts, sorted_cells[starts]


def fingerprint_inputs(
    rig: list[CameraCalibration], frustum: FrustumSpec, grid: BevGridSpec
) -> int:
    """64-bit hash of the canonical serialized bytes of rig + specs."""
    buf = bytearray()
    buf += struct.pack("<I", len(rig))
    for cam in rig:
        buf += struct.pack("<i4d", cam.camera_id, cam.fx, cam.fy, cam.cx, cam.cy)
        buf += cam.rotation.astype("<f8").tobytes()
        buf += cam.translation.astype("<f8").tobytes()
    buf += struct.pack(
        "<II2dI", frustum.height, frustum.width, frustum.depth_min,
        frustum.depth_step, frustum.depth_bins,
    )
    buf += struct.pack(
        "<7d", grid.x_min, grid.x_max, grid.y_min, grid.y_max,
        grid.z_min, grid.z_max, grid.r,
    )
    digest = hashlib.blake2b(bytes(buf), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def build_cache(
    rig: list[CameraCalibration], frustum_spec: FrustumSpec, grid_spec: BevGridSpec
) -> AssociationCache:
    """Project the rig's frustum, quantize it, and sort points by cell.

    This is the cold association path; at inference time only the
    recorded ranks are needed to reorder features.
    """
    points = generate_frustum(rig, frustum_spec)
    cells = quantize_points(grid_spec, points.coords)
    ranks, starts, interval_cells = ranks_and_intervals(cells)
    return AssociationCache(
        cell_of_point=cells,
        ranks=ranks,
        interval_starts=starts,
        interval_cells=interval_cells,
        fingerprint=fingerprint_inputs(rig, frustum_spec, grid_spec),
        n_cameras=len(rig),
        frustum=frustum_spec,
        grid=grid_spec,
    )


def validate_cache(
    cache: AssociationCache,
    rig: list[CameraCalibration],
    frustum_spec: FrustumSpec,
    grid_spec: BevGridSpec,
) -> bool:
    """True iff the cache fingerprint matches the given inputs."""
    return cache.fingerprint == fingerprint_inputs(rig, frustum_spec, grid_spec)


def _write_array(out: bytearray, arr: np.ndarray) -> None:
    out += struct.pack("<Q", arr.shape[0])
    out += arr.astype("<u4").tobytes()


def serialize_cache(cache: AssociationCache) -> bytes:
    """Encode a cache in the binary wire format.

    Layout: magic "BVPC", version u16, fingerprint u64, then the four
    u32 arrays (cell_of_point with the 0xFFFFFFFF sentinel, ranks,
    interval_starts, interval_cells), each prefixed by a u64 length.
    All integers little-endian.
    """
    out = bytearray()
    out += _CACHE_MAGIC
    out += struct.pack("<HQ", _CACHE_VERSION, cache.fingerprint)
    for arr in (cache.cell_of_point, cache.ranks, cache.interval_starts,
                cache.interval_cells):
        _write_array(out, arr)
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise FileFormatError(
                f"truncated while reading {what}", offset=self.pos
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def read_array(self, what: str) -> np.ndarray:
        (count,) = struct.unpack("<Q", self.take(8, f"{what} length"))
        raw = self.take(4 * count, what)
        return np.frombuffer(raw, dtype="<u4").copy()


def deserialize_cache(data: bytes) -> AssociationCache:
    """Decode the binary cache format; inverse of `serialize_cache`."""
    rd = _Reader(data)
    magic = rd.take(4, "magic")
    if magic != _CACHE_MAGIC:
        raise FileFormatError(
            f"bad magic {magic!r}, expected {_CACHE_MAGIC!r}", offset=0
        )
    (version,) = struct.unpack("<H", rd.take(2, "version"))
    if version != _CACHE_VERSION:
        raise FileFormatError(f"unsupported cache version {version}", offset=4)
    (fingerprint,) = struct.unpack("<Q", rd.take(8, "fingerprint"))
    cell_of_point = rd.read_array("cell_of_point")
    ranks = rd.read_array("ranks")
    starts = rd.read_array("interval_starts")
    cells = rd.read_array("interval_cells")
    if rd.pos != len(data):
        raise FileFormatError("trailing bytes after cache payload", offset=rd.pos)
    return AssociationCache(
        cell_of_point=cell_of_point,
        ranks=ranks,
        interval_starts=starts,
        interval_cells=cells,
        fingerprint=fingerprint,
    )


def save_cache(path, cache: AssociationCache) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_cache(cache))


def load_cache(path) -> AssociationCache:
    with open(path, "rb") as fh:
        return deserialize_cache(fh.read())


#: Benchmark default: 102.4 m square around the ego vehicle at r = 0.4 m.
DEFAULT_GRID = BevGridSpec(
    x_min=-51.2, x_max=51.2, y_min=-51.2, y_max=51.2, z_min=-10.0, z_max=10.0, r=0.4
)

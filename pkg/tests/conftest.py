import os

# The acceptance suite requires parallelism >= 4; the worker pool is sized
# at first import, so pin it before bevpool (and numba) load.
os.environ.setdefault("BEVPOOL_THREADS", "4")

import numpy as np
import pytest

import bevpool as bp


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_calibration(rng: np.random.Generator, camera_id: int = 0) -> bp.CameraCalibration:
    return bp.CameraCalibration(
        fx=float(rng.uniform(20.0, 120.0)),
        fy=float(rng.uniform(20.0, 120.0)),
        cx=float(rng.uniform(5.0, 50.0)),
        cy=float(rng.uniform(5.0, 50.0)),
        rotation=random_rotation(rng),
        translation=rng.uniform(-3.0, 3.0, size=3),
        camera_id=camera_id,
    )


def random_grid(rng: np.random.Generator) -> bp.BevGridSpec:
    r = float(rng.choice([0.25, 0.4, 0.5, 1.0]))
    nx = int(rng.integers(4, 48))
    ny = int(rng.integers(4, 48))
    x_min = float(rng.integers(-20, 4)) * r
    y_min = float(rng.integers(-20, 4)) * r
    return bp.BevGridSpec(
        x_min=x_min, x_max=x_min + nx * r,
        y_min=y_min, y_max=y_min + ny * r,
        z_min=-5.0, z_max=8.0, r=r,
    )


def random_instance(seed: int, max_hw: int = 24, max_d: int = 12, max_c: int = 8):
    """A random (rig, frustum, grid, features, dist, cache) pooling instance."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    h = int(rng.integers(1, max_hw + 1))
    w = int(rng.integers(1, max_hw + 1))
    d = int(rng.integers(1, max_d + 1))
    c = int(rng.integers(0, max_c + 1))
    frustum = bp.FrustumSpec(
        height=h, width=w,
        depth_min=float(rng.uniform(0.5, 2.0)),
        depth_step=float(rng.uniform(0.25, 1.0)),
        depth_bins=d,
    )
    rig = [random_calibration(rng, camera_id=i) for i in range(n)]
    grid = random_grid(rng)
    features = rng.uniform(-1, 1, size=(n, c, h, w)).astype(np.float32)
    logits = rng.uniform(-3, 3, size=(n, d, h, w)).astype(np.float32)
    dist = bp.normalize_depth(logits)
    cache = bp.build_cache(rig, frustum, grid)
    return rig, frustum, grid, features, dist, cache


def max_rel_dev(reference: np.ndarray, candidate: np.ndarray) -> float:
    """max |a - b| / max(1, |a|), the tolerance metric of the whole suite."""
    a = reference.astype(np.float64)
    b = candidate.astype(np.float64)
    if a.size == 0:
        return 0.0
    return float((np.abs(a - b) / np.maximum(1.0, np.abs(a))).max())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

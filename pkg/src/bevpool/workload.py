"""Synthetic benchmark workloads.

A WorkloadSpec plus a seed fully determines the rig and the input
tensors: equal specs give bit-identical features and logits (PCG64
streams are stable across platforms). The standard workload is six
32x88 cameras with 118 depth bins over [1, 60) m at 0.5 m steps, about
two million frustum points.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .bevgrid import DEFAULT_GRID, BevGridSpec
from .errors import ConfigurationError
from .geometry import CameraCalibration, FrustumSpec

#: mounting geometry of the synthetic ring of cameras
_RIG_RADIUS_M = 1.5
_RIG_HEIGHT_M = 1.6


@dataclass(frozen=True)
class WorkloadSpec:
    """Everything needed to reproduce one benchmark input."""

    n_cameras: int
    frustum: FrustumSpec
    grid: BevGridSpec
    channels: int
    seed: int

    def __post_init__(self):
        if self.n_cameras < 1:
            raise ConfigurationError(f"need at least one camera, got {self.n_cameras}")
        if self.channels < 0:
            raise ConfigurationError(f"channels must be >= 0, got {self.channels}")
        if self.seed < 0:
            raise ConfigurationError("seed must be a non-negative integer")

    @property
    def n_points(self) -> int:
        return self.n_cameras * self.frustum.points_per_camera

    def with_resolution(self, height: int, width: int) -> "WorkloadSpec":
        """Same workload at another feature-map resolution (for sweeps).

        Intrinsics scale with the resolution, so the cameras keep their
        field of view.
        """
        return replace(
            self, frustum=replace(self.frustum, height=height, width=width)
        )


def standard_spec(channels: int = 80, seed: int = 0,
                  grid: BevGridSpec = DEFAULT_GRID) -> WorkloadSpec:
    return WorkloadSpec(
        n_cameras=6,
        frustum=FrustumSpec(height=32, width=88, depth_min=1.0,
                            depth_step=0.5, depth_bins=118),
        grid=grid,
        channels=channels,
        seed=seed,
    )


def synthetic_rig(n_cameras: int, frustum: FrustumSpec) -> list[CameraCalibration]:
    """A ring of cameras with evenly separated yaw (60 deg apart for 6).

    Each camera sits at radius 1.5 m from the ego origin, 1.6 m up,
    looking outward and level. Intrinsics are at feature-map scale with
    the principal point at the image center and fx = fy = 0.8 * W
    (roughly a 64 degree horizontal field of view).
    """
    if n_cameras < 1:
        raise ConfigurationError(f"need at least one camera, got {n_cameras}")
    rig = []
    focal = 0.8 * frustum.width
    for k in range(n_cameras):
        yaw = 2.0 * np.pi * k / n_cameras
        cos, sin = np.cos(yaw), np.sin(yaw)
        # camera axes in ego coordinates: x right, y down, z forward
        rotation = np.column_stack(
            [
                np.array([sin, -cos, 0.0]),
                np.array([0.0, 0.0, -1.0]),
                np.array([cos, sin, 0.0]),
            ]
        )
        rig.append(
            CameraCalibration(
                fx=focal,
                fy=focal,
                cx=frustum.width / 2.0,
                cy=frustum.height / 2.0,
                rotation=rotation,
                translation=np.array(
                    [_RIG_RADIUS_M * cos, _RIG_RADIUS_M * sin, _RIG_HEIGHT_M]
                ),
                camera_id=k,
            )
        )
    return rig


def gen_workload(spec: WorkloadSpec):
    """Deterministic (rig, features, logits, grid) for a workload spec.

    Features are float32 uniform in [-1, 1], logits in [-3, 3]; both
    are stand-ins for network outputs and carry no learned structure.
    """
    rig = synthetic_rig(spec.n_cameras, spec.frustum)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    f = spec.frustum
    features = rng.uniform(
        -1.0, 1.0, size=(spec.n_cameras, spec.channels, f.height, f.width)
    ).astype(np.float32)
    logits = rng.uniform(
        -3.0, 3.0, size=(spec.n_cameras, f.depth_bins, f.height, f.width)
    ).astype(np.float32)
    return rig, features, logits, spec.grid

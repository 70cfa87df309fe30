"""Camera rig calibration, frustum generation, and pixel/ego projections.

Coordinate conventions (fixed here, used everywhere else):
  camera frame: x right, y down, z forward (standard pinhole)
  ego frame:    x forward, y left, z up
  feature-map pixel (h, w) maps to image coordinates (u, v) = (w, h),
  with no half-pixel offset.

Intrinsics are expressed at feature-map scale, so no image-to-feature
rescaling step exists anywhere in the pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import debug
from .errors import BehindCameraError, ConfigurationError, FileFormatError

_ORTHO_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CameraCalibration:
    """Intrinsics and extrinsics of one camera, at feature-map scale.

    `rotation` maps camera-frame vectors to ego frame (row-major 3x3);
    `translation` is the camera center in ego coordinates (meters).
    Immutable after construction.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray
    camera_id: int = 0

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        trans = np.asarray(self.translation, dtype=np.float64).reshape(3)
        rot.flags.writeable = False
        trans.flags.writeable = False
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)
        if not (self.fx > 0 and self.fy > 0):
            raise ConfigurationError(
                f"camera {self.camera_id}: focal lengths must be positive, "
                f"got fx={self.fx}, fy={self.fy}"
            )
        err = np.abs(rot.T @ rot - np.eye(3)).max()
        if err > _ORTHO_TOL:
            raise ConfigurationError(
                f"camera {self.camera_id}: rotation is not orthonormal "
                f"(max |R^T R - I| = {err:.3e})"
            )
        det = np.linalg.det(rot)
        if abs(det - 1.0) > _ORTHO_TOL:
            raise ConfigurationError(
                f"camera {self.camera_id}: rotation must be proper "
                f"(det = {det!r}, expected +1)"
            )


@dataclass(frozen=True)
class FrustumSpec:
    """Feature-map size and depth discretization shared by every camera."""

    height: int
    width: int
    depth_min: float
    depth_step: float
    depth_bins: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or self.depth_bins < 1:
            raise ConfigurationError(
                f"frustum dims must be >= 1, got "
                f"H={self.height}, W={self.width}, D={self.depth_bins}"
            )
        if not (self.depth_step > 0 and self.depth_min > 0):
            raise ConfigurationError(
                f"need depth_min > 0 and depth_step > 0, got "
                f"d_min={self.depth_min}, step={self.depth_step}"
            )

    @property
    def points_per_camera(self) -> int:
        return self.height * self.width * self.depth_bins

    def depths(self) -> np.ndarray:
        """All bin depths in meters, index d at depth_min + d * depth_step."""
        return self.depth_min + self.depth_step * np.arange(
            self.depth_bins, dtype=np.float64
        )


@dataclass(frozen=True, eq=False)
class FrustumPoints:
    """Ego-frame coordinates of every frustum point of a rig.

    `coords` has shape (N*H*W*D, 3); the row of point (n, h, w, d) is
    ((n*H + h)*W + w)*D + d. Immutable after construction.
    """

    coords: np.ndarray
    n_cameras: int
    spec: FrustumSpec = field(repr=False)

    def __post_init__(self):
        self.coords.flags.writeable = False

    def __len__(self) -> int:
        return self.coords.shape[0]

    def point_index(self, n: int, h: int, w: int, d: int) -> int:
        s = self.spec
        return ((n * s.height + h) * s.width + w) * s.depth_bins + d


def depth_of_bin(spec: FrustumSpec, d: int) -> float:
    """Depth in meters of bin `d` (left edge convention)."""
    if not 0 <= d < spec.depth_bins:
        raise IndexError(f"depth bin {d} out of range [0, {spec.depth_bins})")
    return spec.depth_min + d * spec.depth_step


def unproject(calib: CameraCalibration, u: float, v: float, depth: float) -> np.ndarray:
    """Lift pixel (u, v) at `depth` meters to an ego-frame 3-vector."""
    p_cam = np.array(
        [
            (u - calib.cx) * depth / calib.fx,
            (v - calib.cy) * depth / calib.fy,
            depth,
        ]
    )
    return calib.rotation @ p_cam + calib.translation


def project(calib: CameraCalibration, p) -> tuple[float, float, float]:
    """Map an ego-frame point back to (u, v, depth).

    Exact inverse of `unproject` for depth > 0; raises BehindCameraError
    when the point has non-positive camera-frame depth.
    """
    p_cam = calib.rotation.T @ (np.asarray(p, dtype=np.float64) - calib.translation)
    if p_cam[2] <= 0:
        raise BehindCameraError(
            f"point {p} is behind camera {calib.camera_id} "
            f"(camera-frame depth {p_cam[2]:.6g})"
        )
    depth = p_cam[2]
    u = p_cam[0] * calib.fx / depth + calib.cx
    v = p_cam[1] * calib.fy / depth + calib.cy
    return float(u), float(v), float(depth)


def generate_frustum(rig: list[CameraCalibration], spec: FrustumSpec) -> FrustumPoints:
    """Unproject every (pixel, depth bin) of every camera into ego space.

    Row (n, h, w, d) of the result equals
    unproject(rig[n], w, h, depth_of_bin(spec, d)). Deterministic: equal
    inputs give bit-identical output.
    """
    if not rig:
        raise ConfigurationError("rig must contain at least one camera")
    h_idx = np.arange(spec.height, dtype=np.float64)
    w_idx = np.arange(spec.width, dtype=np.float64)
    depths = spec.depths()

    out = np.empty((len(rig), spec.height, spec.width, spec.depth_bins, 3))
    for n, calib in enumerate(rig):
        # unit-depth ray directions per pixel, camera frame
        dir_x = (w_idx[None, :] - calib.cx) / calib.fx  # (1, W)
        dir_y = (h_idx[:, None] - calib.cy) / calib.fy  # (H, 1)
        rays = np.empty((spec.height, spec.width, 3))
        rays[:, :, 0] = dir_x
        rays[:, :, 1] = dir_y
        rays[:, :, 2] = 1.0
        p_cam = rays[:, :, None, :] * depths[None, None, :, None]  # (H, W, D, 3)
        ego = p_cam.reshape(-1, 3) @ calib.rotation.T
        ego += calib.translation
        out[n] = ego.reshape(spec.height, spec.width, spec.depth_bins, 3)
    debug.count("unproject", len(rig) * spec.points_per_camera)
    return FrustumPoints(
        coords=out.reshape(-1, 3), n_cameras=len(rig), spec=spec
    )


def _get(obj: dict, key: str, kind, where: str):
    if key not in obj:
        raise FileFormatError("missing required field", field=f"{where}.{key}")
    value = obj[key]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is list and isinstance(value, list):
        return value
    raise FileFormatError(
        f"expected {kind.__name__}, got {type(value).__name__}",
        field=f"{where}.{key}",
    )


def _vector(obj: dict, key: str, length: int, where: str) -> list[float]:
    raw = _get(obj, key, list, where)
    if len(raw) != length or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in raw
    ):
        raise FileFormatError(
            f"expected {length} numbers", field=f"{where}.{key}"
        )
    return [float(x) for x in raw]


def parse_calibration(text: str) -> tuple[list[CameraCalibration], FrustumSpec]:
    """Parse the calibration JSON document into (rig, frustum spec).

    Errors name the offending field, e.g. "cameras[2].rotation".
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FileFormatError("top-level value must be an object")
    cameras_raw = _get(doc, "cameras", list, "$")
    if not cameras_raw:
        raise FileFormatError("rig must contain at least one camera", field="$.cameras")
    rig = []
    for i, cam in enumerate(cameras_raw):
        where = f"cameras[{i}]"
        if not isinstance(cam, dict):
            raise FileFormatError("expected object", field=where)
        try:
            rig.append(
                CameraCalibration(
                    fx=_get(cam, "fx", float, where),
                    fy=_get(cam, "fy", float, where),
                    cx=_get(cam, "cx", float, where),
                    cy=_get(cam, "cy", float, where),
                    rotation=np.array(_vector(cam, "rotation", 9, where)).reshape(3, 3),
                    translation=np.array(_vector(cam, "translation", 3, where)),
                    camera_id=_get(cam, "id", int, where),
                )
            )
        except ConfigurationError as exc:
            raise FileFormatError(str(exc), field=where) from exc
    frustum_raw = doc.get("frustum")
    if not isinstance(frustum_raw, dict):
        raise FileFormatError("missing or malformed object", field="$.frustum")
    try:
        spec = FrustumSpec(
            height=_get(frustum_raw, "h", int, "frustum"),
            width=_get(frustum_raw, "w", int, "frustum"),
            depth_min=_get(frustum_raw, "d_min", float, "frustum"),
            depth_step=_get(frustum_raw, "d_step", float, "frustum"),
            depth_bins=_get(frustum_raw, "d_bins", int, "frustum"),
        )
    except ConfigurationError as exc:
        raise FileFormatError(str(exc), field="$.frustum") from exc
    return rig, spec


def load_calibration(path) -> tuple[list[CameraCalibration], FrustumSpec]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_calibration(fh.read())


def format_calibration(rig: list[CameraCalibration], spec: FrustumSpec) -> str:
    doc = {
        "cameras": [
            {
                "id": cam.camera_id,
                "fx": cam.fx,
                "fy": cam.fy,
                "cx": cam.cx,
                "cy": cam.cy,
                "rotation": [float(x) for x in cam.rotation.reshape(-1)],
                "translation": [float(x) for x in cam.translation],
            }
            for cam in rig
        ],
        "frustum": {
            "h": spec.height,
            "w": spec.width,
            "d_min": spec.depth_min,
            "d_step": spec.depth_step,
            "d_bins": spec.depth_bins,
        },
    }
    return json.dumps(doc, indent=2)


def save_calibration(path, rig: list[CameraCalibration], spec: FrustumSpec) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_calibration(rig, spec))
        fh.write("\n")

"""Per-pixel depth distributions and the depth-weighted point values.

Camera features are carried as a float32 array of shape (N, C, H, W);
depth distributions as float32 (N, D, H, W), each pixel's D entries
summing to one. The weighted per-point feature (weight * pixel feature)
is always computed on the fly by the pooling backends, never stored as
an NHWD x C array.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def normalize_depth(logits: np.ndarray) -> np.ndarray:
    """Softmax depth logits (N, D, H, W) over the depth axis.

    Uses max-subtraction for stability; output is float32 and sums to 1
    over d for every (n, h, w).
    """
    logits = np.asarray(logits)
    if logits.ndim != 4:
        raise ValidationError(f"logits must be (N, D, H, W), got shape {logits.shape}")
    if not np.isfinite(logits).all():
        raise ValidationError("logits contain non-finite values")
    shifted = logits.astype(np.float64) - logits.max(axis=1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum(axis=1, keepdims=True)
    return shifted.astype(np.float32)


def point_weight(dist: np.ndarray, n: int, h: int, w: int, d: int) -> float:
    """Depth probability of frustum point (n, h, w, d).

    This is the scalar every channel of pixel (n, h, w) is rescaled by
    before being pooled at depth bin d.
    """
    n_cams, n_bins, height, width = dist.shape
    for name, value, bound in (
        ("camera", n, n_cams),
        ("row", h, height),
        ("col", w, width),
        ("depth bin", d, n_bins),
    ):
        if not 0 <= value < bound:
            raise IndexError(f"{name} index {value} out of range [0, {bound})")
    return float(dist[n, d, h, w])


def check_depth_distribution(dist: np.ndarray, tol: float = 1e-6) -> None:
    """Raise unless `dist` is a valid per-pixel distribution."""
    if dist.ndim != 4:
        raise ValidationError(f"distribution must be (N, D, H, W), got {dist.shape}")
    if dist.size and dist.min() < 0:
        raise ValidationError("distribution has negative entries")
    sums = dist.sum(axis=1, dtype=np.float64)
    if sums.size and np.abs(sums - 1.0).max() > tol:
        raise ValidationError(
            f"per-pixel depth probabilities must sum to 1 "
            f"(worst deviation {np.abs(sums - 1.0).max():.3e})"
        )

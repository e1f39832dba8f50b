"""Parameter-free recalibrated multi-scale feature fusion.

Each level of the pyramid is reweighted channel-wise by its own channel
means, merged top-down (coarse levels are resized spatially, then thinned
along channels by equidistant sampling, then added to the next finer level),
and finally every merged level is resized to the input resolution and
concatenated.

Channel blocks of the fused tensor are ordered finest first:
``[m3 | m4 | r5]`` with widths ``c3, c4, c5``.
"""
from __future__ import annotations

import numpy as np

from .adapters.base import FeaturePyramid

RECALIBRATIONS = ("raw-mean", "abs-mean")
INTERPOLATIONS = ("bilinear", "nearest")


def recalibrate(level: np.ndarray, strategy: str = "raw-mean") -> np.ndarray:
    """Scale every channel by the mean of that channel."""
    level = np.asarray(level, dtype=np.float64)
    if strategy == "raw-mean":
        weights = level.mean(axis=(0, 1), keepdims=True)
    elif strategy == "abs-mean":
        weights = np.abs(level).mean(axis=(0, 1), keepdims=True)
    else:
        raise ValueError(f"unknown recalibration {strategy!r}")
    return level * weights


def channel_indices(c_high: int, c_low: int) -> np.ndarray:
    if not c_high >= c_low >= 1:
        raise ValueError(f"cannot sample {c_low} channels out of {c_high}")
    return np.arange(c_low) * c_high // c_low


def resample_channels(src: np.ndarray, target_channels: int) -> np.ndarray:
    """Keep ``target_channels`` equidistant channels: k -> floor(k*c_high/c_low)."""
    return src[..., channel_indices(src.shape[-1], target_channels)]


def _positions(n_src: int, n_dst: int) -> np.ndarray:
    # corner-aligned sampling positions
    if n_src == 1 or n_dst == 1:
        return np.zeros(n_dst)
    return np.arange(n_dst) * (n_src - 1) / (n_dst - 1)


def _axis_weights(n_src: int, n_dst: int):
    pos = _positions(n_src, n_dst)
    lo = np.clip(np.floor(pos).astype(int), 0, n_src - 1)
    hi = np.minimum(lo + 1, n_src - 1)
    return lo, hi, pos - lo


def upsample_spatial(src: np.ndarray, target: tuple[int, int], mode: str = "bilinear") -> np.ndarray:
    """Resize an h×w×c tensor up to ``target`` with corner alignment."""
    src = np.asarray(src, dtype=np.float64)
    h, w = src.shape[:2]
    H, W = target
    if H < h or W < w:
        raise ValueError(f"upsample_spatial cannot shrink {h}×{w} to {H}×{W}")
    if (H, W) == (h, w):
        return src.copy()
    if mode == "nearest":
        rows = np.rint(_positions(h, H)).astype(int)
        cols = np.rint(_positions(w, W)).astype(int)
        return src[rows][:, cols]
    if mode != "bilinear":
        raise ValueError(f"unknown interpolation {mode!r}")
    r0, r1, fr = _axis_weights(h, H)
    c0, c1, fc = _axis_weights(w, W)
    # a + (b - a) * t keeps constant regions exactly constant
    top = src[r0]
    tmp = top + (src[r1] - top) * fr[:, None, None]
    left = tmp[:, c0]
    return left + (tmp[:, c1] - left) * fc[None, :, None]


def _align(high: np.ndarray, low: np.ndarray, mode: str) -> np.ndarray:
    # spatial first, then channels
    return resample_channels(upsample_spatial(high, low.shape[:2], mode), low.shape[2])


def fuse_top_down(pyr: FeaturePyramid, recalibration: str = "raw-mean",
                  interpolation: str = "bilinear") -> np.ndarray:
    """Recalibrated top-down fusion at the source image resolution (H×W×(c3+c4+c5))."""
    if not isinstance(pyr, FeaturePyramid):
        raise ValueError("fuse_top_down expects a FeaturePyramid")
    r3, r4, r5 = (recalibrate(lv, recalibration) for lv in pyr.levels)
    m4 = r4 + _align(r5, r4, interpolation)
    m3 = r3 + _align(m4, r3, interpolation)
    return np.concatenate(
        [upsample_spatial(x, pyr.image_shape, interpolation) for x in (m3, m4, r5)], axis=2
    )


def fuse_base(pyr: FeaturePyramid, interpolation: str = "bilinear") -> np.ndarray:
    """Plain multi-scale baseline: upsample raw levels and concatenate."""
    if not isinstance(pyr, FeaturePyramid):
        raise ValueError("fuse_base expects a FeaturePyramid")
    return np.concatenate(
        [upsample_spatial(lv, pyr.image_shape, interpolation) for lv in pyr.levels], axis=2
    )

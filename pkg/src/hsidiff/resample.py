"""Band-wise bicubic resampling: degradation to LR and the matching upsampler.

Catmull-Rom cubic convolution (a = -0.5) with symmetric-reflect borders.
Output pixel i samples input coordinate (i + 0.5) * (n_in / n_out) - 0.5.
Downsampling widens the kernel by the scale ratio (anti-aliasing, as in the
usual imresize degradation); upsampling uses the plain kernel. Weights are
renormalized to sum to one, so constants are preserved exactly.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .cube import HSICube, ImagePair

KERNEL_A = -0.5


def cubic_kernel(x: np.ndarray, a: float = KERNEL_A) -> np.ndarray:
    x = np.abs(x)
    x2 = x * x
    x3 = x2 * x
    near = (a + 2.0) * x3 - (a + 3.0) * x2 + 1.0
    far = a * x3 - 5.0 * a * x2 + 8.0 * a * x - 4.0 * a
    return np.where(x <= 1.0, near, np.where(x < 2.0, far, 0.0))


def reflect_index(idx: np.ndarray, n: int) -> np.ndarray:
    """Map out-of-range indices into [0, n) by symmetric reflection (edge included)."""
    idx = np.asarray(idx)
    period = 2 * n
    idx = np.mod(idx, period)
    idx = np.where(idx < 0, idx + period, idx)
    return np.where(idx >= n, period - 1 - idx, idx)


@lru_cache(maxsize=64)
def _axis_weights(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample positions and kernel weights for resizing one axis.

    Returns (idx [n_out, taps], w [n_out, taps]); idx already reflected into range.
    """
    ratio = n_in / n_out
    fscale = max(ratio, 1.0)  # kernel widening only when shrinking
    support = 2.0 * fscale
    centers = (np.arange(n_out) + 0.5) * ratio - 0.5
    left = np.floor(centers - support).astype(int) + 1
    taps = int(np.ceil(2.0 * support)) + 1
    offsets = np.arange(taps)
    idx = left[:, None] + offsets[None, :]
    w = cubic_kernel((idx - centers[:, None]) / fscale)
    w = w / w.sum(axis=1, keepdims=True)
    return reflect_index(idx, n_in), w


def resize_band(band: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize a single (H, W) band with separable cubic convolution."""
    band = np.asarray(band, dtype=np.float64)
    idx_r, w_r = _axis_weights(band.shape[0], out_h)
    tmp = (band[idx_r, :] * w_r[:, :, None]).sum(axis=1)
    idx_c, w_c = _axis_weights(band.shape[1], out_w)
    out = (tmp[:, idx_c] * w_c[None, :, :]).sum(axis=2)
    return out


def resize_cube(data: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    out = np.empty((out_h, out_w, data.shape[2]), dtype=np.float32)
    for b in range(data.shape[2]):
        out[:, :, b] = resize_band(data[:, :, b], out_h, out_w).astype(np.float32)
    return out


def degrade(hr: HSICube, scale: int) -> ImagePair:
    """Produce the bicubic LR counterpart of an HR cube at an integer scale."""
    if scale not in (2, 3, 4):
        raise ValueError(f"scale must be 2, 3 or 4, got {scale}")
    h, w = hr.spatial
    if h % scale or w % scale:
        raise ValueError(f"spatial dims {h}x{w} not divisible by scale {scale}")
    lr_data = resize_cube(hr.data, h // scale, w // scale)
    lr = HSICube(lr_data, {**hr.meta, "degraded_from": hr.spatial, "scale": scale})
    return ImagePair(hr, lr, scale)


def upsample_bicubic(lr: HSICube, scale: int) -> HSICube:
    """Bicubic upsampling; spatially aligns an LR cube with its HR counterpart."""
    if scale not in (2, 3, 4):
        raise ValueError(f"scale must be 2, 3 or 4, got {scale}")
    h, w = lr.spatial
    up = resize_cube(lr.data, h * scale, w * scale)
    return HSICube(up, {**lr.meta, "upsampled": scale})

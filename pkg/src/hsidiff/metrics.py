"""The six evaluation indices plus spectral curves and error maps.

All functions take (H, W, C) cubes (HSICube or ndarray) normalized to [0, 1];
data range is fixed at 1. Best values: MPSNR +inf, SAM 0 deg, MSSIM 1, CC 1,
RMSE 0, ERGAS 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .cube import HSICube

EPS = 1e-8

SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def _arr(x) -> np.ndarray:
    if isinstance(x, HSICube):
        x = x.data
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"expected (H, W, C) cube, got shape {x.shape}")
    return x


def _pair(ref, cand) -> tuple[np.ndarray, np.ndarray]:
    r, c = _arr(ref), _arr(cand)
    if r.shape != c.shape:
        raise ValueError(f"shape mismatch: {r.shape} vs {c.shape}")
    return r, c


def mpsnr(ref, cand) -> float:
    """Mean over bands of per-band PSNR (data range 1); +inf on exact equality."""
    r, c = _pair(ref, cand)
    vals = []
    for b in range(r.shape[2]):
        mse = np.mean((r[:, :, b] - c[:, :, b]) ** 2)
        vals.append(np.inf if mse == 0.0 else 10.0 * np.log10(1.0 / mse))
    return float(np.mean(vals))


def _gaussian_window(size: int = SSIM_WIN, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    g = np.exp(-((np.arange(size) - half) ** 2) / (2.0 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def ssim_band(x: np.ndarray, y: np.ndarray) -> float:
    """Single-band SSIM, 11x11 Gaussian window sigma 1.5, symmetric-reflect borders."""
    win = _gaussian_window()
    f = lambda im: ndimage.correlate(im, win, mode="reflect")
    mu_x, mu_y = f(x), f(y)
    var_x = f(x * x) - mu_x**2
    var_y = f(y * y) - mu_y**2
    cov = f(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_x**2 + mu_y**2 + SSIM_C1) * (var_x + var_y + SSIM_C2)
    return float(np.mean(num / den))


def mssim(ref, cand) -> float:
    r, c = _pair(ref, cand)
    return float(np.mean([ssim_band(r[:, :, b], c[:, :, b]) for b in range(r.shape[2])]))


def sam_deg(ref, cand, eps: float = EPS) -> float:
    """Mean per-pixel spectral angle in degrees."""
    r, c = _pair(ref, cand)
    dot = np.sum(r * c, axis=2)
    norms = np.linalg.norm(r, axis=2) * np.linalg.norm(c, axis=2)
    cos = np.clip(dot / np.maximum(norms, eps), -1.0, 1.0)
    return float(np.mean(np.degrees(np.arccos(cos))))


def cc(ref, cand) -> float:
    """Mean over bands of the Pearson correlation between band images."""
    r, c = _pair(ref, cand)
    vals = []
    for b in range(r.shape[2]):
        x = r[:, :, b].ravel()
        y = c[:, :, b].ravel()
        sx, sy = x.std(), y.std()
        if sx == 0.0 or sy == 0.0:
            raise ValueError(f"zero variance band: band {b}")
        vals.append(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))
    return float(np.mean(vals))


def rmse(ref, cand) -> float:
    r, c = _pair(ref, cand)
    return float(np.sqrt(np.mean((r - c) ** 2)))


def ergas(ref, cand, scale: int, eps: float = EPS) -> float:
    """100/scale * sqrt(mean over bands of (RMSE_b / mean_b)^2)."""
    r, c = _pair(ref, cand)
    terms = []
    for b in range(r.shape[2]):
        rm = np.sqrt(np.mean((r[:, :, b] - c[:, :, b]) ** 2))
        mu = np.mean(r[:, :, b])
        terms.append((rm / (mu + eps)) ** 2)
    return float(100.0 / scale * np.sqrt(np.mean(terms)))


@dataclass
class MetricsReport:
    """The six indices for one (reference, candidate) pair at a given scale."""

    mpsnr: float
    mssim: float
    sam: float
    cc: float
    rmse: float
    ergas: float
    scale: int

    FIELDS = (
        ("mpsnr", "MPSNR", "up"),
        ("mssim", "MSSIM", "up"),
        ("cc", "CC", "up"),
        ("rmse", "RMSE", "down"),
        ("sam", "SAM", "down"),
        ("ergas", "ERGAS", "down"),
    )

    def to_dict(self) -> dict:
        out = {}
        for key, _, _ in self.FIELDS:
            v = getattr(self, key)
            if np.isinf(v):
                out[key] = "inf"
            elif np.isnan(v):
                out[key] = "undefined"
            else:
                out[key] = float(v)
        out["scale"] = self.scale
        return out

    def format_lines(self, label: str = "") -> list[str]:
        arrows = {"up": "↑", "down": "↓"}
        lines = [f"scale={self.scale}" + (f"  [{label}]" if label else "")]
        for key, name, direction in self.FIELDS:
            v = getattr(self, key)
            text = "inf" if np.isinf(v) else f"{v:.4f}"
            lines.append(f"  {name} {arrows[direction]}: {text}")
        return lines


def compute_report(ref, cand, scale: int) -> MetricsReport:
    return MetricsReport(
        mpsnr=mpsnr(ref, cand),
        mssim=mssim(ref, cand),
        sam=sam_deg(ref, cand),
        cc=cc(ref, cand),
        rmse=rmse(ref, cand),
        ergas=ergas(ref, cand, scale),
        scale=scale,
    )


def spectral_curve(cube, x: int, y: int) -> np.ndarray:
    """The spectrum at column x, row y (image convention)."""
    arr = _arr(cube)
    h, w, _ = arr.shape
    if not (0 <= x < w and 0 <= y < h):
        raise ValueError(f"coordinates ({x}, {y}) out of range for {w}x{h}")
    return arr[y, x, :].copy()


def error_map(ref, cand, bands: tuple[int, int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel mean absolute error over three bands, plus an 'inferno' rendering.

    Returns (error [H, W] float64, rgb [H, W, 3] uint8). The rendering is
    normalized by the max error (an all-zero map renders black).
    """
    r, c = _pair(ref, cand)
    for b in bands:
        if not 0 <= b < r.shape[2]:
            raise ValueError(f"band index {b} out of range")
    err = np.mean([np.abs(r[:, :, b] - c[:, :, b]) for b in bands], axis=0)
    peak = err.max()
    scaled = err / peak if peak > 0 else err
    import matplotlib

    cmap = matplotlib.colormaps["inferno"]
    rgb = (cmap(scaled)[:, :, :3] * 255.0 + 0.5).astype(np.uint8)
    return err, rgb

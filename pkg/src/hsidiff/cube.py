"""Hyperspectral cube type, file I/O, normalization, patches, synthetic data.

A cube is an (H, W, C) float32 array of reflectance values. The native file
format is a single JSON header line followed by a raw little-endian float32
band-sequential (BSQ) payload, so round trips are bit-exact. A bare BSQ
payload with a JSON sidecar header (``<path>.hdr``) can also be ingested.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .errors import CubeLoadError

MIN_H, MIN_W, MIN_C = 8, 8, 2


@dataclass
class HSICube:
    """One hyperspectral image: (H, W, C) float32 data plus provenance meta."""

    data: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3:
            raise ValueError(f"cube data must be 3-D (H, W, C), got shape {self.data.shape}")
        if not np.isfinite(self.data).all():
            idx = tuple(int(i) for i in np.argwhere(~np.isfinite(self.data))[0])
            raise ValueError(f"non-finite value at index {idx}")

    @property
    def spatial(self) -> tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]

    @property
    def band_count(self) -> int:
        return self.data.shape[2]

    def band(self, b: int) -> np.ndarray:
        return self.data[:, :, b]

    def with_data(self, data: np.ndarray, **meta_updates) -> "HSICube":
        meta = dict(self.meta)
        meta.update(meta_updates)
        return HSICube(data, meta)


@dataclass
class ImagePair:
    """Co-registered HR/LR cubes related by an integer scale factor."""

    hr: HSICube
    lr: HSICube
    scale: int

    def __post_init__(self):
        if self.scale not in (2, 3, 4):
            raise ValueError(f"scale must be 2, 3 or 4, got {self.scale}")
        hh, hw = self.hr.spatial
        lh, lw = self.lr.spatial
        if (hh, hw) != (lh * self.scale, lw * self.scale):
            raise ValueError(
                f"hr spatial {self.hr.spatial} is not lr spatial {self.lr.spatial} x {self.scale}"
            )
        if self.hr.band_count != self.lr.band_count:
            raise ValueError("hr and lr band counts differ")


@dataclass
class PatchSpec:
    """Patch extraction geometry, in HR pixels."""

    patch_size: int
    stride: int
    augment: bool = False

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.patch_size < 1:
            raise ValueError("patch_size must be >= 1")


def _payload_from_cube(cube: HSICube) -> bytes:
    # BSQ on disk: band-major (C, H, W), little-endian float32
    return np.ascontiguousarray(cube.data.transpose(2, 0, 1)).astype("<f4").tobytes()


def _cube_from_payload(raw: bytes, h: int, w: int, c: int, where: str) -> np.ndarray:
    expected = h * w * c * 4
    if len(raw) != expected:
        raise CubeLoadError(
            f"{where}: payload size mismatch, expected {expected} bytes "
            f"({h}x{w}x{c} float32), got {len(raw)}"
        )
    flat = np.frombuffer(raw, dtype="<f4")
    if not np.isfinite(flat).all():
        bad = int(np.argmin(np.isfinite(flat)))
        b, rest = divmod(bad, h * w)
        i, j = divmod(rest, w)
        raise CubeLoadError(f"{where}: non-finite value at band {b}, pixel ({i}, {j})")
    return flat.reshape(c, h, w).transpose(1, 2, 0).copy()


def save_cube(cube: HSICube, path: str | Path):
    """Write a cube in the native format (JSON header line + BSQ float32 payload)."""
    path = Path(path)
    header = {
        "height": cube.data.shape[0],
        "width": cube.data.shape[1],
        "bands": cube.data.shape[2],
        "dtype": "f32le",
        "layout": "bsq",
        "meta": cube.meta,
    }
    if "norm_min" in cube.meta and "norm_max" in cube.meta:
        header["min"] = cube.meta["norm_min"]
        header["max"] = cube.meta["norm_max"]
    with open(path, "wb") as f:
        f.write(json.dumps(header).encode("utf-8") + b"\n")
        f.write(_payload_from_cube(cube))


def load_cube(path: str | Path, format: str = "native") -> HSICube:
    """Load a cube from the native format or a raw BSQ payload with sidecar header."""
    path = Path(path)
    if not path.exists():
        raise CubeLoadError(f"no such file: {path}")
    if format == "native":
        with open(path, "rb") as f:
            header_line = f.readline()
            raw = f.read()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CubeLoadError(f"{path}: malformed header ({e})") from e
        for key in ("height", "width", "bands"):
            if key not in header:
                raise CubeLoadError(f"{path}: malformed header, missing '{key}'")
        if header.get("dtype", "f32le") != "f32le":
            raise CubeLoadError(f"{path}: unsupported dtype {header.get('dtype')!r}")
        if header.get("layout", "bsq") != "bsq":
            raise CubeLoadError(f"{path}: unsupported layout {header.get('layout')!r}")
        h, w, c = int(header["height"]), int(header["width"]), int(header["bands"])
        data = _cube_from_payload(raw, h, w, c, str(path))
        meta = dict(header.get("meta", {}))
    elif format == "raw-bsq":
        sidecar = path.with_name(path.name + ".hdr")
        if not sidecar.exists():
            raise CubeLoadError(f"missing sidecar header: {sidecar}")
        try:
            header = json.loads(sidecar.read_text())
        except json.JSONDecodeError as e:
            raise CubeLoadError(f"{sidecar}: malformed header ({e})") from e
        for key in ("height", "width", "bands"):
            if key not in header:
                raise CubeLoadError(f"{sidecar}: malformed header, missing '{key}'")
        h, w, c = int(header["height"]), int(header["width"]), int(header["bands"])
        data = _cube_from_payload(path.read_bytes(), h, w, c, str(path))
        meta = {}
    else:
        raise CubeLoadError(f"unknown format {format!r}")
    meta["source"] = str(path)
    meta["source_dtype"] = "f32le"
    return HSICube(data, meta)


def normalize(cube: HSICube) -> HSICube:
    """Min-max scale the whole cube to [0, 1], recording (min, max) for inversion.

    Global (not per-band) scaling preserves relative band magnitudes, which
    the spectral-angle measures depend on.
    """
    lo = float(cube.data.min())
    hi = float(cube.data.max())
    if hi == lo:
        raise ValueError("degenerate dynamic range: cube is constant")
    scaled = (cube.data - lo) / (hi - lo)
    return cube.with_data(scaled.astype(np.float32), norm_min=lo, norm_max=hi)


def denormalize(cube: HSICube) -> HSICube:
    """Invert `normalize` using the (min, max) recorded in meta."""
    if "norm_min" not in cube.meta or "norm_max" not in cube.meta:
        raise ValueError("cube has no recorded normalization range")
    lo, hi = cube.meta["norm_min"], cube.meta["norm_max"]
    meta = {k: v for k, v in cube.meta.items() if k not in ("norm_min", "norm_max")}
    return HSICube(cube.data * (hi - lo) + lo, meta)


def synth_cube(h: int, w: int, c: int, seed: int) -> HSICube:
    """Generate a deterministic synthetic cube with strongly correlated adjacent bands.

    A few random-phase sinusoid fields are mixed through smooth Gaussian
    spectral envelopes, so each band is a slowly varying blend of shared
    spatial patterns. Frequencies extend to roughly a fifth of the spatial
    size, leaving real information for a super-resolver to recover.
    """
    if h < MIN_H or w < MIN_W or c < MIN_C:
        raise ValueError(f"dimensions below minimum {MIN_H}x{MIN_W}x{MIN_C}")
    rng = np.random.default_rng(seed)
    n_patterns = 4
    n_waves = 6
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    patterns = np.zeros((n_patterns, h, w))
    for k in range(n_patterns):
        for _ in range(n_waves):
            fy = rng.uniform(0.3, h / 5.0) / h
            fx = rng.uniform(0.3, w / 5.0) / w
            phase = rng.uniform(0.0, 2.0 * np.pi)
            amp = rng.uniform(0.4, 1.0)
            patterns[k] += amp * np.sin(2.0 * np.pi * (fy * yy + fx * xx) + phase)
        patterns[k] /= np.abs(patterns[k]).max()

    # Smooth spectral envelopes: Gaussian bumps spread along the band axis.
    bands = np.arange(c)
    centers = np.linspace(0, c - 1, n_patterns)
    width = max(c / 2.5, 2.0)
    env = np.exp(-0.5 * ((bands[None, :] - centers[:, None]) / width) ** 2)
    env *= rng.uniform(0.5, 1.0, size=(n_patterns, 1))

    data = np.einsum("kb,khw->hwb", env, patterns)
    data -= data.min()
    peak = data.max()
    if peak > 0:
        data /= peak
    data = 0.05 + 0.9 * data  # keep band means away from zero for ERGAS
    return HSICube(data.astype(np.float32), {"synthetic": True, "seed": seed})


def extract_patches(pair: ImagePair, spec: PatchSpec) -> list[ImagePair]:
    """Cut co-registered HR/LR patches on a regular stride grid.

    Patch count before augmentation is
    (floor((H-p)/stride)+1) * (floor((W-p)/stride)+1). With ``augment`` the
    eight dihedral variants (rotations and flips) of every patch are appended.
    """
    h, w = pair.hr.spatial
    p, s = spec.patch_size, spec.stride
    if p > min(h, w):
        raise ValueError(f"patch larger than image: {p} > min{(h, w)}")
    if p % pair.scale != 0:
        raise ValueError("patch_size must be a multiple of scale")
    if s % pair.scale != 0:
        raise ValueError("stride must be a multiple of scale for LR co-registration")

    out: list[ImagePair] = []
    sc = pair.scale
    for i in range(0, h - p + 1, s):
        for j in range(0, w - p + 1, s):
            hr_d = pair.hr.data[i : i + p, j : j + p].copy()
            lr_d = pair.lr.data[i // sc : (i + p) // sc, j // sc : (j + p) // sc].copy()
            variants: Iterable[tuple[str, np.ndarray, np.ndarray]]
            if spec.augment:
                variants = _dihedral_variants(hr_d, lr_d)
            else:
                variants = [("id", hr_d, lr_d)]
            for tag, hv, lv in variants:
                out.append(
                    ImagePair(
                        HSICube(hv, {"patch_origin": (i, j), "augment": tag}),
                        HSICube(lv, {"patch_origin": (i // sc, j // sc), "augment": tag}),
                        sc,
                    )
                )
    return out


def _dihedral_variants(hr: np.ndarray, lr: np.ndarray):
    for k in range(4):
        hv = np.rot90(hr, k, axes=(0, 1))
        lv = np.rot90(lr, k, axes=(0, 1))
        yield f"rot{90 * k}", hv.copy(), lv.copy()
        yield f"rot{90 * k}+flip", hv[:, ::-1].copy(), lv[:, ::-1].copy()


def patch_grid_count(h: int, w: int, patch: int, stride: int) -> int:
    return ((h - patch) // stride + 1) * ((w - patch) // stride + 1)


def false_color(cube: HSICube, bands: tuple[int, int, int]) -> np.ndarray:
    """Render three bands as an 8-bit RGB composite (values clipped to [0, 1])."""
    c = cube.band_count
    for b in bands:
        if not 0 <= b < c:
            raise ValueError(f"band index {b} out of range for {c} bands")
    rgb = np.stack([cube.data[:, :, b] for b in bands], axis=-1)
    return (np.clip(rgb, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_false_color_png(cube: HSICube, bands: tuple[int, int, int], path: str | Path):
    from PIL import Image

    Image.fromarray(false_color(cube, bands), mode="RGB").save(Path(path))

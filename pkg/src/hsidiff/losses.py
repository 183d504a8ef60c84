"""Reconstruction losses: L1, spectral angle, spatial/spectral gradient, perceptual.

All four are differentiable torch expressions over (N, C, H, W) batches with
bands as channels. Convenience coercion: an HSICube or (H, W, C) ndarray is
treated as a single cube; a (C, H, W) tensor as a single batch item.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .cube import HSICube

SAM_EPS = 1e-8


@dataclass
class LossConfig:
    """Composite weights: total = L1 + lambda1*SAM + lambda2*gradient + lambda3*perceptual."""

    lambda1: float = 0.3
    lambda2: float = 0.1
    lambda3: float = 0.001

    def __post_init__(self):
        if min(self.lambda1, self.lambda2, self.lambda3) < 0:
            raise ValueError("loss weights must be >= 0")


def as_batch(x) -> torch.Tensor:
    """Coerce a cube-like value to an (N, C, H, W) tensor."""
    if isinstance(x, HSICube):
        x = x.data
    if isinstance(x, np.ndarray):
        if x.ndim != 3:
            raise ValueError(f"expected (H, W, C) array, got shape {x.shape}")
        return torch.from_numpy(np.ascontiguousarray(x.transpose(2, 0, 1)))[None]
    if isinstance(x, torch.Tensor):
        if x.ndim == 3:
            return x[None]
        if x.ndim == 4:
            return x
        raise ValueError(f"expected (C, H, W) or (N, C, H, W) tensor, got shape {tuple(x.shape)}")
    raise TypeError(f"cannot interpret {type(x).__name__} as a cube batch")


def _pair(re, hr) -> tuple[torch.Tensor, torch.Tensor]:
    re_b, hr_b = as_batch(re), as_batch(hr)
    if re_b.shape != hr_b.shape:
        raise ValueError(f"shape mismatch: {tuple(re_b.shape)} vs {tuple(hr_b.shape)}")
    return re_b, hr_b


def loss_l1(re, hr) -> torch.Tensor:
    re_b, hr_b = _pair(re, hr)
    return (re_b - hr_b).abs().mean()


def loss_sam(re, hr, eps: float = SAM_EPS) -> torch.Tensor:
    """Mean per-pixel spectral angle divided by pi (dimensionless, in [0, 1]).

    The norm product is floored at eps (not shifted by it) so identical
    spectra give zero to fp64 precision while zero vectors stay finite;
    the angle is evaluated in float64 because arccos near 1 loses half the
    working precision.
    """
    re_b, hr_b = _pair(re, hr)
    re_b, hr_b = re_b.double(), hr_b.double()
    dot = (re_b * hr_b).sum(dim=1)
    norms = re_b.norm(dim=1) * hr_b.norm(dim=1)
    cos = (dot / norms.clamp(min=eps)).clamp(-1.0, 1.0)
    return torch.arccos(cos).mean() / torch.pi


def loss_gradient(re, hr) -> torch.Tensor:
    """Mean absolute difference of forward differences along H, W and band axes."""
    re_b, hr_b = _pair(re, hr)

    def diffs(x):
        return (
            x[:, :, 1:, :] - x[:, :, :-1, :],
            x[:, :, :, 1:] - x[:, :, :, :-1],
            x[:, 1:, :, :] - x[:, :-1, :, :],
        )

    total = 0.0
    count = 0
    for dr, dh in zip(diffs(re_b), diffs(hr_b)):
        total = total + (dr - dh).abs().sum()
        count += dr.numel()
    return total / count


class PerceptualExtractor(nn.Module):
    """Fixed (never trained) feature map over 3-channel windows.

    Backends: "fixed-random-conv" (default; seeded random conv stack, no
    downloads) or "pretrained-vgg19" (torchvision plug-in, requires cached
    weights).
    """

    def __init__(self, backend: str = "fixed-random-conv", seed: int = 101):
        super().__init__()
        self.backend = backend
        if backend == "fixed-random-conv":
            g = torch.Generator().manual_seed(seed)
            self.net = nn.Sequential(
                nn.Conv2d(3, 16, 3, padding=1),
                nn.SiLU(),
                nn.Conv2d(16, 32, 3, stride=2, padding=1),
                nn.SiLU(),
                nn.Conv2d(32, 32, 3, padding=1),
            )
            for m in self.net:
                if isinstance(m, nn.Conv2d):
                    fan_in = m.in_channels * 9
                    m.weight.data = torch.randn(m.weight.shape, generator=g) * (2.0 / fan_in) ** 0.5
                    m.bias.data.zero_()
        elif backend == "pretrained-vgg19":
            self.net = _vgg19_features()
        else:
            raise ValueError(f"unknown perceptual backend {backend!r}")
        for p in self.net.parameters():
            p.requires_grad_(False)
        self.net.eval()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != 3:
            raise ValueError("perceptual extractor consumes 3-channel input")
        return self.net(x)


def _vgg19_features():
    try:
        from torchvision import models

        vgg = models.vgg19(weights=models.VGG19_Weights.IMAGENET1K_V1)
    except Exception as e:  # no torchvision, or no cached weights / network
        raise RuntimeError(
            "pretrained-vgg19 backend needs torchvision with cached IMAGENET1K_V1 "
            f"weights; use the fixed-random-conv backend instead ({e})"
        ) from e
    return nn.Sequential(*list(vgg.features[:9]))  # through relu2_2


def band_windows(c: int) -> list[int]:
    """Start indices of consecutive 3-band windows; last window right-aligned."""
    if c < 3:
        raise ValueError(f"perceptual loss needs at least 3 bands, got {c}")
    starts = list(range(0, c - 2, 3))
    if starts[-1] + 3 < c:
        starts.append(c - 3)
    return starts


def loss_perceptual(re, hr, extractor) -> torch.Tensor:
    """Mean over 3-band windows of mean-abs feature difference under `extractor`."""
    re_b, hr_b = _pair(re, hr)
    starts = band_windows(re_b.shape[1])
    total = 0.0
    for s in starts:
        fr = extractor(re_b[:, s : s + 3])
        fh = extractor(hr_b[:, s : s + 3])
        total = total + (fr - fh).abs().mean()
    return total / len(starts)


def loss_total(re, hr, cfg: LossConfig, extractor) -> torch.Tensor:
    out = loss_l1(re, hr)
    if cfg.lambda1:
        out = out + cfg.lambda1 * loss_sam(re, hr)
    if cfg.lambda2:
        out = out + cfg.lambda2 * loss_gradient(re, hr)
    if cfg.lambda3:
        out = out + cfg.lambda3 * loss_perceptual(re, hr, extractor)
    return out

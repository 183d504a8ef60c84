"""Small conditional U-Net predicting the injected noise.

The noisy latent and the LR-conditioning latent are concatenated on the
channel axis at every call; timestep enters through a sinusoidal embedding
added inside each residual block. A call counter tracks denoiser invocations
for the inference-cost accounting.
"""

from __future__ import annotations

import math

import torch
from torch import nn
from torch.nn import functional as F


class SinusoidalTimeEmbedding(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        if dim % 2:
            raise ValueError("time embedding dim must be even")
        self.dim = dim

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        half = self.dim // 2
        freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float32) / (half - 1))
        ang = t.float()[:, None] * freqs[None, :]
        return torch.cat([torch.sin(ang), torch.cos(ang)], dim=1)


def _group_norm(ch: int) -> nn.GroupNorm:
    return nn.GroupNorm(math.gcd(ch, 8), ch)


class ResBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, time_dim: int):
        super().__init__()
        self.norm1 = _group_norm(in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.norm2 = _group_norm(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.time_proj = nn.Linear(time_dim, out_ch)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()
        self.act = nn.SiLU()

    def forward(self, x, temb):
        h = self.conv1(self.act(self.norm1(x)))
        h = h + self.time_proj(temb)[:, :, None, None]
        h = self.conv2(self.act(self.norm2(h)))
        return h + self.skip(x)


class Denoiser(nn.Module):
    """epsilon_theta(z_t, t, cond) with cond concatenated channel-wise.

    Spatial dims must be divisible by 2**(len(widths) - 1).
    """

    def __init__(
        self,
        z_channels: int,
        cond_channels: int | None = None,
        widths: tuple[int, ...] = (32, 48),
        time_dim: int = 64,
    ):
        super().__init__()
        if len(widths) < 2:
            raise ValueError("need at least two widths (one downsampling level)")
        self.z_channels = z_channels
        self.cond_channels = z_channels if cond_channels is None else cond_channels
        self.widths = tuple(widths)
        self.time_embed = nn.Sequential(
            SinusoidalTimeEmbedding(time_dim),
            nn.Linear(time_dim, time_dim),
            nn.SiLU(),
            nn.Linear(time_dim, time_dim),
        )
        self.stem = nn.Conv2d(self.z_channels + self.cond_channels, widths[0], 3, padding=1)
        self.down_blocks = nn.ModuleList(
            ResBlock(widths[i], widths[i], time_dim) for i in range(len(widths) - 1)
        )
        self.downsamples = nn.ModuleList(
            nn.Conv2d(widths[i], widths[i + 1], 3, stride=2, padding=1)
            for i in range(len(widths) - 1)
        )
        self.mid = ResBlock(widths[-1], widths[-1], time_dim)
        self.up_blocks = nn.ModuleList(
            ResBlock(widths[i + 1] + widths[i], widths[i], time_dim)
            for i in reversed(range(len(widths) - 1))
        )
        self.out = nn.Conv2d(widths[0], self.z_channels, 3, padding=1)
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)
        self.call_count = 0

    def reset_call_count(self):
        self.call_count = 0

    def forward(self, z_t: torch.Tensor, t, cond: torch.Tensor) -> torch.Tensor:
        self.call_count += 1
        if not torch.is_tensor(t):
            t = torch.tensor([t], dtype=torch.long)
        if t.ndim == 0:
            t = t[None]
        if t.shape[0] == 1 and z_t.shape[0] > 1:
            t = t.expand(z_t.shape[0])
        temb = self.time_embed(t)
        x = self.stem(torch.cat([z_t, cond], dim=1))
        skips = []
        for blk, down in zip(self.down_blocks, self.downsamples):
            x = blk(x, temb)
            skips.append(x)
            x = down(x)
        x = self.mid(x, temb)
        for blk, skip in zip(self.up_blocks, reversed(skips)):
            x = F.interpolate(x, scale_factor=2, mode="nearest")
            x = blk(torch.cat([x, skip], dim=1), temb)
        return self.out(x)

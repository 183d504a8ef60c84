"""Group autoencoder: shared per-group encoder, local decoders, global refiner.

Every band group passes through one shared encoder (one cube in, several
latents out). Decoding is asymmetric: each latent is decoded back to its
group locally, groups are fused by overlap mean, and a residual global
refiner smooths the fused cube. The refiner can be disabled (the no-GD
ablation), in which case decode degenerates to the fused local decodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .cube import HSICube
from .errors import NumericalAbort
from .grouping import GroupingConfig, plan_groups
from .losses import LossConfig, PerceptualExtractor, loss_total

_ACTIVATIONS = {"relu": nn.ReLU, "silu": nn.SiLU, "gelu": nn.GELU}


@dataclass
class GAEConfig:
    latent_channels: int = 8
    latent_downscale: int = 2
    enc_widths: tuple[int, ...] = (32, 48)
    dec_widths: tuple[int, ...] = (48, 32)
    activation: str = "silu"
    global_widths: tuple[int, ...] = (32, 32)
    global_enabled: bool = True

    def __post_init__(self):
        d = self.latent_downscale
        if d < 1 or (d & (d - 1)):
            raise ValueError("latent_downscale must be a power of two")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_down(self) -> int:
        return self.latent_downscale.bit_length() - 1


@dataclass
class LatentList:
    """One latent per band group, each (latent_channels, h', w')."""

    latents: list[torch.Tensor]
    group_plan: list[tuple[int, int]]
    source_bands: int

    def __len__(self) -> int:
        return len(self.latents)

    def stacked(self) -> torch.Tensor:
        return torch.stack(self.latents, dim=0)


class GroupEncoder(nn.Module):
    def __init__(self, cfg: GAEConfig, n_subs: int):
        super().__init__()
        act = _ACTIVATIONS[cfg.activation]
        w = cfg.enc_widths
        layers: list[nn.Module] = [nn.Conv2d(n_subs, w[0], 3, padding=1), act()]
        ch = w[0]
        for i in range(cfg.n_down):
            nxt = w[min(i + 1, len(w) - 1)]
            layers += [nn.Conv2d(ch, nxt, 3, stride=2, padding=1), act()]
            ch = nxt
        layers += [nn.Conv2d(ch, cfg.latent_channels, 3, padding=1)]
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        return self.net(x)


class LocalDecoder(nn.Module):
    def __init__(self, cfg: GAEConfig, n_subs: int):
        super().__init__()
        act = _ACTIVATIONS[cfg.activation]
        w = cfg.dec_widths
        layers: list[nn.Module] = [nn.Conv2d(cfg.latent_channels, w[0], 3, padding=1), act()]
        ch = w[0]
        for i in range(cfg.n_down):
            nxt = w[min(i + 1, len(w) - 1)]
            layers += [
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(ch, nxt, 3, padding=1),
                act(),
            ]
            ch = nxt
        layers += [nn.Conv2d(ch, ch, 3, padding=1), act(), nn.Conv2d(ch, n_subs, 3, padding=1)]
        self.net = nn.Sequential(*layers)

    def forward(self, z):
        return self.net(z)


class GlobalRefiner(nn.Module):
    """Residual smoothing over the fused full-band cube."""

    def __init__(self, cfg: GAEConfig, bands: int):
        super().__init__()
        act = _ACTIVATIONS[cfg.activation]
        w = cfg.global_widths
        layers: list[nn.Module] = [nn.Conv2d(bands, w[0], 3, padding=1), act()]
        for i in range(len(w) - 1):
            layers += [nn.Conv2d(w[i], w[i + 1], 3, padding=1), act()]
        out = nn.Conv2d(w[-1], bands, 3, padding=1)
        # start as the identity residual so refinement never hurts early training
        nn.init.zeros_(out.weight)
        nn.init.zeros_(out.bias)
        layers.append(out)
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        return x + self.net(x)


def merge_groups_torch(
    groups: torch.Tensor, plan: Sequence[tuple[int, int]], bands: int
) -> torch.Tensor:
    """Differentiable overlap-mean fuse of (B, G, n_subs, H, W) into (B, bands, H, W)."""
    b, g, _, h, w = groups.shape
    out = groups.new_zeros((b, bands, h, w))
    cover = groups.new_zeros(bands)
    for i, (s, e) in enumerate(plan):
        out[:, s:e] += groups[:, i]
        cover[s:e] += 1
    if (cover == 0).any():
        raise ValueError("coverage gap in group plan")
    return out / cover[None, :, None, None]


class GroupAutoencoder(nn.Module):
    """Shared encoder + local decoder over groups, residual global refiner over bands."""

    def __init__(self, gae_cfg: GAEConfig, grouping_cfg: GroupingConfig, bands: int):
        super().__init__()
        self.cfg = gae_cfg
        self.grouping = grouping_cfg
        self.bands = bands
        self.plan = plan_groups(bands, grouping_cfg)
        self.encoder = GroupEncoder(gae_cfg, grouping_cfg.n_subs)
        self.local_decoder = LocalDecoder(gae_cfg, grouping_cfg.n_subs)
        self.refiner = GlobalRefiner(gae_cfg, bands) if gae_cfg.global_enabled else None

    def encoder_parameter_count(self) -> int:
        return sum(p.numel() for p in self.encoder.parameters())

    def decoder_parameter_count(self) -> int:
        n = sum(p.numel() for p in self.local_decoder.parameters())
        if self.refiner is not None:
            n += sum(p.numel() for p in self.refiner.parameters())
        return n

    def encode_groups(self, groups: torch.Tensor) -> torch.Tensor:
        """(B, G, n_subs, H, W) -> (B, G, zc, H/d, W/d); one shared encoder."""
        b, g = groups.shape[:2]
        flat = groups.reshape(b * g, *groups.shape[2:])
        z = self.encoder(flat)
        return z.reshape(b, g, *z.shape[1:])

    def decode_groups(self, latents: torch.Tensor) -> torch.Tensor:
        """(B, G, zc, h, w) -> (B, bands, H, W): local decode, fuse, refine."""
        b, g = latents.shape[:2]
        flat = latents.reshape(b * g, *latents.shape[2:])
        dec = self.local_decoder(flat)
        dec = dec.reshape(b, g, *dec.shape[1:])
        fused = merge_groups_torch(dec, self.plan, self.bands)
        if self.refiner is None:
            return fused
        return self.refiner(fused)

    def forward(self, groups: torch.Tensor) -> torch.Tensor:
        return self.decode_groups(self.encode_groups(groups))


def cube_to_groups_tensor(cube: HSICube, plan: Sequence[tuple[int, int]]) -> torch.Tensor:
    """(H, W, C) cube -> (1, G, n_subs, H, W) float32 tensor of band groups."""
    chw = torch.from_numpy(np.ascontiguousarray(cube.data.transpose(2, 0, 1)))
    return torch.stack([chw[s:e] for s, e in plan], dim=0)[None]


def encode(cube: HSICube, cfg: GroupingConfig, model: GroupAutoencoder) -> LatentList:
    """Map one cube to its per-group latents (deterministic, no grad)."""
    h, w = cube.spatial
    d = model.cfg.latent_downscale
    if h % d or w % d:
        raise ValueError(f"spatial dims {h}x{w} not divisible by latent downscale {d}")
    plan = plan_groups(cube.band_count, cfg)
    if plan != model.plan:
        raise ValueError("grouping config does not match the model's group plan")
    model.eval()
    with torch.no_grad():
        z = model.encode_groups(cube_to_groups_tensor(cube, plan))
    return LatentList([z[0, i] for i in range(z.shape[1])], plan, cube.band_count)


def decode(latents: LatentList, model: GroupAutoencoder) -> HSICube:
    """Decode a latent list back to a cube (local decode, fuse, refine)."""
    if latents.group_plan != model.plan or latents.source_bands != model.bands:
        raise ValueError("latent list does not match the model's group plan")
    model.eval()
    with torch.no_grad():
        out = model.decode_groups(latents.stacked()[None])
    data = out[0].numpy().transpose(1, 2, 0).astype(np.float32)
    return HSICube(data, {"decoded": True})


@dataclass
class OptimizerParams:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 4


@dataclass
class GAETrainResult:
    model: GroupAutoencoder
    curve: list[float]
    optimizer_state: dict
    generator_state: torch.Tensor
    steps_done: int


def train_gae(
    patches: Sequence[HSICube] | Sequence[np.ndarray],
    grouping_cfg: GroupingConfig,
    gae_cfg: GAEConfig,
    loss_cfg: LossConfig,
    steps: int,
    opt: OptimizerParams | None = None,
    seed: int = 0,
    extractor: PerceptualExtractor | None = None,
    resume: GAETrainResult | None = None,
    model: GroupAutoencoder | None = None,
) -> GAETrainResult:
    """Reconstruction training on HR patches with the four-term loss.

    Deterministic per seed; resuming from a result continues the exact batch
    stream. Aborts on a non-finite loss.
    """
    opt = opt or OptimizerParams()
    arrays = [p.data if isinstance(p, HSICube) else np.asarray(p, np.float32) for p in patches]
    if not arrays:
        raise ValueError("no training patches")
    bands = arrays[0].shape[2]
    plan = plan_groups(bands, grouping_cfg)
    if model is None and resume is not None:
        model = resume.model
    if model is None:
        torch.manual_seed(seed)
        model = GroupAutoencoder(gae_cfg, grouping_cfg, bands)
    if extractor is None and loss_cfg.lambda3 > 0:
        extractor = PerceptualExtractor()

    groups = torch.stack(
        [cube_to_groups_tensor(HSICube(a), plan)[0] for a in arrays]
    )  # (N, G, n_subs, H, W)
    targets = torch.stack(
        [torch.from_numpy(np.ascontiguousarray(a.transpose(2, 0, 1))) for a in arrays]
    )  # (N, C, H, W)

    optimizer = torch.optim.Adam(model.parameters(), lr=opt.lr, betas=(opt.beta1, opt.beta2))
    generator = torch.Generator().manual_seed(seed)
    curve: list[float] = []
    start = 0
    if resume is not None:
        optimizer.load_state_dict(resume.optimizer_state)
        generator.set_state(resume.generator_state)
        curve = list(resume.curve)
        start = resume.steps_done

    n = groups.shape[0]
    model.train()
    for step in range(start, start + steps):
        idx = torch.randint(0, n, (min(opt.batch_size, n),), generator=generator)
        recon = model(groups[idx])
        loss = loss_total(recon, targets[idx], loss_cfg, extractor)
        if not torch.isfinite(loss):
            raise NumericalAbort(step)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        curve.append(float(loss.detach()))
    model.eval()
    return GAETrainResult(model, curve, optimizer.state_dict(), generator.get_state(), start + steps)

"""Conditional DDPM over latents: schedule, forward corruption, training, sampling.

Timesteps are 1-based (t in 1..T); schedule arrays are 0-indexed, so alpha_t
is ``alphas[t-1]``. The reverse update is the plain ancestral step

    z_{t-1} = (z_t - (1-a_t)/sqrt(1-abar_t) * eps_theta(z_t, t, z_lr)) / sqrt(a_t)
              + sqrt(1-a_t) * eps,    eps = 0 when t == 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .errors import NumericalAbort

# linear-schedule reference range at T=1000; rescaled by 1000/T when the
# config leaves beta_min/beta_max unset
BETA_REF_MIN = 1e-4
BETA_REF_MAX = 2e-2
BETA_REF_T = 1000


@dataclass
class DiffusionConfig:
    T: int = 100
    schedule: str = "linear"
    beta_min: float | None = None
    beta_max: float | None = None
    time_dim: int = 64
    widths: tuple[int, ...] = (32, 48)

    def resolved_betas(self) -> tuple[float, float]:
        if (self.beta_min is None) != (self.beta_max is None):
            raise ValueError("set both beta_min and beta_max, or neither")
        if self.beta_min is None:
            s = BETA_REF_T / self.T
            return BETA_REF_MIN * s, min(BETA_REF_MAX * s, 0.999)
        return self.beta_min, self.beta_max


@dataclass
class NoiseSchedule:
    """beta/alpha/alpha-bar sequences over T steps."""

    betas: np.ndarray
    alphas: np.ndarray = field(init=False)
    alpha_bars: np.ndarray = field(init=False)

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=np.float64)
        if self.betas.ndim != 1 or self.betas.size < 1:
            raise ValueError("betas must be a non-empty 1-D sequence")
        if self.betas[0] <= 0.0 or self.betas[-1] >= 1.0:
            raise ValueError(f"betas must lie in (0, 1), got [{self.betas[0]}, {self.betas[-1]}]")
        if np.any(np.diff(self.betas) < 0):
            raise ValueError("betas must be nondecreasing")
        self.alphas = 1.0 - self.betas
        self.alpha_bars = np.cumprod(self.alphas)

    @property
    def T(self) -> int:
        return int(self.betas.size)

    def alpha(self, t: int) -> float:
        self._check_t(t)
        return float(self.alphas[t - 1])

    def alpha_bar(self, t: int) -> float:
        self._check_t(t)
        return float(self.alpha_bars[t - 1])

    def _check_t(self, t: int):
        if not 1 <= t <= self.T:
            raise ValueError(f"timestep {t} out of range 1..{self.T}")


def build_schedule(cfg: DiffusionConfig) -> NoiseSchedule:
    if cfg.T < 1:
        raise ValueError("T must be >= 1")
    if cfg.schedule == "linear":
        lo, hi = cfg.resolved_betas()
        if lo <= 0.0 or hi >= 1.0 or hi < lo:
            raise ValueError(f"invalid beta range [{lo}, {hi}]")
        betas = np.linspace(lo, hi, cfg.T) if cfg.T > 1 else np.array([lo])
    elif cfg.schedule == "cosine":
        s = 8e-3
        ts = np.arange(cfg.T + 1) / cfg.T
        abar = np.cos((ts + s) / (1 + s) * math.pi / 2) ** 2
        abar /= abar[0]
        betas = np.clip(1.0 - abar[1:] / abar[:-1], 1e-8, 0.999)
    else:
        raise ValueError(f"unknown schedule {cfg.schedule!r}")
    return NoiseSchedule(betas)


def _gather(values: np.ndarray, t, like: torch.Tensor) -> torch.Tensor:
    """Per-sample coefficient lookup, broadcast to the latent shape."""
    if torch.is_tensor(t):
        idx = t.long() - 1
        if (idx < 0).any() or (idx >= values.size).any():
            raise ValueError("timestep out of range")
        coef = torch.from_numpy(values).to(like.dtype)[idx]
        return coef.reshape(-1, *([1] * (like.ndim - 1)))
    if not 1 <= int(t) <= values.size:
        raise ValueError(f"timestep {t} out of range 1..{values.size}")
    return torch.tensor(float(values[int(t) - 1]), dtype=like.dtype)


def q_sample(z0: torch.Tensor, t, eps: torch.Tensor, sched: NoiseSchedule) -> torch.Tensor:
    """Forward corruption: z_t = sqrt(abar_t) z0 + sqrt(1-abar_t) eps."""
    if eps.shape != z0.shape:
        raise ValueError("noise shape must match z0")
    abar = _gather(sched.alpha_bars, t, z0)
    return torch.sqrt(abar) * z0 + torch.sqrt(1.0 - abar) * eps


def reverse_step(
    model: nn.Module,
    z_t: torch.Tensor,
    t: int,
    z_lr: torch.Tensor,
    sched: NoiseSchedule,
    eps_draw: torch.Tensor | None = None,
) -> torch.Tensor:
    """One ancestral update from t to t-1; the t == 1 step never adds noise."""
    sched._check_t(t)
    a_t = sched.alpha(t)
    abar_t = sched.alpha_bar(t)
    eps_pred = model(z_t, t, z_lr)
    mean = (z_t - (1.0 - a_t) / math.sqrt(1.0 - abar_t) * eps_pred) / math.sqrt(a_t)
    if t == 1 or eps_draw is None:
        return mean
    return mean + math.sqrt(1.0 - a_t) * eps_draw


@torch.no_grad()
def reverse_sample(
    model: nn.Module,
    z_lr: torch.Tensor,
    sched: NoiseSchedule,
    seed: int | None = None,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Full reverse chain from a standard-normal latent; exactly T model calls."""
    if generator is None:
        generator = torch.Generator()
        if seed is not None:
            generator.manual_seed(seed)
    z = torch.randn(z_lr.shape, generator=generator, dtype=z_lr.dtype)
    for t in range(sched.T, 0, -1):
        eps = (
            torch.randn(z_lr.shape, generator=generator, dtype=z_lr.dtype)
            if t > 1
            else None
        )
        z = reverse_step(model, z, t, z_lr, sched, eps)
    return z


def train_step(
    model: nn.Module,
    batch: tuple[torch.Tensor, torch.Tensor],
    sched: NoiseSchedule,
    optimizer: torch.optim.Optimizer,
    generator: torch.Generator,
) -> float:
    """One epsilon-prediction step on a (z_lr, z_hr) batch; returns the L1 noise loss."""
    z_lr, z_hr = batch
    if z_lr.shape != z_hr.shape:
        raise ValueError("z_lr and z_hr must share the latent shape")
    n = z_hr.shape[0]
    t = torch.randint(1, sched.T + 1, (n,), generator=generator)
    eps = torch.randn(z_hr.shape, generator=generator, dtype=z_hr.dtype)
    z_t = q_sample(z_hr, t, eps, sched)
    pred = model(z_t, t, z_lr)
    loss = (eps - pred).abs().mean()
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return float(loss.detach())


@dataclass
class DiffusionTrainResult:
    model: nn.Module
    curve: list[float]
    optimizer_state: dict
    generator_state: torch.Tensor
    steps_done: int


def train_diffusion(
    pairs: tuple[torch.Tensor, torch.Tensor],
    model: nn.Module,
    sched: NoiseSchedule,
    steps: int,
    lr: float = 1e-5,
    betas: tuple[float, float] = (0.9, 0.999),
    batch_size: int = 4,
    seed: int = 0,
    resume: DiffusionTrainResult | None = None,
) -> DiffusionTrainResult:
    """Minibatch loop over stacked latent pairs (z_lr [N,...], z_hr [N,...])."""
    z_lr_all, z_hr_all = pairs
    n = z_lr_all.shape[0]
    optimizer = torch.optim.Adam(model.parameters(), lr=lr, betas=betas)
    generator = torch.Generator().manual_seed(seed)
    curve: list[float] = []
    start = 0
    if resume is not None:
        optimizer.load_state_dict(resume.optimizer_state)
        generator.set_state(resume.generator_state)
        curve = list(resume.curve)
        start = resume.steps_done
    model.train()
    for step in range(start, start + steps):
        idx = torch.randint(0, n, (min(batch_size, n),), generator=generator)
        loss = train_step(model, (z_lr_all[idx], z_hr_all[idx]), sched, optimizer, generator)
        if not math.isfinite(loss):
            raise NumericalAbort(step)
        curve.append(loss)
    model.eval()
    return DiffusionTrainResult(model, curve, optimizer.state_dict(), generator.get_state(), start + steps)

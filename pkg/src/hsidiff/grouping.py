"""Overlapping spectral band groups: planning, slicing, and mean-overlap merge."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import HSICube


@dataclass(frozen=True)
class GroupingConfig:
    """Bands per group and overlap between consecutive groups (defaults 16/4)."""

    n_subs: int = 16
    n_ovls: int = 4

    def __post_init__(self):
        if not 1 <= self.n_ovls < self.n_subs:
            raise ValueError(
                f"need 1 <= n_ovls < n_subs, got n_subs={self.n_subs}, n_ovls={self.n_ovls}"
            )


@dataclass
class BandGroup:
    start: int
    end: int
    data: np.ndarray  # (H, W, n_subs)


@dataclass
class GroupList:
    """Ordered band groups sliced from one cube."""

    groups: list[BandGroup]
    source_bands: int

    def __len__(self) -> int:
        return len(self.groups)

    @property
    def plan(self) -> list[tuple[int, int]]:
        return [(g.start, g.end) for g in self.groups]


def plan_groups(c: int, cfg: GroupingConfig) -> list[tuple[int, int]]:
    """Group start/end band ranges covering all c bands.

    Starts step by n_subs - n_ovls; if the regular grid stops short of the
    last band, one final group is shifted left so its end lands exactly on c.
    Group count is ceil((c - n_subs) / (n_subs - n_ovls)) + 1.
    """
    if cfg.n_subs > c:
        raise ValueError(f"n_subs={cfg.n_subs} exceeds band count {c}")
    stride = cfg.n_subs - cfg.n_ovls
    starts = list(range(0, c - cfg.n_subs + 1, stride))
    if starts[-1] + cfg.n_subs < c:
        starts.append(c - cfg.n_subs)
    return [(s, s + cfg.n_subs) for s in starts]


def group_count(c: int, cfg: GroupingConfig) -> int:
    stride = cfg.n_subs - cfg.n_ovls
    return int(np.ceil((c - cfg.n_subs) / stride)) + 1


def group(cube: HSICube, cfg: GroupingConfig) -> GroupList:
    """Slice a cube into overlapping band groups (each slice is a copy)."""
    plan = plan_groups(cube.band_count, cfg)
    groups = [BandGroup(s, e, cube.data[:, :, s:e].copy()) for s, e in plan]
    return GroupList(groups, cube.band_count)


def merge(groups: GroupList) -> HSICube:
    """Fuse band groups back into a cube, averaging overlapped bands.

    Accumulates in float64 so bands covered by k identical slices come back
    bit-exact after the divide.
    """
    if not groups.groups:
        raise ValueError("empty group list")
    h, w, _ = groups.groups[0].data.shape
    c = groups.source_bands
    acc = np.zeros((h, w, c), dtype=np.float64)
    cover = np.zeros(c, dtype=np.int64)
    for g in groups.groups:
        if g.data.shape[:2] != (h, w):
            raise ValueError("group spatial shapes differ")
        if g.end - g.start != g.data.shape[2]:
            raise ValueError(f"group ({g.start},{g.end}) does not match its data")
        acc[:, :, g.start : g.end] += g.data.astype(np.float64)
        cover[g.start : g.end] += 1
    if (cover == 0).any():
        missing = int(np.argmin(cover > 0))
        raise ValueError(f"coverage gap: band {missing} is not covered by any group")
    merged = (acc / cover[None, None, :]).astype(np.float32)
    return HSICube(merged, {"merged_from": len(groups.groups)})

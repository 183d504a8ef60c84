"""Checkpoint container shared by both training stages.

A checkpoint is a torch-serialized dict: named tensor state plus a manifest
(kind, config hash, step count, and whatever geometry the consumer needs to
refuse mismatched configs).
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any

import torch

from .errors import ConfigError


def save_checkpoint(
    path: str | Path,
    kind: str,
    state: dict,
    manifest: dict[str, Any],
    extras: dict[str, Any] | None = None,
):
    payload = {"kind": kind, "state": state, "manifest": dict(manifest)}
    if extras:
        payload["extras"] = extras
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path: str | Path, expect_kind: str | None = None) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such checkpoint: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if expect_kind is not None and payload.get("kind") != expect_kind:
        raise ConfigError(
            f"{path}: checkpoint kind {payload.get('kind')!r}, expected {expect_kind!r}"
        )
    return payload


def state_dict_digest(state: dict) -> str:
    """Stable digest of a module state dict, for frozen-weights assertions."""
    h = hashlib.sha256()
    for key in sorted(state):
        h.update(key.encode())
        h.update(state[key].detach().cpu().numpy().tobytes())
    return h.hexdigest()[:16]

"""Pipeline configuration: JSON file, dotted-path overrides, hashing.

Config files are JSON with one object per section. ``--set a.b.c=value``
overrides parse the value as JSON when possible and as a raw string
otherwise. The output directory resolves under $HSIDIFF_OUT_ROOT when that
variable is set and the configured path is relative.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .diffusion import DiffusionConfig
from .errors import ConfigError
from .gae import GAEConfig, OptimizerParams
from .grouping import GroupingConfig
from .losses import LossConfig

OUTPUT_ROOT_ENV = "HSIDIFF_OUT_ROOT"


@dataclass
class DataConfig:
    source: str = "synthetic"  # synthetic | files
    height: int = 64
    width: int = 64
    bands: int = 16
    count: int = 1
    paths: list[str] = field(default_factory=list)
    format: str = "native"
    test_fraction: float = 0.0


@dataclass
class PatchConfig:
    size: int = 32
    stride: int = 16
    augment: bool = False


@dataclass
class StageParams:
    steps: int = 2000
    lr: float = 1e-4
    batch_size: int = 4
    beta1: float = 0.9
    beta2: float = 0.999

    def optimizer_params(self) -> OptimizerParams:
        return OptimizerParams(self.lr, self.beta1, self.beta2, self.batch_size)


@dataclass
class TrainConfig:
    stage1: StageParams = field(default_factory=lambda: StageParams(steps=2000, lr=1e-4))
    stage2: StageParams = field(default_factory=lambda: StageParams(steps=2000, lr=1e-5))


@dataclass
class SeedsConfig:
    data: int = 0
    split: int = 0
    init: int = 0
    diffusion: int = 0


@dataclass
class PipelineConfig:
    data: DataConfig = field(default_factory=DataConfig)
    scale: int = 2
    grouping: GroupingConfig = field(default_factory=GroupingConfig)
    gae: GAEConfig = field(default_factory=GAEConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    patch: PatchConfig = field(default_factory=PatchConfig)
    seeds: SeedsConfig = field(default_factory=SeedsConfig)
    output_dir: str = "runs/default"

    def resolved_output_dir(self) -> Path:
        out = Path(self.output_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not out.is_absolute():
            out = Path(root) / out
        return out


_SECTION_TYPES = {
    "data": DataConfig,
    "grouping": GroupingConfig,
    "gae": GAEConfig,
    "loss": LossConfig,
    "diffusion": DiffusionConfig,
    "patch": PatchConfig,
    "seeds": SeedsConfig,
}


def _build_section(cls, payload: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - names
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    kwargs = dict(payload)
    defaults = cls()
    for f in dataclasses.fields(cls):
        # JSON has no tuples; width lists etc. are declared as tuples
        if f.name in kwargs and isinstance(kwargs[f.name], list):
            if isinstance(getattr(defaults, f.name), tuple):
                kwargs[f.name] = tuple(kwargs[f.name])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid {where}: {e}") from e


def config_from_dict(payload: dict) -> PipelineConfig:
    payload = dict(payload)
    kwargs: dict[str, Any] = {}
    for key, cls in _SECTION_TYPES.items():
        if key in payload:
            section = payload.pop(key)
            if not isinstance(section, dict):
                raise ConfigError(f"section {key!r} must be an object")
            kwargs[key] = _build_section(cls, section, key)
    if "train" in payload:
        section = payload.pop("train")
        stages = {}
        for name in ("stage1", "stage2"):
            if name in section:
                stages[name] = _build_section(StageParams, section[name], f"train.{name}")
        extra = set(section) - {"stage1", "stage2"}
        if extra:
            raise ConfigError(f"unknown key(s) in train: {sorted(extra)}")
        kwargs["train"] = TrainConfig(**stages)
    for key in ("scale", "output_dir"):
        if key in payload:
            kwargs[key] = payload.pop(key)
    if payload:
        raise ConfigError(f"unknown top-level key(s): {sorted(payload)}")
    cfg = PipelineConfig(**kwargs)
    if cfg.scale not in (2, 3, 4):
        raise ConfigError(f"scale must be 2, 3 or 4, got {cfg.scale}")
    return cfg


def config_to_dict(cfg: PipelineConfig) -> dict:
    return json.loads(json.dumps(dataclasses.asdict(cfg)))


def load_config(path: str | Path, overrides: list[str] | None = None) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from e
    if overrides:
        payload = apply_overrides(payload, overrides)
    return config_from_dict(payload)


def apply_overrides(payload: dict, overrides: list[str]) -> dict:
    payload = json.loads(json.dumps(payload))  # deep copy
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = payload
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {dotted!r} descends into a non-object")
        node[parts[-1]] = value
    return payload


def default_config() -> PipelineConfig:
    return PipelineConfig()


def config_hash(cfg: PipelineConfig) -> str:
    canon = json.dumps(config_to_dict(cfg), sort_keys=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def write_config(cfg: PipelineConfig, path: str | Path):
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n")

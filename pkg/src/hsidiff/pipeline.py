"""Orchestration: dataset preparation, the two training stages, Algorithm-1
style inference, evaluation artifacts, ablation variants, and the timing
harness. Every command is deterministic given (config, seeds) and records a
JSON manifest traceable to the config hash.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .checkpoint import load_checkpoint, save_checkpoint, state_dict_digest
from .config import PipelineConfig, config_hash
from .cube import (
    HSICube,
    PatchSpec,
    extract_patches,
    load_cube,
    normalize,
    save_cube,
    save_false_color_png,
    synth_cube,
)
from .denoiser import Denoiser
from .diffusion import build_schedule, reverse_sample, train_diffusion
from .errors import ConfigError
from .gae import (
    GAEConfig,
    GroupAutoencoder,
    LatentList,
    decode,
    encode,
    train_gae,
)
from .grouping import GroupingConfig, plan_groups
from .losses import PerceptualExtractor
from . import metrics
from .metrics import MetricsReport, compute_report, error_map, spectral_curve
from .resample import degrade, upsample_bicubic

VARIANTS = ("full", "no-GD", "no-GS", "diff-PB", "diff-FB")


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seeds: dict
    wall_seconds: float = 0.0
    denoiser_calls: int = 0
    checkpoints: dict = field(default_factory=dict)
    reports: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def write(self, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(self), indent=2, default=str) + "\n")


def _manifest(cfg: PipelineConfig, command: str) -> RunManifest:
    return RunManifest(command=command, config_hash=config_hash(cfg), seeds=asdict(cfg.seeds))


def _dataset_dir(cfg: PipelineConfig) -> Path:
    return cfg.resolved_output_dir() / "dataset"


def _ckpt_dir(cfg: PipelineConfig) -> Path:
    return cfg.resolved_output_dir() / "checkpoints"


def _reports_dir(cfg: PipelineConfig) -> Path:
    return cfg.resolved_output_dir() / "reports"


def _crop_to_multiple(cube: HSICube, scale: int) -> HSICube:
    h, w = cube.spatial
    nh, nw = h - h % scale, w - w % scale
    if (nh, nw) == (h, w):
        return cube
    return cube.with_data(cube.data[:nh, :nw].copy(), cropped_from=(h, w))


def _source_cubes(cfg: PipelineConfig) -> list[HSICube]:
    if cfg.data.source == "synthetic":
        return [
            synth_cube(cfg.data.height, cfg.data.width, cfg.data.bands, seed=cfg.seeds.data + i)
            for i in range(cfg.data.count)
        ]
    if cfg.data.source == "files":
        if not cfg.data.paths:
            raise ConfigError("data.source is 'files' but data.paths is empty")
        return [load_cube(p, format=cfg.data.format) for p in cfg.data.paths]
    raise ConfigError(f"unknown data.source {cfg.data.source!r}")


def cmd_prepare(cfg: PipelineConfig) -> Path:
    """Ingest or synthesize cubes, normalize, degrade, split, extract patches."""
    t0 = time.time()
    out = _dataset_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    cubes = [normalize(_crop_to_multiple(c, cfg.scale)) for c in _source_cubes(cfg)]

    order = list(np.random.default_rng(cfg.seeds.split).permutation(len(cubes)))
    n_test = int(round(cfg.data.test_fraction * len(cubes)))
    test_idx = sorted(int(i) for i in order[:n_test])
    train_idx = sorted(int(i) for i in order[n_test:])
    overfit = not test_idx
    if overfit:
        test_idx = list(train_idx)  # overfit regime: evaluate on the training cubes

    pairs = [degrade(c, cfg.scale) for c in cubes]
    for i, pair in enumerate(pairs):
        save_cube(pair.hr, out / f"hr_{i:03d}.hsic")
        save_cube(pair.lr, out / f"lr_{i:03d}.hsic")

    spec = PatchSpec(cfg.patch.size, cfg.patch.stride, cfg.patch.augment)
    hr_patches, lr_patches = [], []
    for i in train_idx:
        for p in extract_patches(pairs[i], spec):
            hr_patches.append(p.hr.data)
            lr_patches.append(p.lr.data)
    np.savez(
        out / "patches.npz",
        hr=np.stack(hr_patches),
        lr=np.stack(lr_patches),
    )

    info = {
        "config_hash": config_hash(cfg),
        "train_indices": train_idx,
        "test_indices": test_idx,
        "overfit_regime": overfit,
        "patch_count": len(hr_patches),
        "scale": cfg.scale,
        "bands": cubes[0].band_count,
    }
    (out / "dataset.json").write_text(json.dumps(info, indent=2) + "\n")

    man = _manifest(cfg, "prepare")
    man.wall_seconds = time.time() - t0
    man.extra = info
    man.write(cfg.resolved_output_dir() / "manifest_prepare.json")
    return out


def _load_dataset(cfg: PipelineConfig):
    out = _dataset_dir(cfg)
    meta_path = out / "dataset.json"
    if not meta_path.exists():
        raise ConfigError(f"dataset not prepared: {meta_path} missing (run prepare)")
    info = json.loads(meta_path.read_text())
    with np.load(out / "patches.npz") as z:
        hr = z["hr"]
        lr = z["lr"]
    return info, hr, lr


def _gae_manifest(
    cfg: PipelineConfig, bands: int, steps: int, grouping: GroupingConfig, gae_cfg: GAEConfig
) -> dict:
    return {
        "config_hash": config_hash(cfg),
        "steps": steps,
        "bands": bands,
        "n_subs": grouping.n_subs,
        "n_ovls": grouping.n_ovls,
        "latent_channels": gae_cfg.latent_channels,
        "latent_downscale": gae_cfg.latent_downscale,
        "gae": asdict(gae_cfg),
    }


def cmd_train_stage1(
    cfg: PipelineConfig,
    resume_from: str | Path | None = None,
    grouping: GroupingConfig | None = None,
    gae_cfg: GAEConfig | None = None,
    ckpt_name: str = "gae.pt",
) -> Path:
    """Train the group autoencoder on HR patches; returns the checkpoint path."""
    t0 = time.time()
    info, hr, _ = _load_dataset(cfg)
    grouping = grouping or cfg.grouping
    gae_cfg = gae_cfg or cfg.gae
    bands = hr.shape[3]
    params = cfg.train.stage1

    resume = None
    if resume_from is not None:
        payload = load_checkpoint(resume_from, expect_kind="gae")
        man0 = payload["manifest"]
        grouping = GroupingConfig(man0["n_subs"], man0["n_ovls"])
        gae_cfg = GAEConfig(**man0["gae"])
        model = GroupAutoencoder(gae_cfg, grouping, man0["bands"])
        model.load_state_dict(payload["state"])
        from .gae import GAETrainResult

        resume = GAETrainResult(
            model=model,
            curve=man0.get("curve", []),
            optimizer_state=payload["extras"]["optimizer_state"],
            generator_state=payload["extras"]["generator_state"],
            steps_done=man0["steps"],
        )

    extractor = PerceptualExtractor() if cfg.loss.lambda3 > 0 else None
    result = train_gae(
        [HSICube(p) for p in hr],
        grouping,
        gae_cfg,
        cfg.loss,
        steps=params.steps,
        opt=params.optimizer_params(),
        seed=cfg.seeds.init,
        extractor=extractor,
        resume=resume,
    )

    ckpt = _ckpt_dir(cfg) / ckpt_name
    manifest = _gae_manifest(cfg, bands, result.steps_done, grouping, gae_cfg)
    manifest["curve"] = result.curve
    extras = {
        "optimizer_state": result.optimizer_state,
        "generator_state": result.generator_state,
    }
    save_checkpoint(ckpt, "gae", result.model.state_dict(), manifest, extras=extras)

    curve_path = _reports_dir(cfg) / f"stage1_loss_{ckpt_name.removesuffix('.pt')}.csv"
    _write_curve(curve_path, result.curve)

    # reconstruction quality on the test cubes; a barely-trained model can
    # saturate a band after clipping, which the CC metric rejects
    recon_reports = []
    ds = _dataset_dir(cfg)
    for i in info["test_indices"]:
        hr_cube = load_cube(ds / f"hr_{i:03d}.hsic")
        recon = decode(encode(hr_cube, grouping, result.model), result.model)
        try:
            rep = compute_report(hr_cube.data, np.clip(recon.data, 0.0, 1.0), cfg.scale)
            recon_reports.append({"cube": i, **rep.to_dict()})
        except ValueError as e:
            recon_reports.append({"cube": i, "error": str(e)})

    man = _manifest(cfg, "train-stage1")
    man.wall_seconds = time.time() - t0
    man.checkpoints["gae"] = str(ckpt)
    man.reports = recon_reports
    man.extra = {"final_loss": result.curve[-1], "steps": result.steps_done}
    tag = ckpt_name.removesuffix(".pt")
    suffix = "" if tag == "gae" else f"_{tag.removeprefix('gae_')}"
    man.write(cfg.resolved_output_dir() / f"manifest_stage1{suffix}.json")
    return ckpt


def _write_curve(path: Path, curve: Sequence[float]):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "loss"])
        for i, v in enumerate(curve):
            writer.writerow([i, f"{v:.8f}"])


def load_gae(ckpt_path: str | Path) -> tuple[GroupAutoencoder, dict]:
    payload = load_checkpoint(ckpt_path, expect_kind="gae")
    man = payload["manifest"]
    grouping = GroupingConfig(man["n_subs"], man["n_ovls"])
    gae_cfg = GAEConfig(**man["gae"])
    model = GroupAutoencoder(gae_cfg, grouping, man["bands"])
    model.load_state_dict(payload["state"])
    model.eval()
    return model, man


def _latent_pairs(
    cfg: PipelineConfig, model: GroupAutoencoder, grouping: GroupingConfig, hr: np.ndarray, lr: np.ndarray
) -> tuple[torch.Tensor, torch.Tensor]:
    """Group-index-wise latent training pairs from co-registered patch arrays."""
    zs_lr, zs_hr = [], []
    for hr_patch, lr_patch in zip(hr, lr):
        lr_up = upsample_bicubic(HSICube(lr_patch), cfg.scale)
        z_lr = encode(lr_up, grouping, model)
        z_hr = encode(HSICube(hr_patch), grouping, model)
        zs_lr.extend(z_lr.latents)
        zs_hr.extend(z_hr.latents)
    return torch.stack(zs_lr), torch.stack(zs_hr)


def cmd_train_stage2(
    cfg: PipelineConfig,
    gae_ckpt: str | Path,
    ckpt_name: str = "diffusion.pt",
) -> Path:
    """Train the latent diffusion model against frozen GAE latents."""
    t0 = time.time()
    _, hr, lr = _load_dataset(cfg)
    model, gae_man = load_gae(gae_ckpt)
    grouping = GroupingConfig(gae_man["n_subs"], gae_man["n_ovls"])
    digest_before = state_dict_digest(model.state_dict())

    z_lr, z_hr = _latent_pairs(cfg, model, grouping, hr, lr)
    n_groups = len(plan_groups(hr.shape[3], grouping))
    assert z_lr.shape[0] == hr.shape[0] * n_groups

    sched = build_schedule(cfg.diffusion)
    params = cfg.train.stage2
    torch.manual_seed(cfg.seeds.init)
    denoiser = Denoiser(
        z_channels=cfg.gae.latent_channels,
        cond_channels=cfg.gae.latent_channels,
        widths=cfg.diffusion.widths,
        time_dim=cfg.diffusion.time_dim,
    )
    result = train_diffusion(
        (z_lr, z_hr),
        denoiser,
        sched,
        steps=params.steps,
        lr=params.lr,
        betas=(params.beta1, params.beta2),
        batch_size=params.batch_size,
        seed=cfg.seeds.diffusion,
    )

    digest_after = state_dict_digest(model.state_dict())
    if digest_before != digest_after:
        raise RuntimeError("GAE weights changed during stage 2")

    ckpt = _ckpt_dir(cfg) / ckpt_name
    manifest = {
        "config_hash": config_hash(cfg),
        "steps": result.steps_done,
        "T": cfg.diffusion.T,
        "widths": list(cfg.diffusion.widths),
        "time_dim": cfg.diffusion.time_dim,
        "z_channels": cfg.gae.latent_channels,
        "latent_shape": list(z_hr.shape[1:]),
        "pair_count": int(z_hr.shape[0]),
        "gae_digest": digest_before,
        "schedule": cfg.diffusion.schedule,
        "betas": list(build_schedule(cfg.diffusion).betas),
    }
    save_checkpoint(ckpt, "diffusion", result.model.state_dict(), manifest)
    _write_curve(_reports_dir(cfg) / f"stage2_loss_{ckpt_name.removesuffix('.pt')}.csv", result.curve)

    man = _manifest(cfg, "train-stage2")
    man.wall_seconds = time.time() - t0
    man.checkpoints = {"gae": str(gae_ckpt), "diffusion": str(ckpt)}
    man.extra = {
        "final_loss": result.curve[-1],
        "pair_count": int(z_hr.shape[0]),
        "gae_digest_unchanged": True,
    }
    man.write(cfg.resolved_output_dir() / "manifest_stage2.json")
    return ckpt


def load_denoiser(ckpt_path: str | Path) -> tuple[Denoiser, dict]:
    payload = load_checkpoint(ckpt_path, expect_kind="diffusion")
    man = payload["manifest"]
    model = Denoiser(
        z_channels=man["z_channels"],
        cond_channels=man["z_channels"],
        widths=tuple(man["widths"]),
        time_dim=man["time_dim"],
    )
    model.load_state_dict(payload["state"])
    model.eval()
    return model, man


def super_resolve(
    cfg: PipelineConfig,
    gae: GroupAutoencoder,
    grouping: GroupingConfig,
    denoiser: Denoiser,
    lr_cube: HSICube,
    seed: int,
    trace: list[str] | None = None,
) -> HSICube:
    """Encode upsampled LR, reverse-sample each latent, decode the list."""
    sched = build_schedule(cfg.diffusion)
    lr_up = upsample_bicubic(lr_cube, cfg.scale)
    z_lr = encode(lr_up, grouping, gae)
    if trace is not None:
        trace.append("encode")
    sr_latents = []
    for i, z in enumerate(z_lr.latents):
        out = reverse_sample(denoiser, z[None], sched, seed=seed + i)
        sr_latents.append(out[0])
        if trace is not None:
            trace.append(f"sample:{i}")
    sr = decode(LatentList(sr_latents, z_lr.group_plan, z_lr.source_bands), gae)
    if trace is not None:
        trace.append("decode")
    return sr


def cmd_infer(
    cfg: PipelineConfig,
    gae_ckpt: str | Path,
    diff_ckpt: str | Path,
    lr_cube_path: str | Path,
    out_path: str | Path | None = None,
    seed: int | None = None,
) -> Path:
    """Full testing process on one LR cube; writes the SR cube and a manifest."""
    t0 = time.time()
    gae, gae_man = load_gae(gae_ckpt)
    denoiser, diff_man = load_denoiser(diff_ckpt)

    if (gae_man["n_subs"], gae_man["n_ovls"]) != (cfg.grouping.n_subs, cfg.grouping.n_ovls):
        raise ConfigError(
            "checkpoint/config mismatch: grouping "
            f"{(gae_man['n_subs'], gae_man['n_ovls'])} vs config "
            f"{(cfg.grouping.n_subs, cfg.grouping.n_ovls)}"
        )
    if diff_man["z_channels"] != gae_man["latent_channels"]:
        raise ConfigError(
            "checkpoint/config mismatch: diffusion latent channels "
            f"{diff_man['z_channels']} vs GAE {gae_man['latent_channels']}"
        )

    lr_cube = load_cube(lr_cube_path)
    grouping = GroupingConfig(gae_man["n_subs"], gae_man["n_ovls"])
    seed = cfg.seeds.diffusion if seed is None else seed
    trace: list[str] = []
    denoiser.reset_call_count()
    sr = super_resolve(cfg, gae, grouping, denoiser, lr_cube, seed, trace)

    n_groups = len(plan_groups(lr_cube.band_count, grouping))
    out_path = Path(out_path) if out_path else cfg.resolved_output_dir() / "sr.hsic"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    sr.meta.update({"sr_seed": seed, "config_hash": config_hash(cfg)})
    save_cube(sr, out_path)

    man = _manifest(cfg, "infer")
    man.wall_seconds = time.time() - t0
    man.denoiser_calls = denoiser.call_count
    man.checkpoints = {"gae": str(gae_ckpt), "diffusion": str(diff_ckpt)}
    man.extra = {
        "T": cfg.diffusion.T,
        "groups": n_groups,
        "calls_expected": cfg.diffusion.T * n_groups,
        "seed": seed,
        "trace": trace,
        "output": str(out_path),
    }
    man.write(cfg.resolved_output_dir() / "manifest_infer.json")
    return out_path


def default_band_triplet(bands: int) -> tuple[int, int, int]:
    """False-color band picks at the same relative positions used in the figures."""
    pos = (0.98, 0.29, 0.10)
    return tuple(min(bands - 1, int(round(p * (bands - 1)))) for p in pos)


def cmd_evaluate(
    cfg: PipelineConfig,
    ref_path: str | Path,
    cand_path: str | Path,
    lr_path: str | Path | None = None,
    label: str = "candidate",
) -> dict:
    """Six-index report plus rendered artifacts; bicubic baseline emitted alongside."""
    t0 = time.time()
    ref = load_cube(ref_path)
    cand = load_cube(cand_path)
    if lr_path is not None:
        lr = load_cube(lr_path)
    else:
        lr = degrade(ref, cfg.scale).lr
    bicubic = upsample_bicubic(lr, cfg.scale)

    rep_cand = compute_report(ref.data, np.clip(cand.data, 0.0, 1.0), cfg.scale)
    rep_bi = compute_report(ref.data, np.clip(bicubic.data, 0.0, 1.0), cfg.scale)

    rdir = _reports_dir(cfg)
    rdir.mkdir(parents=True, exist_ok=True)
    rows = [{"label": label, **rep_cand.to_dict()}, {"label": "bicubic", **rep_bi.to_dict()}]
    _write_report_csv(rdir / "evaluation.csv", rows)
    (rdir / "evaluation.txt").write_text(
        "\n".join(rep_cand.format_lines(label) + rep_bi.format_lines("bicubic")) + "\n"
    )

    bands = default_band_triplet(ref.band_count)
    save_false_color_png(ref, bands, rdir / "ref_falsecolor.png")
    save_false_color_png(cand, bands, rdir / "cand_falsecolor.png")
    _, rgb = error_map(ref.data, np.clip(cand.data, 0.0, 1.0), bands)
    from PIL import Image

    Image.fromarray(rgb, mode="RGB").save(rdir / "cand_errormap.png")

    h, w = ref.spatial
    x, y = w // 2, h // 2
    curves = np.column_stack(
        [
            spectral_curve(ref, x, y),
            spectral_curve(cand, x, y),
            spectral_curve(bicubic, x, y),
        ]
    )
    header = "band ref candidate bicubic"
    np.savetxt(rdir / "spectral_curve.txt", np.column_stack([np.arange(ref.band_count), curves]),
               header=header, fmt="%.6f")

    man = _manifest(cfg, "evaluate")
    man.wall_seconds = time.time() - t0
    man.reports = rows
    man.write(cfg.resolved_output_dir() / "manifest_evaluate.json")
    return {"candidate": rep_cand, "bicubic": rep_bi}


def _write_report_csv(path: Path, rows: list[dict]):
    path.parent.mkdir(parents=True, exist_ok=True)
    fieldnames = list(rows[0].keys())
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


# --------------------------------------------------------------- ablation

def _pixel_diffusion_pairs(cfg, hr, lr, per_band: bool):
    """Pixel-space training pairs for the GAE-free variants."""
    z_hr_list, z_lr_list = [], []
    for hr_patch, lr_patch in zip(hr, lr):
        lr_up = upsample_bicubic(HSICube(lr_patch), cfg.scale).data
        hr_chw = torch.from_numpy(np.ascontiguousarray(hr_patch.transpose(2, 0, 1)))
        lr_chw = torch.from_numpy(np.ascontiguousarray(lr_up.transpose(2, 0, 1)))
        if per_band:
            for b in range(hr_chw.shape[0]):
                z_hr_list.append(hr_chw[b : b + 1])
                z_lr_list.append(lr_chw[b : b + 1])
        else:
            z_hr_list.append(hr_chw)
            z_lr_list.append(lr_chw)
    return torch.stack(z_lr_list), torch.stack(z_hr_list)


def _train_pixel_diffusion(cfg: PipelineConfig, hr, lr, per_band: bool) -> Denoiser:
    z_lr, z_hr = _pixel_diffusion_pairs(cfg, hr, lr, per_band)
    sched = build_schedule(cfg.diffusion)
    torch.manual_seed(cfg.seeds.init)
    model = Denoiser(
        z_channels=z_hr.shape[1],
        cond_channels=z_hr.shape[1],
        widths=cfg.diffusion.widths,
        time_dim=cfg.diffusion.time_dim,
    )
    params = cfg.train.stage2
    train_diffusion(
        (z_lr, z_hr),
        model,
        sched,
        steps=params.steps,
        lr=params.lr,
        betas=(params.beta1, params.beta2),
        batch_size=params.batch_size,
        seed=cfg.seeds.diffusion,
    )
    return model


def _pixel_super_resolve(
    cfg: PipelineConfig, model: Denoiser, lr_cube: HSICube, per_band: bool, seed: int
) -> HSICube:
    sched = build_schedule(cfg.diffusion)
    lr_up = upsample_bicubic(lr_cube, cfg.scale)
    cond = torch.from_numpy(np.ascontiguousarray(lr_up.data.transpose(2, 0, 1)))
    if per_band:
        bands_out = []
        for b in range(cond.shape[0]):
            out = reverse_sample(model, cond[b : b + 1][None], sched, seed=seed + b)
            bands_out.append(out[0, 0])
        data = torch.stack(bands_out, dim=-1).numpy()
    else:
        out = reverse_sample(model, cond[None], sched, seed=seed)
        data = out[0].numpy().transpose(1, 2, 0)
    return HSICube(data.astype(np.float32), {"variant": "diff-PB" if per_band else "diff-FB"})


def _variant_grouping(cfg: PipelineConfig, variant: str, bands: int) -> GroupingConfig:
    if variant == "no-GS":
        return GroupingConfig(bands, max(1, bands // 4))
    return cfg.grouping


def run_variant(cfg: PipelineConfig, variant: str) -> dict:
    """Train and evaluate one ablation variant under identical seeds/budgets."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r} (expected one of {VARIANTS})")
    info, hr, lr = _load_dataset(cfg)
    ds = _dataset_dir(cfg)
    test_sets = [
        (load_cube(ds / f"hr_{i:03d}.hsic"), load_cube(ds / f"lr_{i:03d}.hsic"))
        for i in info["test_indices"]
    ]
    bands = hr.shape[3]
    t0 = time.time()

    if variant in ("full", "no-GD", "no-GS"):
        grouping = _variant_grouping(cfg, variant, bands)
        gae_cfg = GAEConfig(**{**asdict(cfg.gae), "global_enabled": variant != "no-GD"})
        tag = variant.lower().replace("-", "_")
        gae_ckpt = cmd_train_stage1(
            cfg, grouping=grouping, gae_cfg=gae_cfg, ckpt_name=f"gae_{tag}.pt"
        )
        gae_model, _ = load_gae(gae_ckpt)
        z_lr, z_hr = _latent_pairs(cfg, gae_model, grouping, hr, lr)
        sched = build_schedule(cfg.diffusion)
        torch.manual_seed(cfg.seeds.init)
        denoiser = Denoiser(
            z_channels=cfg.gae.latent_channels,
            cond_channels=cfg.gae.latent_channels,
            widths=cfg.diffusion.widths,
            time_dim=cfg.diffusion.time_dim,
        )
        params = cfg.train.stage2
        train_diffusion(
            (z_lr, z_hr), denoiser, sched,
            steps=params.steps, lr=params.lr,
            betas=(params.beta1, params.beta2),
            batch_size=params.batch_size, seed=cfg.seeds.diffusion,
        )
        denoiser.reset_call_count()
        reports = []
        for hr_cube, lr_cube in test_sets:
            sr = super_resolve(cfg, gae_model, grouping, denoiser, lr_cube, cfg.seeds.diffusion)
            reports.append(_variant_report(hr_cube, sr, cfg.scale))
        calls = denoiser.call_count
        groups = len(plan_groups(bands, grouping))
    else:
        per_band = variant == "diff-PB"
        model = _train_pixel_diffusion(cfg, hr, lr, per_band)
        model.reset_call_count()
        reports = []
        for hr_cube, lr_cube in test_sets:
            sr = _pixel_super_resolve(cfg, model, lr_cube, per_band, cfg.seeds.diffusion)
            reports.append(_variant_report(hr_cube, sr, cfg.scale))
        calls = model.call_count
        groups = bands if per_band else 1

    mean_report = _mean_reports(reports, cfg.scale)
    return {
        "variant": variant,
        "calls": calls,
        "calls_per_image": calls // max(1, len(test_sets)),
        "groups": groups,
        "T": cfg.diffusion.T,
        "wall_seconds": time.time() - t0,
        **mean_report.to_dict(),
    }


def _variant_report(ref: HSICube, sr: HSICube, scale: int) -> MetricsReport:
    """Like compute_report, but Pearson CC on a clip-saturated band is undefined
    rather than fatal (possible for barely-trained variants at tiny budgets)."""
    cand = np.clip(sr.data, 0.0, 1.0)
    try:
        cc_val = metrics.cc(ref.data, cand)
    except ValueError:
        cc_val = float("nan")
    return MetricsReport(
        mpsnr=metrics.mpsnr(ref.data, cand),
        mssim=metrics.mssim(ref.data, cand),
        sam=metrics.sam_deg(ref.data, cand),
        cc=cc_val,
        rmse=metrics.rmse(ref.data, cand),
        ergas=metrics.ergas(ref.data, cand, scale),
        scale=scale,
    )


def _mean_reports(reports: list[MetricsReport], scale: int) -> MetricsReport:
    def mean(attr):
        vals = [getattr(r, attr) for r in reports]
        return float(np.nanmean(vals)) if not all(np.isnan(vals)) else float("nan")

    return MetricsReport(
        mpsnr=mean("mpsnr"), mssim=mean("mssim"), sam=mean("sam"),
        cc=mean("cc"), rmse=mean("rmse"), ergas=mean("ergas"), scale=scale,
    )


def cmd_ablate(cfg: PipelineConfig, variants: Sequence[str] = VARIANTS) -> list[dict]:
    """Run the ablation table variants under identical seeds and budgets."""
    t0 = time.time()
    rows = [run_variant(cfg, v) for v in variants]
    rdir = _reports_dir(cfg)
    _write_report_csv(rdir / "ablation.csv", rows)
    man = _manifest(cfg, "ablate")
    man.wall_seconds = time.time() - t0
    man.reports = rows
    man.write(cfg.resolved_output_dir() / "manifest_ablate.json")
    return rows


# --------------------------------------------------------------- timing

def cmd_benchmark_time(cfg: PipelineConfig, sizes: Sequence[int] = (64, 128, 256)) -> list[dict]:
    """Seconds/image and denoiser-call counts for ours vs the GAE-free variants.

    Uses freshly initialized weights: inference cost does not depend on the
    training state.
    """
    t0 = time.time()
    rows = []
    bands = cfg.data.bands
    grouping = cfg.grouping
    torch.manual_seed(cfg.seeds.init)
    gae_model = GroupAutoencoder(cfg.gae, grouping, bands)
    gae_model.eval()
    latent_denoiser = Denoiser(
        z_channels=cfg.gae.latent_channels, cond_channels=cfg.gae.latent_channels,
        widths=cfg.diffusion.widths, time_dim=cfg.diffusion.time_dim,
    )
    pb_denoiser = Denoiser(
        z_channels=1, cond_channels=1,
        widths=cfg.diffusion.widths, time_dim=cfg.diffusion.time_dim,
    )
    fb_denoiser = Denoiser(
        z_channels=bands, cond_channels=bands,
        widths=cfg.diffusion.widths, time_dim=cfg.diffusion.time_dim,
    )
    groups = len(plan_groups(bands, grouping))

    for size in sizes:
        hr = normalize(synth_cube(size, size, bands, seed=cfg.seeds.data))
        lr_cube = degrade(hr, cfg.scale).lr

        latent_denoiser.reset_call_count()
        t = time.time()
        super_resolve(cfg, gae_model, grouping, latent_denoiser, lr_cube, cfg.seeds.diffusion)
        rows.append(_timing_row("ours", size, time.time() - t, latent_denoiser.call_count))

        pb_denoiser.reset_call_count()
        t = time.time()
        _pixel_super_resolve(cfg, pb_denoiser, lr_cube, True, cfg.seeds.diffusion)
        rows.append(_timing_row("diff-PB", size, time.time() - t, pb_denoiser.call_count))

        fb_denoiser.reset_call_count()
        t = time.time()
        _pixel_super_resolve(cfg, fb_denoiser, lr_cube, False, cfg.seeds.diffusion)
        rows.append(_timing_row("diff-FB", size, time.time() - t, fb_denoiser.call_count))

    for row in rows:
        row["T"] = cfg.diffusion.T
        row["groups"] = groups
        row["bands"] = bands

    rdir = _reports_dir(cfg)
    _write_report_csv(rdir / "timing.csv", rows)
    man = _manifest(cfg, "benchmark-time")
    man.wall_seconds = time.time() - t0
    man.reports = rows
    man.write(cfg.resolved_output_dir() / "manifest_benchmark.json")
    return rows


def _timing_row(model: str, size: int, seconds: float, calls: int) -> dict:
    return {
        "model": model,
        "size": size,
        "seconds_per_image": round(seconds, 4),
        "denoiser_calls": calls,
    }

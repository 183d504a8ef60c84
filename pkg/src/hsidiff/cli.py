"""Command-line interface.

Commands: prepare | train-stage1 | train-stage2 | infer | evaluate | ablate |
benchmark-time. Every command takes --config FILE plus repeatable
--set key=value overrides. Exit codes: 0 ok, 2 config error, 3 numerical
abort. $HSIDIFF_OUT_ROOT reroots relative output directories.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from .config import (
    PipelineConfig,
    config_hash,
    default_config,
    load_config,
    write_config,
)
from .errors import ConfigError, NumericalAbort
from . import pipeline


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as e:
            click.echo(f"config error: {e}", err=True)
            sys.exit(2)
        except NumericalAbort as e:
            click.echo(f"numerical abort: {e}", err=True)
            sys.exit(3)

    return wrapper


def _load(config_path: str | None, overrides: tuple[str, ...]) -> PipelineConfig:
    if config_path is None:
        if overrides:
            from .config import apply_overrides, config_from_dict, config_to_dict

            payload = apply_overrides(config_to_dict(default_config()), list(overrides))
            return config_from_dict(payload)
        return default_config()
    return load_config(config_path, list(overrides))


config_option = click.option("--config", "config_path", type=click.Path(), default=None,
                             help="JSON config file (defaults apply when omitted).")
set_option = click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                          help="Dotted-path config override, e.g. --set diffusion.T=50")


@click.group()
def main():
    """Hyperspectral SR: group autoencoder + latent conditional diffusion."""


@main.command("init-config")
@click.argument("path", type=click.Path())
@_exit_codes
def init_config(path):
    """Write the default config as a starting point."""
    write_config(default_config(), path)
    click.echo(f"wrote {path}")


@main.command()
@config_option
@set_option
@_exit_codes
def prepare(config_path, overrides):
    """Synthesize or ingest cubes, normalize, degrade, split, extract patches."""
    cfg = _load(config_path, overrides)
    out = pipeline.cmd_prepare(cfg)
    click.echo(f"dataset ready: {out} (config {config_hash(cfg)})")


@main.command("train-stage1")
@config_option
@set_option
@click.option("--resume-from", type=click.Path(), default=None)
@_exit_codes
def train_stage1(config_path, overrides, resume_from):
    """Train the group autoencoder on HR patches."""
    cfg = _load(config_path, overrides)
    ckpt = pipeline.cmd_train_stage1(cfg, resume_from=resume_from)
    click.echo(f"stage-1 checkpoint: {ckpt}")


@main.command("train-stage2")
@config_option
@set_option
@click.option("--gae-checkpoint", type=click.Path(), default=None)
@_exit_codes
def train_stage2(config_path, overrides, gae_checkpoint):
    """Train the latent diffusion model against frozen GAE latents."""
    cfg = _load(config_path, overrides)
    gae_ckpt = gae_checkpoint or (pipeline._ckpt_dir(cfg) / "gae.pt")
    ckpt = pipeline.cmd_train_stage2(cfg, gae_ckpt)
    click.echo(f"stage-2 checkpoint: {ckpt}")


@main.command()
@config_option
@set_option
@click.option("--lr-cube", type=click.Path(), required=True)
@click.option("--gae-checkpoint", type=click.Path(), default=None)
@click.option("--diffusion-checkpoint", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None)
@_exit_codes
def infer(config_path, overrides, lr_cube, gae_checkpoint, diffusion_checkpoint, out_path, seed):
    """Super-resolve one LR cube (encode, per-group reverse sampling, decode)."""
    cfg = _load(config_path, overrides)
    gae_ckpt = gae_checkpoint or (pipeline._ckpt_dir(cfg) / "gae.pt")
    diff_ckpt = diffusion_checkpoint or (pipeline._ckpt_dir(cfg) / "diffusion.pt")
    out = pipeline.cmd_infer(cfg, gae_ckpt, diff_ckpt, lr_cube, out_path=out_path, seed=seed)
    click.echo(f"sr cube: {out}")


@main.command()
@config_option
@set_option
@click.option("--ref", "ref_path", type=click.Path(), required=True)
@click.option("--cand", "cand_path", type=click.Path(), required=True)
@click.option("--lr", "lr_path", type=click.Path(), default=None,
              help="LR cube for the bicubic baseline; derived from --ref when omitted.")
@click.option("--label", default="candidate")
@_exit_codes
def evaluate(config_path, overrides, ref_path, cand_path, lr_path, label):
    """Six-index report plus false-color, error-map, and spectral-curve artifacts."""
    cfg = _load(config_path, overrides)
    reports = pipeline.cmd_evaluate(cfg, ref_path, cand_path, lr_path, label=label)
    for name, rep in reports.items():
        for line in rep.format_lines(name):
            click.echo(line)


@main.command()
@config_option
@set_option
@click.option("--variants", default=",".join(pipeline.VARIANTS),
              help="Comma-separated subset of: " + ", ".join(pipeline.VARIANTS))
@_exit_codes
def ablate(config_path, overrides, variants):
    """Run the ablation variants under identical seeds and budgets."""
    cfg = _load(config_path, overrides)
    rows = pipeline.cmd_ablate(cfg, [v.strip() for v in variants.split(",") if v.strip()])
    for row in rows:
        click.echo(
            f"{row['variant']:>8}: MPSNR {row['mpsnr']}, ERGAS {row['ergas']}, "
            f"calls {row['calls_per_image']}"
        )


@main.command("benchmark-time")
@config_option
@set_option
@click.option("--sizes", default="64,128,256")
@_exit_codes
def benchmark_time(config_path, overrides, sizes):
    """Average inference seconds/image and call counts for ours vs GAE-free variants."""
    cfg = _load(config_path, overrides)
    size_list = [int(s) for s in sizes.split(",") if s.strip()]
    rows = pipeline.cmd_benchmark_time(cfg, size_list)
    for row in rows:
        click.echo(
            f"{row['model']:>8} @ {row['size']}: {row['seconds_per_image']}s, "
            f"{row['denoiser_calls']} calls"
        )


if __name__ == "__main__":
    main()

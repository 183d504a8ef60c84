"""Hyperspectral super-resolution via a group autoencoder and latent diffusion."""

from .cube import (
    HSICube,
    ImagePair,
    PatchSpec,
    extract_patches,
    load_cube,
    normalize,
    save_cube,
    synth_cube,
)
from .grouping import GroupingConfig, GroupList, group, merge, plan_groups
from .losses import LossConfig, PerceptualExtractor, loss_gradient, loss_l1, loss_perceptual, loss_sam, loss_total
from .metrics import MetricsReport, compute_report
from .resample import degrade, upsample_bicubic

__version__ = "0.1.0"

import numpy as np
import pytest

from hsidiff.cube import HSICube, synth_cube
from hsidiff.resample import degrade, resize_band, upsample_bicubic

from oracles import resize_band_ref


def test_degrade_shape_contract():
    pair = degrade(synth_cube(16, 16, 4, seed=0), 2)
    assert pair.lr.data.shape == (8, 8, 4)
    assert pair.hr.data.shape == (16, 16, 4)


def test_degrade_requires_divisible_dims():
    cube = HSICube(np.random.default_rng(0).random((9, 8, 4)).astype(np.float32))
    with pytest.raises(ValueError, match="not divisible"):
        degrade(cube, 2)


def test_constant_cube_survives_degrade_and_upsample():
    cube = HSICube(np.full((12, 12, 3), 0.37, dtype=np.float32))
    for scale in (2, 3, 4):
        pair = degrade(cube, scale)
        assert np.allclose(pair.lr.data, 0.37, atol=1e-6)
        up = upsample_bicubic(pair.lr, scale)
        assert up.data.shape == cube.data.shape
        assert np.allclose(up.data, cube.data, atol=1e-6)


def test_upsample_shape_contract():
    cube = synth_cube(8, 8, 4, seed=1)
    up = upsample_bicubic(cube, 2)
    assert up.data.shape == (16, 16, 4)


def test_downsample_ramp_matches_dense_oracle():
    # bilinear ramp f(x, y) = x / (W-1)
    w, h = 16, 16
    ramp = np.tile(np.arange(w, dtype=np.float64) / (w - 1), (h, 1))
    for scale in (2, 4):
        got = resize_band(ramp, h // scale, w // scale)
        want = resize_band_ref(ramp, h // scale, w // scale)
        assert np.abs(got - want).max() < 1e-5


def test_upsample_delta_matches_dense_oracle():
    delta = np.zeros((8, 8))
    delta[3, 4] = 1.0
    for scale in (2, 3):
        got = resize_band(delta, 8 * scale, 8 * scale)
        want = resize_band_ref(delta, 8 * scale, 8 * scale)
        assert np.abs(got - want).max() < 1e-5


def test_random_band_matches_dense_oracle_both_directions():
    rng = np.random.default_rng(42)
    band = rng.random((12, 18))
    for out_shape in [(6, 9), (4, 6), (24, 36), (12, 18)]:
        got = resize_band(band, *out_shape)
        want = resize_band_ref(band, *out_shape)
        assert np.abs(got - want).max() < 1e-10


def test_degrade_then_upsample_recovers_smooth_content_approximately():
    cube = synth_cube(32, 32, 4, seed=3)
    pair = degrade(cube, 2)
    up = upsample_bicubic(pair.lr, 2)
    err = np.abs(up.data - cube.data).mean()
    assert err < 0.1  # smooth fields survive a x2 round trip reasonably


def test_invalid_scale_rejected():
    cube = synth_cube(8, 8, 4, seed=0)
    with pytest.raises(ValueError):
        degrade(cube, 5)
    with pytest.raises(ValueError):
        upsample_bicubic(cube, 1)

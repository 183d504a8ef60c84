import numpy as np
import pytest

from hsidiff.cube import HSICube, synth_cube
from hsidiff.grouping import (
    BandGroup,
    GroupList,
    GroupingConfig,
    group,
    group_count,
    merge,
    plan_groups,
)


def brute_force_coverage(plan, c):
    covered = [0] * c
    for s, e in plan:
        for b in range(s, e):
            covered[b] += 1
    return covered


def test_single_group_when_c_equals_n_subs():
    assert plan_groups(16, GroupingConfig(16, 4)) == [(0, 16)]


def test_plan_c28_example():
    assert plan_groups(28, GroupingConfig(16, 4)) == [(0, 16), (12, 28)]


def test_plan_c30_shifted_last_group():
    assert plan_groups(30, GroupingConfig(16, 4)) == [(0, 16), (12, 28), (14, 30)]


def test_plan_rejects_n_subs_larger_than_c():
    with pytest.raises(ValueError, match="exceeds band count"):
        plan_groups(8, GroupingConfig(16, 4))


def test_grouping_config_validation():
    with pytest.raises(ValueError):
        GroupingConfig(16, 0)
    with pytest.raises(ValueError):
        GroupingConfig(16, 16)


def test_plan_properties_brute_force():
    # every band covered, group sizes exact, starts increasing, overlaps >= n_ovls,
    # count matches the closed form, for all c in [n_subs, 256]
    for cfg in (GroupingConfig(16, 4), GroupingConfig(8, 2), GroupingConfig(12, 5)):
        for c in range(cfg.n_subs, 257):
            plan = plan_groups(c, cfg)
            covered = brute_force_coverage(plan, c)
            assert min(covered) >= 1
            assert all(e - s == cfg.n_subs for s, e in plan)
            starts = [s for s, _ in plan]
            assert starts == sorted(set(starts))
            for (s1, e1), (s2, _) in zip(plan, plan[1:]):
                assert e1 - s2 >= cfg.n_ovls
            assert plan[-1][1] == c
            assert len(plan) == group_count(c, cfg)


def test_group_count_below_band_count():
    for cfg in (GroupingConfig(16, 4), GroupingConfig(8, 2)):
        for c in range(cfg.n_subs, 257):
            assert group_count(c, cfg) < c


def test_group_slices_constant_bands():
    data = np.zeros((8, 8, 28), dtype=np.float32)
    for b in range(28):
        data[:, :, b] = b
    gl = group(HSICube(data), GroupingConfig(16, 4))
    assert len(gl) == 2
    assert np.array_equal(np.unique(gl.groups[1].data), np.arange(12, 28, dtype=np.float32))


def test_group_equals_cube_when_single_group():
    cube = synth_cube(8, 8, 16, seed=0)
    gl = group(cube, GroupingConfig(16, 4))
    assert len(gl) == 1
    assert np.array_equal(gl.groups[0].data, cube.data)
    # slices are copies, not views
    gl.groups[0].data[0, 0, 0] = -1.0
    assert cube.data[0, 0, 0] != -1.0


def test_merge_group_identity_exact():
    rng = np.random.default_rng(0)
    for cfg in (GroupingConfig(16, 4), GroupingConfig(8, 2)):
        for c in (16, 28, 30, 33):
            cube = HSICube(rng.random((8, 8, c)).astype(np.float32))
            back = merge(group(cube, cfg))
            assert np.array_equal(back.data, cube.data)


def test_merge_two_way_overlap_mean():
    g0 = BandGroup(0, 16, np.full((4, 4, 16), 1.0, dtype=np.float32))
    g1 = BandGroup(12, 28, np.full((4, 4, 16), 3.0, dtype=np.float32))
    out = merge(GroupList([g0, g1], 28))
    assert np.allclose(out.data[:, :, 12:16], 2.0)
    assert np.allclose(out.data[:, :, :12], 1.0)
    assert np.allclose(out.data[:, :, 16:], 3.0)


def test_merge_three_way_overlap_mean():
    # c=30 plan: (0,16), (12,28), (14,30); bands 14..15 covered three ways
    plan = plan_groups(30, GroupingConfig(16, 4))
    values = [0.0, 3.0, 6.0]
    groups = [
        BandGroup(s, e, np.full((4, 4, 16), v, dtype=np.float32))
        for (s, e), v in zip(plan, values)
    ]
    out = merge(GroupList(groups, 30))
    assert np.allclose(out.data[:, :, 14:16], 3.0)


def test_merge_rejects_coverage_gap():
    g0 = BandGroup(0, 16, np.zeros((4, 4, 16), dtype=np.float32))
    with pytest.raises(ValueError, match="coverage gap"):
        merge(GroupList([g0], 20))

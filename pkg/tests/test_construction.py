import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qccantor import construction as cm
from qccantor.construction import (ConstructionTree, LevelSpec, block_frame, build, enumerate_blocks,
                                   generation_sum, level_identity)
from qccantor.errors import BracketError, DomainError
from qccantor.gauge import GaugeSpec, power_gauge
from qccantor.packing import PackingLayer

from conftest import CASE_B

# frozen from an mpmath root solve of t / log(1/t) = 1e-6
CASE_B_SIGMA = 0.10669282115559628


def one_disk_tree(R=0.2, sigma=0.2, K=2.0, d=2 / 3):
    layer = PackingLayer.from_groups([(R, [0j])])
    lv = LevelSpec(layer=layer, sigmas=np.array([sigma]))
    return ConstructionTree(K=K, gauge=power_gauge(d), levels=(lv,), eps_schedule=(layer.eps,))


# ------------------------------------------------------------------ sigma

@given(R=st.floats(1e-6, 0.99), K=st.floats(1.0, 10.0))
def test_sigma_equals_radius_at_critical_exponent(R, K):
    assert cm.solve_sigma_power(R, 2 / (K + 1), K) == pytest.approx(R, rel=1e-13)


def test_sigma_examples():
    assert cm.solve_sigma_power(0.2, 2 / 3, 2.0) == pytest.approx(0.2, rel=1e-15)
    assert cm.solve_sigma_power(0.01, 1.0, 2.0) == pytest.approx(0.1, rel=1e-14)
    with pytest.raises(DomainError):
        cm.solve_sigma_power(1.0, 1.0, 2.0)


def test_exponent_identity_example():
    lhs, rhs = cm.power_identity_logs(0.2, 0.2, 2.0, 2 / 3)
    assert math.exp(lhs) == pytest.approx(0.04, rel=1e-14)
    assert math.exp(rhs) == pytest.approx(0.04, rel=1e-14)


@given(ls=st.floats(-30, -1e-3), lR=st.floats(-30, -1e-3), K=st.floats(1, 20), d=st.floats(0.01, 1.99))
def test_exponent_identity_property(ls, lR, K, d):
    lhs, rhs = cm.power_identity_logs(math.exp(ls), math.exp(lR), K, d)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_general_solver_matches_power_for_unit_eps():
    K, d = 2.5, 0.7
    R1 = 0.1
    s1 = cm.solve_sigma_power(R1, d, K)
    log_s = K * math.log(s1) + math.log(R1)
    R2 = np.array([0.05, 0.02])
    got = cm.solve_sigma_general(log_s, math.log(R1), R2, power_gauge(d), K)
    want = cm.solve_sigma_power(R2, d, K)
    assert np.allclose(np.log(got), np.log(want), rtol=1e-12, atol=0)


def test_general_solver_case_b_level_one():
    R = 1e-3
    sig = cm.solve_sigma_general(0.0, 0.0, R, CASE_B, 2.0)
    assert sig == pytest.approx(CASE_B_SIGMA, rel=1e-12)
    s = 2 * math.log(sig) + math.log(R)
    assert CASE_B.eval_log(s) == pytest.approx(2 * math.log(R), rel=1e-13)


def test_general_solver_rejects_sigma_one():
    small = GaugeSpec(d=1.0, log_scale=math.log(0.01))
    with pytest.raises(BracketError):
        cm.solve_sigma_general(0.0, 0.0, 0.05, small, 2.0)


# ------------------------------------------------------------------ trees

def test_level_one_identity():
    tree = build(2.0, power_gauge(2 / 3), 1, (1 / 16,))
    li = level_identity(tree, 1)
    for key in ("area", "source", "target"):
        assert li[key] == pytest.approx(15 / 16, rel=1e-12)


def test_eps_product(tree2, eps_product3):
    assert tree2.eps_product() == pytest.approx(eps_product3, rel=1e-14)
    assert eps_product3 == pytest.approx(0.894012451171875, rel=1e-15)


@pytest.mark.parametrize("K", [1.5, 2.0, 3.0])
def test_check_tree_power(power_trees, K):
    rep = cm.check_tree(power_trees[K])
    assert rep["eps_product_ok"] and rep["sigma_bound_ok"]
    assert rep["sigma_relation_residual"] <= 1e-12
    assert rep["level_identity_residual"] <= 1e-12


def test_k1_collapse(k1_tree):
    src = enumerate_blocks(k1_tree, 2, "source")
    tgt = enumerate_blocks(k1_tree, 2, "target")
    for a, b in zip(src, tgt):
        assert a.path == b.path and a.center == b.center and a.log_radius == b.log_radius


def test_radii_hand_example():
    tree = one_disk_tree()
    assert math.exp(cm.source_radius(tree, [(0, 0)])) == pytest.approx(0.008, rel=1e-14)
    assert math.exp(cm.target_radius(tree, [(0, 0)])) == pytest.approx(0.04, rel=1e-14)


@pytest.mark.parametrize("K", [1.5, 2.0, 3.0])
def test_trapping_on_paths(power_trees, K):
    tree = power_trees[K].prefix(2)
    _, ls, lt, _ = cm.group_paths(tree, 2)
    assert np.all(K * lt < ls) and np.all(ls < lt)


def test_k1_source_equals_target_radius(k1_tree):
    _, ls, lt, _ = cm.group_paths(k1_tree, 2)
    assert np.array_equal(ls, lt)


def test_frames(small_tree):
    root = block_frame(small_tree, (), "target")
    assert root.center == 0 and root.radius == 1.0
    lv = small_tree.levels[0]
    for j in range(lv.layer.n_groups):
        f = block_frame(small_tree, [(j, 0)], "target")
        assert f.center == lv.layer.group_centers(j)[0]
        assert f.radius == pytest.approx(lv.sigmas[j] * lv.radii[j], rel=1e-15)


@pytest.mark.parametrize("side", ["source", "target"])
def test_children_inside_parents(small_tree, side):
    for child in enumerate_blocks(small_tree, 2, side):
        parent = block_frame(small_tree, child.path[:1], side)
        assert abs(child.center - parent.center) + child.radius < parent.radius


@pytest.mark.parametrize("side", ["source", "target"])
def test_enumeration_count_and_disjointness(small_tree, side):
    blocks = list(enumerate_blocks(small_tree, 2, side))
    assert len(blocks) == cm.count_blocks(small_tree, 2) == math.prod(
        lv.layer.n_disks for lv in small_tree.levels)
    z = np.array([b.center for b in blocks])
    r = np.array([b.radius for b in blocks])
    dist = np.abs(z[:, None] - z[None, :])
    gap = dist - (r[:, None] + r[None, :])
    np.fill_diagonal(gap, 1.0)
    assert gap.min() > 0


def test_enumeration_depth_zero(small_tree):
    (only,) = list(enumerate_blocks(small_tree, 0, "source"))
    assert only.center == 0 and only.log_radius == 0


def test_enumeration_partition(small_tree):
    full = [b.path for b in enumerate_blocks(small_tree, 2, "target")]
    n1 = small_tree.levels[0].layer.n_disks
    parts = [b.path for t in range(n1) for b in enumerate_blocks(small_tree, 2, "target", top=t)]
    assert parts == full


@pytest.mark.parametrize("side", ["source", "target"])
def test_generation_sum_power(tree2, side, eps_product3):
    for N in range(4):
        want = math.fsum(math.log1p(-e) for e in tree2.eps_schedule[:N])
        assert generation_sum(tree2, N, side) == pytest.approx(want, rel=1e-12, abs=1e-15)
    assert math.exp(generation_sum(tree2, 3, side)) == pytest.approx(eps_product3, rel=1e-12)
    assert math.exp(generation_sum(tree2, 1, side)) == pytest.approx(tree2.levels[0].layer.coverage,
                                                                     rel=1e-12)


def test_generation_sum_case_b_by_enumeration(case_b_tree):
    # every (level-1 disk, level-2 disk) pair, built from per-disk data
    per_disk = [np.repeat(2.0 * np.log(lv.sigmas) + np.log(lv.radii), lv.counts)
                for lv in case_b_tree.levels]
    radii = (per_disk[0][:, None] + per_disk[1][None, :]).ravel()
    total = math.fsum(np.exp(CASE_B.eval_log(radii)).tolist())
    got = math.exp(generation_sum(case_b_tree, 2, "source"))
    assert got == pytest.approx(total, rel=1e-11)
    assert case_b_tree.eps_product() * (1 - 1e-12) <= got <= 1.0


def test_case_b_tree(case_b_tree):
    rep = cm.check_tree(case_b_tree)
    assert rep["sigma_relation_residual"] <= 1e-12
    assert rep["target_relation_residual"] <= 1e-12
    assert rep["trapping"] and rep["h_target_increasing_on_T"]


def test_ts_correspondence_on_T(case_b_tree):
    ts = cm.ts_correspondence(case_b_tree)
    v = ts.eval_log(ts.log_t)
    assert np.allclose(v, ts.log_R2, rtol=1e-12, atol=0)
    grid = np.linspace(ts.log_t[0] * 1.5, ts.log_t[-1] * 0.5, 200)
    s = ts.log_s_of(grid)
    assert np.all(2.0 * grid < s) and np.all(s < grid)


def test_ts_correspondence_unit_eps(small_tree):
    ts = cm.ts_correspondence(small_tree)
    assert np.allclose(ts.eval_log(ts.log_t), small_tree.d_prime * ts.log_t, rtol=1e-14)


def test_diameter_decay(tree2):
    prev = 0.0
    for N in range(1, 4):
        prev_max = prev
        prev = prev + float(tree2.level_scales(N, "target").max())
        assert prev < prev_max
    assert cm.lebesgue_generation(tree2, 1e-2) is not None
    assert cm.lebesgue_generation(tree2, 1e-300) is None


def test_general_ordering(case_b_tree):
    min_R = math.inf
    min_s = math.inf
    for lv in case_b_tree.levels:
        assert np.all(lv.radii < min_R) and np.all(lv.sigmas < min_s)
        assert np.all(np.diff(lv.radii) < 0) and np.all(np.diff(lv.sigmas) < 0)
        min_R, min_s = lv.radii.min(), lv.sigmas.min()


def test_single_radius_inner_levels(case_b_tree):
    assert all(lv.layer.n_groups == 1 for lv in case_b_tree.levels[:-1])


def test_persistence(small_tree, tmp_path):
    p = tmp_path / "tree.json"
    cm.save_tree(small_tree, p)
    back = cm.load_tree(p)
    assert json.dumps(back.to_json()) == json.dumps(small_tree.to_json())
    assert cm.check_tree(back) == cm.check_tree(small_tree)


def test_prefix(tree2, tree2_depth2):
    assert tree2_depth2.depth == 2
    assert generation_sum(tree2_depth2, 2, "target") == generation_sum(tree2, 2, "target")


def test_build_validation():
    with pytest.raises(DomainError):
        build(0.5, power_gauge(1.0), 1)
    with pytest.raises(DomainError):
        build(2.0, power_gauge(1.0), 2, (0.4, 0.4))
    with pytest.raises(DomainError):
        build(2.0, power_gauge(1.0), 3, (0.1,))


def test_build_deterministic(small_tree):
    again = build(2.0, power_gauge(2 / 3), 2, (0.25, 0.125), sigma_max=0.5)
    assert json.dumps(again.to_json()) == json.dumps(small_tree.to_json())

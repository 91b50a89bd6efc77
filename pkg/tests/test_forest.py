import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from pif.errors import DimensionMismatch
from pif.forest import (
    ExternalNode,
    InternalNode,
    PiForest,
    PifParams,
    PiTree,
    adjustment_c,
    build_forest,
    build_tree,
    default_height_limit,
    path_length,
    score,
    voronoi_partition,
)

# Frozen from a 30-digit mpmath evaluation of 2(ln(n-1) + gamma) - 2(n-1)/n.
C3 = 1.2073923575896230
C4 = 1.8516559071392851
C256 = 10.2447709201199180


def sparse_prefs(n, d, seed, density=0.3):
    rng = np.random.default_rng(seed)
    return rng.random((n, d)) * (rng.random((n, d)) < density)


# -- adjustment factor ----------------------------------------------------


def test_adjustment_c_values():
    assert adjustment_c(0) == 0.0
    assert adjustment_c(1) == 0.0
    assert adjustment_c(2) == 1.0
    assert adjustment_c(3) == pytest.approx(C3, abs=1e-12)
    assert adjustment_c(4) == pytest.approx(C4, abs=1e-12)
    assert adjustment_c(256) == pytest.approx(C256, abs=1e-12)
    assert adjustment_c(256) == pytest.approx(10.2445, abs=5e-4)


def test_adjustment_c_matches_oracle_and_grows():
    vals = [adjustment_c(n) for n in range(0, 500)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    for n in range(500):
        assert vals[n] == pytest.approx(oracles.c(n), abs=1e-12)
    with pytest.raises(ValueError):
        adjustment_c(-1)


@pytest.mark.parametrize("psi, b, limit", [(256, 2, 8), (257, 2, 9), (256, 4, 4),
                                           (100, 3, 5), (2, 2, 1), (3, 2, 2)])
def test_height_limit(psi, b, limit):
    assert default_height_limit(psi, b) == limit
    assert limit == math.ceil(round(math.log(psi, b), 9))


def test_params_validation():
    for kwargs in ({"t": 0}, {"b": 1}, {"psi": 1}, {"height_limit": 0}, {"metric": "cosine"}):
        with pytest.raises(ValueError):
            PifParams(**kwargs)


# -- voronoi partition ----------------------------------------------------


def test_partition_seeds_own_cells():
    parts = voronoi_partition([(1, 0), (0, 1)], [(1, 0), (0, 1)])
    assert [p.tolist() for p in parts] == [[0], [1]]


def test_partition_tie_goes_to_first_seed():
    parts = voronoi_partition([(1, 1)], [(1, 0), (0, 1)], "tanimoto")
    assert [p.tolist() for p in parts] == [[0], []]
    parts = voronoi_partition([(0.5, 0.5)], [(1, 0), (0, 1)], "euclidean")
    assert [p.tolist() for p in parts] == [[0], []]


@pytest.mark.parametrize("metric", ["tanimoto", "euclidean"])
def test_partition_matches_brute_force(metric):
    for seed in range(20):
        pts = sparse_prefs(5, 4, seed)
        pair = np.random.default_rng(seed).choice(5, 2, replace=False)
        parts = voronoi_partition(pts, pts[pair], metric)
        got = np.empty(5, dtype=int)
        for cell, idx in enumerate(parts):
            got[idx] = cell
        want = [oracles.nearest(list(p), [list(s) for s in pts[pair]], metric) for p in pts]
        assert got.tolist() == want
        assert sorted(np.concatenate(parts).tolist()) == list(range(5))


def test_partition_dimension_check():
    with pytest.raises(DimensionMismatch):
        voronoi_partition([(1, 0)], [(1, 0, 0), (0, 1, 0)])


# -- trees ----------------------------------------------------------------


def test_single_point_is_leaf():
    tree = build_tree([[1.0, 0.0]], 0, PifParams(b=2))
    assert tree.root == ExternalNode(1)


def test_four_separated_points_leaves_small():
    pts = np.eye(4)
    for seed in range(30):
        tree = build_tree(pts, 0, PifParams(b=2, height_limit=3, rng_seed=seed))
        assert max(s for s in tree.flat.sizes if s >= 0) <= 2


def test_psi_256_depth_is_eight():
    forest = build_forest(sparse_prefs(600, 40, 0), PifParams(t=10, psi=256, b=2))
    assert max(tree.depth() for tree in forest.trees) <= 8
    assert max(tree.depth() for tree in forest.trees) == 8


def test_duplicate_seeds_make_empty_child():
    pts = np.array([[1.0, 0.0], [1.0, 0.0]])
    tree = build_tree(pts, 0, PifParams(b=2, height_limit=1))
    assert tree.root.children[1] == ExternalNode(0)
    assert tree.root.children[0] == ExternalNode(2)


def _check_partitions(node, idx, bank, metric, b):
    """Re-partition the training rows at every node; returns leaf per row."""
    if isinstance(node, ExternalNode):
        assert node.size == len(idx)
        return {int(i): node for i in idx}
    assert len(node.seeds) == b and len(set(node.seeds)) == b
    assert set(node.seeds) <= set(idx.tolist())
    parts = voronoi_partition(bank[idx], bank[list(node.seeds)], metric)
    assert sorted(np.concatenate(parts).tolist()) == list(range(len(idx)))
    leaves = {}
    for child, part in zip(node.children, parts):
        leaves.update(_check_partitions(child, idx[part], bank, metric, b))
    return leaves


@pytest.mark.parametrize("metric, b", [("tanimoto", 2), ("euclidean", 3), ("jaccard", 2)])
def test_partition_completeness_and_self_consistency(metric, b):
    for seed in range(5):
        pts = sparse_prefs(40, 12, seed)
        if metric == "jaccard":
            pts = (pts > 0).astype(float)
        tree = build_tree(pts, 0, PifParams(b=b, metric=metric, rng_seed=seed))
        leaves = _check_partitions(tree.root, np.arange(40), pts, metric, b)
        for i, p in enumerate(pts):
            # the walk must end in the leaf the point was grown into
            depth = path_length(p, tree) - adjustment_c(leaves[i].size)
            assert depth == pytest.approx(round(depth))
            assert path_length(p, tree) == pytest.approx(oracles.walk(p, tree.root, pts, metric))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(1, 6), st.integers(0, 10_000),
       st.sampled_from(["tanimoto", "euclidean"]), st.integers(2, 3))
def test_brute_force_walk_oracle(n, d, seed, metric, b):
    pts = sparse_prefs(n, d, seed, density=0.6)
    forest = build_forest(pts, PifParams(t=1, b=min(b, n), metric=metric, rng_seed=seed))
    tree = forest.trees[0]
    queries = np.vstack([pts, sparse_prefs(5, d, seed + 1)])
    vec = forest.path_lengths(queries)[:, 0]
    for q, h in zip(queries, vec):
        assert h == pytest.approx(oracles.walk(q, tree.root, forest.seed_bank, metric), abs=1e-12)


# -- forests --------------------------------------------------------------


def test_small_n_uses_all_points():
    forest = build_forest(sparse_prefs(100, 10, 1), PifParams(t=7, psi=256))
    assert len(forest) == 7
    assert forest.sample_size == 100
    assert all(tree.root.children for tree in forest.trees)
    assert forest.normalizer == pytest.approx(adjustment_c(100))


def test_default_forest_has_hundred_trees():
    assert len(build_forest(sparse_prefs(30, 5, 2), PifParams())) == 100


def test_forest_determinism():
    x = sparse_prefs(300, 20, 3)
    a = build_forest(x, PifParams(t=20, psi=64, rng_seed=5))
    b = build_forest(x, PifParams(t=20, psi=64, rng_seed=5))
    c = build_forest(x, PifParams(t=20, psi=64, rng_seed=6))
    assert a == b and a != c
    np.testing.assert_array_equal(a.score_samples(x), b.score_samples(x))


def test_tree_independent_of_ensemble_size():
    x = sparse_prefs(200, 15, 4)
    small = build_forest(x, PifParams(t=3, psi=64, rng_seed=9))
    big = build_forest(x, PifParams(t=10, psi=64, rng_seed=9))
    np.testing.assert_array_equal(small.path_lengths(x), big.path_lengths(x)[:, :3])


def test_forest_needs_two_points():
    with pytest.raises(ValueError):
        build_forest(np.ones((1, 3)), PifParams())


def test_vectorised_scores_match_scalar():
    x = sparse_prefs(120, 10, 7)
    forest = build_forest(x, PifParams(t=15, psi=64, rng_seed=1))
    vec = forest.score_samples(x[:20])
    for p, s in zip(x[:20], vec):
        assert score(p, forest) == pytest.approx(s, abs=1e-15)


def test_score_dimension_mismatch():
    forest = build_forest(sparse_prefs(20, 4, 0), PifParams(t=2))
    with pytest.raises(DimensionMismatch):
        score(np.ones(5), forest)
    with pytest.raises(DimensionMismatch):
        forest.score_samples(np.ones((2, 5)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_score_bounds(seed):
    x = sparse_prefs(60, 8, seed)
    forest = build_forest(x, PifParams(t=5, psi=32, rng_seed=seed))
    s = forest.score_samples(np.vstack([x, sparse_prefs(10, 8, seed + 1), np.zeros((1, 8))]))
    assert np.all((s > 0) & (s <= 1))


def _hand_tree():
    bank = np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    left = InternalNode((0, 1), (ExternalNode(1), ExternalNode(1)))
    root = InternalNode((0, 2), (left, ExternalNode(2)))
    return bank, root


def test_hand_built_two_level_tree():
    bank, root = _hand_tree()
    forest = PiForest([root], bank, PifParams(t=1, psi=4), sample_size=4)
    # (1,1,0): d to (1,0,0) is 0.5, to (0,0,1) is 1, then exact match on seed 1
    assert path_length(bank[1], forest.trees[0]) == 2.0
    # (0,1,1) lands in the size-2 leaf at depth 1: 1 + c(2)
    assert path_length(bank[3], forest.trees[0]) == 2.0
    assert score(bank[1], forest) == pytest.approx(0.47299135256988129, abs=1e-12)
    assert score(bank[1], forest) == pytest.approx(2 ** (-2 / C4))


def test_score_half_when_mean_equals_normalizer():
    forest = PiForest([ExternalNode(4)], np.zeros((0, 3)), PifParams(t=1, psi=4), 4)
    assert score(np.ones(3), forest) == pytest.approx(0.5)
    shallow = PiForest([ExternalNode(1)], np.zeros((0, 3)), PifParams(t=1, psi=4), 4)
    assert score(np.ones(3), shallow) == 1.0


def test_pitree_roundtrip_flat():
    x = sparse_prefs(50, 6, 11)
    tree = build_tree(x, 0, PifParams(b=3, rng_seed=2))
    again = PiTree(tree.flat.to_root(), x, 3, "tanimoto")
    assert again.root == tree.root


def test_anomalies_score_higher():
    rng = np.random.default_rng(0)
    normal = np.zeros((200, 20))
    normal[:100, :10] = rng.random((100, 10)) * 0.2 + 0.8
    normal[100:, 10:] = rng.random((100, 10)) * 0.2 + 0.8
    anomalies = (rng.random((10, 20)) < 0.1) * rng.random((10, 20))
    x = np.vstack([normal, anomalies])
    s = build_forest(x, PifParams(t=50, psi=64)).score_samples(x)
    assert s[200:].mean() > s[:200].mean()


def test_build_time_scales_near_linearly():
    x = sparse_prefs(2048, 200, 0, density=0.05)

    def timed(psi):
        best = math.inf
        for _ in range(3):
            start = time.perf_counter()
            build_forest(x, PifParams(t=20, psi=psi))
            best = min(best, time.perf_counter() - start)
        return best

    small, large = timed(256), timed(512)
    assert large / small <= 2.3

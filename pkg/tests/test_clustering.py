"""Density clustering against independent oracles."""

import numpy as np
import pytest

from sg4d.clustering import (
    ClusterParams,
    core_distances,
    hdbscan_cluster,
    mutual_reachability_mst,
    sample_proposals,
)
from sg4d.errors import MalformedFrame

from _oracles import (
    adjusted_rand_index,
    knn_distance,
    mst_weight_exact,
    mutual_reachability_matrix,
    prim_mst_weight,
)


def _blob_scene(seed, n_blobs=4, per_blob=120, spread=0.4, box=20.0):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-box, box, size=(n_blobs, 3))
    # keep the blobs well separated relative to their spread
    for _ in range(200):
        diff = centers[:, None] - centers[None, :]
        dist = np.sqrt((diff**2).sum(-1)) + np.eye(n_blobs) * 1e9
        if dist.min() > 12 * spread:
            break
        centers = rng.uniform(-box, box, size=(n_blobs, 3))
    points = np.vstack(
        [rng.normal(c, spread, size=(per_blob, 3)) for c in centers]
    )
    truth = np.repeat(np.arange(n_blobs), per_blob)
    return points, truth


def test_core_distances_match_kdtree_oracle():
    rng = np.random.default_rng(3)
    for n, k in [(1, 5), (4, 5), (50, 1), (200, 5), (500, 10)]:
        pts = rng.normal(size=(n, 3)) * rng.uniform(0.1, 10)
        mine = core_distances(pts, k)
        ref = knn_distance(pts, k)
        assert np.allclose(mine, ref, rtol=1e-10, atol=1e-12)


def test_mst_weight_matches_prim_oracle():
    rng = np.random.default_rng(4)
    for n in [2, 3, 10, 60, 300]:
        pts = rng.normal(size=(n, 3)) * 5
        u, v, w = mutual_reachability_mst(pts, min_samples=5)
        assert len(w) == n - 1
        dense = mutual_reachability_matrix(pts, 5)
        assert w.sum() == pytest.approx(prim_mst_weight(dense), rel=1e-10)
        # every edge weight is a genuine mutual-reachability distance
        assert np.allclose(w, dense[u, v], rtol=1e-10, atol=1e-12)


def test_mst_weight_matches_exhaustive_dp_small():
    rng = np.random.default_rng(5)
    for n in [2, 4, 7, 10, 12]:
        for _ in range(5):
            pts = rng.uniform(-3, 3, size=(n, 3))
            _, _, w = mutual_reachability_mst(pts, min_samples=3)
            dense = mutual_reachability_matrix(pts, 3)
            assert w.sum() == pytest.approx(mst_weight_exact(dense), rel=1e-10)


def test_mst_deterministic_and_sorted():
    pts = np.random.default_rng(6).normal(size=(120, 3))
    a = mutual_reachability_mst(pts, 5)
    b = mutual_reachability_mst(pts, 5)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
    w = a[2]
    assert np.all(np.diff(w) >= 0)
    assert np.all(a[0] < a[1])


def test_blob_recovery_ari():
    for seed in range(5):
        points, truth = _blob_scene(seed)
        result = hdbscan_cluster(points, ClusterParams(10, 5))
        assert result.n_clusters == 4
        assert adjusted_rand_index(result.labels, truth) >= 0.95


def test_cluster_set_invariants():
    points, _ = _blob_scene(11, n_blobs=3)
    result = hdbscan_cluster(points)
    seen = np.zeros(len(points), int)
    for cluster in result.clusters:
        assert cluster.point_indices.size >= result.params.min_cluster_size
        assert np.all(np.diff(cluster.point_indices) > 0)
        assert cluster.stability >= 0
        assert np.all(result.labels[cluster.point_indices] == cluster.cluster_id)
        seen[cluster.point_indices] += 1
    noise = result.noise_indices
    seen[noise] += 1
    assert np.all(seen == 1)
    assert np.all(result.labels[noise] == -1)


def test_labels_invariant_under_translation_and_scale():
    points, _ = _blob_scene(12)
    base = hdbscan_cluster(points).labels
    shifted = hdbscan_cluster(points + np.array([100.0, -50.0, 3.0])).labels
    scaled = hdbscan_cluster(points * 37.5).labels
    assert adjusted_rand_index(base, shifted) == 1.0
    assert adjusted_rand_index(base, scaled) == 1.0


def test_identical_points_form_one_cluster():
    pts = np.zeros((3, 3))
    result = hdbscan_cluster(pts, ClusterParams(min_cluster_size=3, min_samples=2))
    assert result.n_clusters == 1
    assert np.array_equal(result.labels, [0, 0, 0])


def test_isolated_points_are_noise():
    pts = np.array([[0, 0, 0], [5, 0, 0], [10, 0, 0], [15, 0, 0], [20, 0, 0]], float)
    result = hdbscan_cluster(pts, ClusterParams(min_cluster_size=3, min_samples=2))
    assert result.n_clusters == 0
    assert np.all(result.labels == -1)


def test_small_and_empty_inputs():
    assert hdbscan_cluster(np.zeros((0, 3))).n_clusters == 0
    assert hdbscan_cluster(np.zeros((1, 3))).labels.tolist() == [-1]
    few = np.random.default_rng(0).normal(size=(5, 3))
    result = hdbscan_cluster(few, ClusterParams(min_cluster_size=10))
    assert np.all(result.labels == -1)


def test_rejects_bad_points():
    with pytest.raises(MalformedFrame):
        hdbscan_cluster(np.zeros((4, 2)))
    with pytest.raises(MalformedFrame):
        hdbscan_cluster(np.full((4, 3), np.nan))
    with pytest.raises(ValueError):
        ClusterParams(min_cluster_size=1)
    with pytest.raises(ValueError):
        ClusterParams(min_samples=0)


def test_sample_proposals_deterministic_and_within_cluster():
    points, _ = _blob_scene(13)
    clusters = hdbscan_cluster(points)
    first = sample_proposals(clusters, points_per_cluster=4, seed=9)
    second = sample_proposals(clusters, points_per_cluster=4, seed=9)
    other = sample_proposals(clusters, points_per_cluster=4, seed=10)
    assert set(first.by_cluster) == {c.cluster_id for c in clusters.clusters}
    any_differs = False
    for cid, picks in first.by_cluster.items():
        member = clusters.clusters[cid].point_indices
        assert np.all(np.isin(picks, member))
        assert len(np.unique(picks)) == len(picks) == min(4, member.size)
        assert np.array_equal(picks, second.by_cluster[cid])
        if not np.array_equal(picks, other.by_cluster[cid]):
            any_differs = True
    assert any_differs


def test_sample_proposals_small_cluster_capped():
    pts = np.vstack(
        [
            np.random.default_rng(1).normal(0, 0.05, size=(6, 3)),
            np.random.default_rng(2).normal(10, 0.05, size=(30, 3)),
        ]
    )
    clusters = hdbscan_cluster(pts, ClusterParams(min_cluster_size=5, min_samples=3))
    proposals = sample_proposals(clusters, points_per_cluster=8, seed=0)
    for cid, picks in proposals.by_cluster.items():
        size = clusters.clusters[cid].point_indices.size
        assert len(picks) == min(8, size)

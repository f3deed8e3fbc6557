"""Density clustering of 3-D point clouds and prompt-point proposals.

The clusterer follows the classic density-hierarchy recipe: per-point core
distances, a minimum spanning tree of the mutual-reachability graph, the
single-linkage dendrogram of that tree, a condensed tree at the requested
minimum cluster size, and excess-of-mass selection over the condensed
clusters.  All stages are exact; no subsampling happens anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import MalformedFrame
from . import _kernels, _tree

__all__ = [
    "ClusterParams",
    "Cluster",
    "ClusterSet",
    "hdbscan_cluster",
    "core_distances",
    "mutual_reachability_mst",
    "sample_proposals",
]

LAMBDA_CAP = 1e12


@dataclass(frozen=True)
class ClusterParams:
    """Knobs for density clustering.

    ``min_cluster_size`` is the smallest group reported as a cluster;
    ``min_samples`` sets the neighborhood used for core distances (the
    k-th nearest neighbor counting the point itself, capped at the number
    of points).
    """

    min_cluster_size: int = 10
    min_samples: int = 5

    def __post_init__(self) -> None:
        if self.min_cluster_size < 2:
            raise ValueError("min_cluster_size must be at least 2")
        if self.min_samples < 1:
            raise ValueError("min_samples must be at least 1")


@dataclass(frozen=True)
class Cluster:
    """One selected cluster: sorted member indices plus its stability score."""

    cluster_id: int
    point_indices: np.ndarray
    stability: float


@dataclass(frozen=True)
class ClusterSet:
    """Result of clustering one point set.

    ``labels`` maps every input point to a cluster id or -1 for noise;
    clusters are numbered 0..k-1 by ascending first member index.
    """

    labels: np.ndarray
    clusters: tuple[Cluster, ...]
    params: ClusterParams

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def noise_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels < 0)


def _validated_points(points: np.ndarray) -> np.ndarray:
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise MalformedFrame(f"points must have shape (N, 3), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise MalformedFrame("points contain non-finite values")
    return pts


def core_distances(points: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance from each point to its min_samples-th neighbor, self included."""
    pts = _validated_points(points)
    n = pts.shape[0]
    if n == 0:
        return np.empty(0, np.float64)
    k = min(min_samples, n)
    tree = _kernels.build_tree(pts)
    core2 = _kernels.core_distances_sq(pts, *tree[:7], k)
    return np.sqrt(core2)


def mutual_reachability_mst(
    points: np.ndarray, min_samples: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact MST of the mutual-reachability graph.

    Returns parallel arrays (u, v, weight) of the n-1 edges, sorted by
    (weight, u, v) so the result is unique even under weight ties.
    """
    pts = _validated_points(points)
    n = pts.shape[0]
    if n < 2:
        empty = np.empty(0, np.int64)
        return empty, empty.copy(), np.empty(0, np.float64)
    k = min(min_samples, n)
    tree = _kernels.build_tree(pts)
    core2 = _kernels.core_distances_sq(pts, *tree[:7], k)
    eu, ev, ew2 = _kernels.boruvka_mst_sq(pts, core2, *tree[:7])
    weights = np.sqrt(ew2)
    lo = np.minimum(eu, ev)
    hi = np.maximum(eu, ev)
    order = np.lexsort((hi, lo, weights))
    return lo[order], hi[order], weights[order]


def hdbscan_cluster(points: np.ndarray, params: ClusterParams | None = None) -> ClusterSet:
    """Cluster points by density; returns labels, clusters, and stabilities.

    Points in no selected cluster get label -1.  A degenerate input whose
    points are all coincident still forms one cluster when it is large
    enough, since no density split can separate identical points.
    """
    params = params or ClusterParams()
    pts = _validated_points(points)
    n = pts.shape[0]
    labels = np.full(n, -1, np.int64)
    if n < 2 or n < params.min_cluster_size:
        return ClusterSet(labels=labels, clusters=(), params=params)
    u, v, w = mutual_reachability_mst(pts, params.min_samples)
    merges_l, merges_r, merges_d, sizes = _kernels.single_linkage(u, v, w, n)
    row_parent, row_child, row_lam, row_size = _kernels.condense_tree(
        merges_l, merges_r, merges_d, sizes, n, params.min_cluster_size, LAMBDA_CAP
    )
    next_label = int(row_child.max(initial=n - 1)) + 1 if len(row_child) else n + 1
    next_label = max(next_label, n + 1)
    stability = _tree.compute_stability(
        row_parent, row_child, row_lam, row_size, n, next_label
    )
    selected = _tree.select_eom(
        row_parent, row_child, row_size, stability, n, next_label
    )
    if not selected and np.all(merges_d <= 0.0):
        # Zero-diameter data: every point is identical, so the root is the
        # only meaningful cluster.
        condensed_labels = np.zeros(n, np.int64)
        cluster = Cluster(
            cluster_id=0,
            point_indices=np.arange(n, dtype=np.int64),
            stability=float(stability[0]),
        )
        return ClusterSet(
            labels=condensed_labels, clusters=(cluster,), params=params
        )
    condensed_labels, members = _tree.label_points(
        row_parent, row_child, n, next_label, selected
    )
    order = sorted(
        (int(m.min()), c) for c, m in members.items() if m.size
    )
    clusters = []
    for out_id, (_, condensed_id) in enumerate(order):
        indices = members[condensed_id]
        labels[indices] = out_id
        clusters.append(
            Cluster(
                cluster_id=out_id,
                point_indices=indices,
                stability=float(stability[condensed_id - n]),
            )
        )
    return ClusterSet(labels=labels, clusters=tuple(clusters), params=params)


@dataclass(frozen=True)
class ClusterProposals:
    """Per-cluster prompt points sampled without replacement."""

    by_cluster: dict[int, np.ndarray]
    points_per_cluster: int
    seed: int

    def __iter__(self):
        return iter(sorted(self.by_cluster.items()))


def sample_proposals(
    cluster_set: ClusterSet,
    points_per_cluster: int = 4,
    seed: int = 0,
) -> ClusterProposals:
    """Draw up to ``points_per_cluster`` member indices from each cluster.

    Sampling is seeded per cluster, so the draw for one cluster does not
    depend on how many other clusters exist, and repeated calls with the
    same seed return identical indices.
    """
    if points_per_cluster < 1:
        raise ValueError("points_per_cluster must be at least 1")
    by_cluster: dict[int, np.ndarray] = {}
    for cluster in cluster_set.clusters:
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=(int(seed), int(cluster.cluster_id)))
        )
        size = min(points_per_cluster, cluster.point_indices.size)
        picks = rng.choice(cluster.point_indices, size=size, replace=False)
        by_cluster[cluster.cluster_id] = np.sort(picks.astype(np.int64))
    return ClusterProposals(
        by_cluster=by_cluster, points_per_cluster=points_per_cluster, seed=seed
    )

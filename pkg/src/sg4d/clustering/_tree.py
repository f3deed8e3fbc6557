"""Condensed-tree analysis: stability, excess-of-mass selection, labels.

Operates on the flat condensed-tree rows produced by the kernels.  Cluster
ids in the rows start at ``n`` (the root); selection never returns the root
unless the whole dataset collapses at distance zero, in which case a single
cluster over all points is the only sensible answer.
"""

from __future__ import annotations

import numpy as np

__all__ = ["compute_stability", "select_eom", "label_points"]


def compute_stability(
    row_parent: np.ndarray,
    row_child: np.ndarray,
    row_lam: np.ndarray,
    row_size: np.ndarray,
    n: int,
    next_label: int,
) -> np.ndarray:
    """Per-cluster stability: sum over members of (lambda_out - lambda_birth).

    Indexed by ``cluster_id - n``.  The root is born at lambda 0; every
    other cluster is born at the lambda of the split that created it.
    """
    n_clusters = next_label - n
    births = np.zeros(n_clusters, np.float64)
    child_is_cluster = row_child >= n
    births[row_child[child_is_cluster] - n] = row_lam[child_is_cluster]
    stability = np.zeros(n_clusters, np.float64)
    contrib = (row_lam - births[row_parent - n]) * row_size
    np.add.at(stability, row_parent - n, contrib)
    return stability


def select_eom(
    row_parent: np.ndarray,
    row_child: np.ndarray,
    row_size: np.ndarray,
    stability: np.ndarray,
    n: int,
    next_label: int,
) -> list[int]:
    """Excess-of-mass cluster selection over the condensed tree.

    Walks clusters leaf-to-root; a cluster survives when its own stability
    is at least the summed stability of its children, in which case every
    descendant is discarded.  The root is never a candidate.
    """
    n_clusters = next_label - n
    if n_clusters <= 1:
        return []
    children: dict[int, list[int]] = {}
    for parent, child in zip(row_parent, row_child):
        if child >= n:
            children.setdefault(int(parent), []).append(int(child))
    work = stability.astype(np.float64).copy()
    selected = np.ones(n_clusters, bool)
    selected[0] = False
    for cluster in range(next_label - 1, n, -1):
        kids = children.get(cluster, [])
        subtree = sum(work[k - n] for k in kids)
        if kids and subtree > work[cluster - n]:
            selected[cluster - n] = False
            work[cluster - n] = subtree
        else:
            stack = list(kids)
            while stack:
                node = stack.pop()
                selected[node - n] = False
                stack.extend(children.get(node, []))
    return [n + i for i in np.flatnonzero(selected)]


def label_points(
    row_parent: np.ndarray,
    row_child: np.ndarray,
    n: int,
    next_label: int,
    selected: list[int],
) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Assign each point to its nearest selected ancestor cluster, or noise.

    Returns the per-point label array (values are condensed cluster ids,
    -1 for noise) and a map from selected cluster id to its sorted member
    point indices.
    """
    labels = np.full(n, -1, np.int64)
    members: dict[int, np.ndarray] = {c: np.empty(0, np.int64) for c in selected}
    if not selected:
        return labels, members
    parent_of = np.full(next_label - n, -1, np.int64)
    for parent, child in zip(row_parent, row_child):
        if child >= n:
            parent_of[child - n] = parent
    selected_set = frozenset(selected)
    resolve = np.full(next_label - n, -1, np.int64)
    for cluster in range(n, next_label):
        walk = cluster
        while walk != -1 and walk not in selected_set:
            walk = int(parent_of[walk - n])
        resolve[cluster - n] = walk
    point_rows = row_child < n
    point_ids = row_child[point_rows]
    owner = resolve[row_parent[point_rows] - n]
    labels[point_ids] = owner
    for cluster in selected:
        members[cluster] = np.sort(point_ids[owner == cluster])
    return labels, members

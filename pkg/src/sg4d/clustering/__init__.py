"""Density clustering and prompt-point proposals."""

from .core import (
    Cluster,
    ClusterParams,
    ClusterProposals,
    ClusterSet,
    core_distances,
    hdbscan_cluster,
    mutual_reachability_mst,
    sample_proposals,
)

__all__ = [
    "Cluster",
    "ClusterParams",
    "ClusterProposals",
    "ClusterSet",
    "core_distances",
    "hdbscan_cluster",
    "mutual_reachability_mst",
    "sample_proposals",
]

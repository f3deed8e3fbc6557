"""Projection, point-to-mask assignment, and bipartite mask matching.

Pixel convention: a projected point hits pixel ``(row, col)`` by rounding
to the nearest integer, so the image covers ``[-0.5, W-0.5) x [-0.5, H-0.5)``
in continuous coordinates.  Depth is the z coordinate in the camera frame;
points closer than the near plane are invisible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InconsistentViews, InvalidCostMatrix
from .masks import MaskSet
from .sceneio import CameraView

__all__ = [
    "NEAR_PLANE_M",
    "ProjectedPoints",
    "project_points",
    "transform_points",
    "PointAssignment",
    "assign_points_to_masks",
    "assign_single_view",
    "crossview_mask_cost",
    "MatchResult",
    "hungarian_match",
]

NEAR_PLANE_M = 0.1


def transform_points(transform: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Apply a 4x4 rigid transform to an (N, 3) array, in float64."""
    pts = np.asarray(points, dtype=np.float64)
    return pts @ np.asarray(transform, dtype=np.float64)[:3, :3].T + transform[:3, 3]


@dataclass(frozen=True)
class ProjectedPoints:
    """Projection of one point array into one camera.

    ``u``/``v`` are continuous pixel coordinates (column, row); ``depth``
    is camera-frame z.  ``visible`` marks points in front of the near
    plane whose rounded pixel lies inside the image.  ``pixel_rows`` and
    ``pixel_cols`` hold that rounded pixel, -1 where invisible.
    """

    camera_id: str
    u: np.ndarray
    v: np.ndarray
    depth: np.ndarray
    visible: np.ndarray
    pixel_rows: np.ndarray
    pixel_cols: np.ndarray
    resolution: tuple[int, int]

    @property
    def n_points(self) -> int:
        return self.u.shape[0]


def project_points(
    points: np.ndarray,
    view: CameraView,
    near_plane: float = NEAR_PLANE_M,
) -> ProjectedPoints:
    """Project sensor-frame points through a calibrated pinhole camera."""
    pts = np.asarray(points, dtype=np.float64)
    cam = transform_points(view.extrinsics, pts)
    depth = cam[:, 2]
    safe = np.where(np.abs(depth) > 1e-12, depth, 1.0)
    fx = view.intrinsics[0, 0]
    fy = view.intrinsics[1, 1]
    cx = view.intrinsics[0, 2]
    cy = view.intrinsics[1, 2]
    skew = view.intrinsics[0, 1]
    u = (fx * cam[:, 0] + skew * cam[:, 1]) / safe + cx
    v = fy * cam[:, 1] / safe + cy
    height, width = view.resolution
    visible = (
        (depth >= near_plane)
        & (u >= -0.5)
        & (u < width - 0.5)
        & (v >= -0.5)
        & (v < height - 0.5)
    )
    rows = np.full(pts.shape[0], -1, np.int64)
    cols = np.full(pts.shape[0], -1, np.int64)
    rows[visible] = np.rint(v[visible]).astype(np.int64)
    cols[visible] = np.rint(u[visible]).astype(np.int64)
    return ProjectedPoints(
        camera_id=view.camera_id,
        u=u,
        v=v,
        depth=depth,
        visible=visible,
        pixel_rows=rows,
        pixel_cols=cols,
        resolution=(int(height), int(width)),
    )


@dataclass(frozen=True)
class PointAssignment:
    """Partition of candidate points over masks.

    ``by_mask`` maps (camera_id, mask_id) to sorted point indices; every
    mask key appears even when empty.  ``residual`` holds candidates no
    visible mask claimed.  The member arrays and ``residual`` together
    partition the candidate set.
    """

    by_mask: dict[tuple[str, int], np.ndarray]
    residual: np.ndarray


def _first_hit(projection: ProjectedPoints, mask_set: MaskSet, cand: np.ndarray) -> np.ndarray:
    """Per-candidate claimed mask_id in one view (-1 if none).

    Overlapping masks are disambiguated by ascending mask_id, so the
    partition property holds inside a single view too.
    """
    hit = np.full(cand.shape[0], -1, np.int64)
    if not mask_set.masks:
        return hit
    vis = projection.visible[cand]
    rows = projection.pixel_rows[cand[vis]]
    cols = projection.pixel_cols[cand[vis]]
    vis_hit = np.full(rows.shape[0], -1, np.int64)
    for mask in sorted(mask_set.masks, key=lambda m: m.mask_id):
        if mask.raster.shape != projection.resolution:
            raise InconsistentViews(
                f"mask {mask.mask_id} raster {mask.raster.shape} does not "
                f"match camera {projection.camera_id!r} resolution "
                f"{projection.resolution}"
            )
        claim = (vis_hit == -1) & mask.raster[rows, cols]
        vis_hit[claim] = mask.mask_id
    hit[np.flatnonzero(vis)] = vis_hit
    return hit


def assign_single_view(
    projection: ProjectedPoints,
    mask_set: MaskSet,
    candidate_indices: np.ndarray | None = None,
) -> dict[int, np.ndarray]:
    """Candidate indices claimed by each mask of one view, ignoring depth."""
    if projection.camera_id != mask_set.camera_id:
        raise InconsistentViews(
            f"projection is for camera {projection.camera_id!r}, masks for "
            f"{mask_set.camera_id!r}"
        )
    cand = (
        np.arange(projection.n_points, dtype=np.int64)
        if candidate_indices is None
        else np.unique(np.asarray(candidate_indices, dtype=np.int64))
    )
    hit = _first_hit(projection, mask_set, cand)
    return {
        mask.mask_id: cand[hit == mask.mask_id]
        for mask in sorted(mask_set.masks, key=lambda m: m.mask_id)
    }


def assign_points_to_masks(
    projections: dict[str, ProjectedPoints] | list[ProjectedPoints],
    mask_sets: list[MaskSet],
    candidate_indices: np.ndarray | None = None,
) -> PointAssignment:
    """Assign each candidate point to at most one mask across all views.

    A point claimed in several views goes to the view where it is closest,
    with ties broken by ascending camera_id and then ascending mask_id.
    """
    if isinstance(projections, dict):
        proj_by_cam = dict(projections)
    else:
        proj_by_cam = {p.camera_id: p for p in projections}
    for mask_set in mask_sets:
        if mask_set.camera_id not in proj_by_cam:
            raise InconsistentViews(
                f"mask set references unknown camera {mask_set.camera_id!r}"
            )
    n_points = next(iter(proj_by_cam.values())).n_points if proj_by_cam else 0
    lengths = {p.n_points for p in proj_by_cam.values()}
    if len(lengths) > 1:
        raise InconsistentViews(
            f"projections disagree on point count: {sorted(lengths)}"
        )
    cand = (
        np.arange(n_points, dtype=np.int64)
        if candidate_indices is None
        else np.unique(np.asarray(candidate_indices, dtype=np.int64))
    )
    best_depth = np.full(cand.shape[0], np.inf)
    best_cam = np.full(cand.shape[0], -1, np.int64)
    best_mask = np.full(cand.shape[0], -1, np.int64)
    ordered_sets = sorted(mask_sets, key=lambda ms: ms.camera_id)
    for cam_index, mask_set in enumerate(ordered_sets):
        projection = proj_by_cam[mask_set.camera_id]
        hit = _first_hit(projection, mask_set, cand)
        claimed = hit != -1
        depth = projection.depth[cand]
        better = claimed & (depth < best_depth)
        best_depth[better] = depth[better]
        best_cam[better] = cam_index
        best_mask[better] = hit[better]
    by_mask: dict[tuple[str, int], np.ndarray] = {}
    for cam_index, mask_set in enumerate(ordered_sets):
        for mask in sorted(mask_set.masks, key=lambda m: m.mask_id):
            sel = (best_cam == cam_index) & (best_mask == mask.mask_id)
            by_mask[(mask_set.camera_id, mask.mask_id)] = cand[sel]
    return PointAssignment(by_mask=by_mask, residual=cand[best_cam == -1])


def crossview_mask_cost(
    sets_a: list[np.ndarray], sets_b: list[np.ndarray]
) -> np.ndarray:
    """Dissimilarity matrix between two lists of 3-D point-index sets.

    Entry (i, j) is 1 minus the overlap of set i and set j over their
    union; two empty sets share no evidence and cost 1.
    """
    cost = np.ones((len(sets_a), len(sets_b)), np.float64)
    for i, a in enumerate(sets_a):
        sa = np.unique(np.asarray(a, dtype=np.int64))
        for j, b in enumerate(sets_b):
            sb = np.unique(np.asarray(b, dtype=np.int64))
            union = sa.size + sb.size
            if union == 0:
                continue
            inter = np.intersect1d(sa, sb, assume_unique=True).size
            cost[i, j] = 1.0 - inter / (union - inter)
    return cost


@dataclass(frozen=True)
class MatchResult:
    """Gated assignment: kept (row, col) pairs and their summed cost."""

    pairs: tuple[tuple[int, int], ...]
    total_cost: float


def hungarian_match(
    cost: np.ndarray, gate_threshold: float | None = None
) -> MatchResult:
    """Minimum-cost bipartite assignment on a rectangular matrix.

    Pairs whose cost is at or above ``gate_threshold`` are discarded, so
    rows and columns may go unmatched.  Cost entries must be finite.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise InvalidCostMatrix(f"cost must be 2-D, got shape {cost.shape}")
    if cost.size == 0:
        return MatchResult(pairs=(), total_cost=0.0)
    if not np.all(np.isfinite(cost)):
        raise InvalidCostMatrix("cost matrix contains non-finite values")
    work = cost
    if gate_threshold is not None:
        gated = cost >= gate_threshold
        if gated.all():
            return MatchResult(pairs=(), total_cost=0.0)
        # Sentinel exceeds any achievable sum of open costs, so the solver
        # first minimizes how many gated pairs it touches, then the real
        # cost; gated pairs are dropped from the result below.
        lo = float(cost[~gated].min())
        hi = float(cost[~gated].max())
        sentinel = hi + (min(cost.shape) + 1) * (hi - lo + 1.0)
        work = np.where(gated, sentinel, cost)
    rows, cols = linear_sum_assignment(work)
    pairs = []
    total = 0.0
    for r, c in zip(rows, cols):
        if gate_threshold is not None and cost[r, c] >= gate_threshold:
            continue
        pairs.append((int(r), int(c)))
        total += float(cost[r, c])
    pairs.sort()
    return MatchResult(pairs=tuple(pairs), total_cost=total)

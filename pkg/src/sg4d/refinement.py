"""Per-frame object discovery with iterative refinement.

One refinement pass over a frame: cluster the unmapped points, sample
prompt points per cluster, segment every camera view, reconcile masks
across views, claim points for each merged object, and encode its tokens.
The pass repeats ``iterations`` times over whatever remains unmapped, and
after each pass ``hops`` plausibility sweeps re-check every accepted
object, dissolving offenders back into the unmapped pool.

All randomness flows from explicit seeds, so rerunning a frame reproduces
the same objects bit for bit.  Failures from the segmentation backend
propagate; no partial state leaks because everything is local until the
final state is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .clustering import ClusterParams, hdbscan_cluster, sample_proposals
from .geometry import (
    NEAR_PLANE_M,
    assign_points_to_masks,
    assign_single_view,
    crossview_mask_cost,
    hungarian_match,
    project_points,
    transform_points,
)
from .masks import MaskSet
from .sceneio import Frame
from .segbackends import SegmentationBackend, SegRequest
from .tokens import (
    BACKGROUND_RGB,
    ObjectTokenSet,
    TemporalToken,
    assemble_step,
    encode_shape,
    grid_patch_tokens,
    isolate_mask,
)

__all__ = [
    "PlausibilityRules",
    "Violation",
    "Rejection",
    "RefineParams",
    "FrameState",
    "check_plausibility",
    "refine_frame",
    "HistoryLookup",
]

# Given a fresh step, report the centroid and timestamp of the object it
# most plausibly continues, or None when nothing is known.
HistoryLookup = Callable[[ObjectTokenSet], "tuple[np.ndarray, float] | None"]


@dataclass(frozen=True)
class PlausibilityRules:
    """Physical sanity limits applied to every accepted object."""

    max_extent_m: float = 30.0
    max_aspect: float = 50.0
    max_speed_mps: float = 60.0
    extent_enabled: bool = True
    aspect_enabled: bool = True
    speed_enabled: bool = True


@dataclass(frozen=True)
class Violation:
    rule_id: str
    detail: str


@dataclass(frozen=True)
class Rejection:
    """Audit record of one dissolved object."""

    object_id: int
    rule_id: str
    detail: str
    timestamp: float


def check_plausibility(
    step: ObjectTokenSet,
    rules: PlausibilityRules,
    history: HistoryLookup | None = None,
) -> Violation | None:
    """First failed sanity rule for a step, or None if it passes.

    Rules run in a fixed order: extent, aspect, speed.  The aspect rule
    ignores axes with zero spread and needs at least two nonzero axes;
    the speed rule needs a history lookup that knows a prior position.
    """
    if rules.extent_enabled:
        extent = step.shape.extent
        worst = float(extent.max())
        if worst > rules.max_extent_m:
            return Violation(
                rule_id="max_extent",
                detail=(
                    f"extent {worst:.2f} m exceeds limit "
                    f"{rules.max_extent_m:.2f} m"
                ),
            )
    if rules.aspect_enabled:
        spreads = np.array([a.std for a in step.shape.axes])
        nonzero = spreads[spreads > 0]
        if nonzero.size >= 2:
            ratio = float(nonzero.max() / nonzero.min())
            if ratio > rules.max_aspect:
                return Violation(
                    rule_id="max_aspect",
                    detail=(
                        f"axis spread ratio {ratio:.1f} exceeds limit "
                        f"{rules.max_aspect:.1f}"
                    ),
                )
    if rules.speed_enabled and history is not None:
        prior = history(step)
        if prior is not None:
            prev_centroid, prev_t = prior
            dt = step.timestamp - float(prev_t)
            if dt > 0:
                dist = float(
                    np.linalg.norm(step.centroid.as_array() - np.asarray(prev_centroid))
                )
                speed = dist / dt
                if speed > rules.max_speed_mps:
                    return Violation(
                        rule_id="max_speed",
                        detail=(
                            f"speed {speed:.1f} m/s exceeds limit "
                            f"{rules.max_speed_mps:.1f} m/s"
                        ),
                    )
    return None


@dataclass(frozen=True)
class RefineParams:
    """Shape of the refinement loop and its sub-stages."""

    iterations: int = 1
    hops: int = 1
    proposals_per_cluster: int = 4
    gate_threshold: float = 0.8
    near_plane: float = NEAR_PLANE_M
    seed: int = 0
    background_rgb: tuple[int, int, int] = BACKGROUND_RGB
    cluster: ClusterParams = field(default_factory=ClusterParams)

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.hops < 0:
            raise ValueError("hops cannot be negative")


@dataclass
class FrameState:
    """Outcome of refining one frame."""

    timestamp: float
    accepted: list[ObjectTokenSet]
    unmapped: np.ndarray
    rejections: list[Rejection]
    iterations_run: int


class _UnionFind:
    def __init__(self, keys):
        self._parent = {k: k for k in keys}

    def find(self, key):
        root = key
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[key] != root:
            self._parent[key], key = root, self._parent[key]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # smaller key stays root, keeping component ids deterministic
            lo, hi = sorted((ra, rb))
            self._parent[hi] = lo

    def components(self):
        groups: dict = {}
        for key in self._parent:
            groups.setdefault(self.find(key), []).append(key)
        return {root: sorted(members) for root, members in groups.items()}


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(entropy=tuple(int(p) for p in parts)).generate_state(1)[0])


def refine_frame(
    frame: Frame,
    backend: SegmentationBackend,
    params: RefineParams | None = None,
    rules: PlausibilityRules | None = None,
    world_from_sensor: np.ndarray | None = None,
    history: HistoryLookup | None = None,
    frame_index: int = 0,
) -> FrameState:
    """Discover, encode, and sanity-check the objects of one frame."""
    params = params or RefineParams()
    rules = rules or PlausibilityRules()
    pose = frame.ego_pose if world_from_sensor is None else world_from_sensor
    world = transform_points(pose, frame.points)
    projections = {
        view.camera_id: project_points(frame.points, view, params.near_plane)
        for view in frame.cameras
    }
    views = {view.camera_id: view for view in frame.cameras}
    unmapped = np.arange(frame.n_points, dtype=np.int64)
    accepted: list[ObjectTokenSet] = []
    rejections: list[Rejection] = []
    next_candidate = 0
    iterations_run = 0
    for iteration in range(params.iterations):
        if unmapped.size == 0:
            break
        iterations_run += 1
        clusters = hdbscan_cluster(world[unmapped], params.cluster)
        proposals = sample_proposals(
            clusters,
            points_per_cluster=params.proposals_per_cluster,
            seed=_derive_seed(params.seed, frame_index, iteration),
        )
        # one prompt group per cluster per camera that sees any proposal
        mask_sets: list[MaskSet] = []
        group_cluster: dict[tuple[str, int], int] = {}
        for camera_id in sorted(projections):
            projection = projections[camera_id]
            groups = []
            cluster_ids = []
            for cluster_id, local in sorted(proposals.by_cluster.items()):
                global_idx = unmapped[local]
                vis = projection.visible[global_idx]
                if not vis.any():
                    continue
                sel = global_idx[vis]
                groups.append(
                    np.column_stack([projection.u[sel], projection.v[sel]])
                )
                cluster_ids.append(cluster_id)
            if not groups:
                continue
            request = SegRequest(
                camera_id=camera_id,
                timestamp=frame.timestamp,
                frame_index=frame_index,
                image=views[camera_id].image,
                prompt_groups=tuple(groups),
            )
            mask_set = backend.segment(request)
            mask_sets.append(mask_set)
            for gid, cluster_id in enumerate(cluster_ids):
                group_cluster[(camera_id, gid)] = cluster_id
        if not mask_sets:
            continue
        # reconcile masks across views by overlap of the 3-D points each
        # view claims on its own
        per_view_sets = {
            ms.camera_id: assign_single_view(
                projections[ms.camera_id], ms, candidate_indices=unmapped
            )
            for ms in mask_sets
        }
        keys = [
            (ms.camera_id, mask.mask_id)
            for ms in mask_sets
            for mask in sorted(ms.masks, key=lambda m: m.mask_id)
        ]
        merge = _UnionFind(keys)
        ordered = sorted(mask_sets, key=lambda ms: ms.camera_id)
        for i in range(len(ordered)):
            for j in range(i + 1, len(ordered)):
                a, b = ordered[i], ordered[j]
                ids_a = sorted(m.mask_id for m in a.masks)
                ids_b = sorted(m.mask_id for m in b.masks)
                if not ids_a or not ids_b:
                    continue
                cost = crossview_mask_cost(
                    [per_view_sets[a.camera_id][m] for m in ids_a],
                    [per_view_sets[b.camera_id][m] for m in ids_b],
                )
                match = hungarian_match(cost, gate_threshold=params.gate_threshold)
                for r, c in match.pairs:
                    merge.union(
                        (a.camera_id, ids_a[r]), (b.camera_id, ids_b[c])
                    )
        assignment = assign_points_to_masks(
            projections, mask_sets, candidate_indices=unmapped
        )
        new_steps: list[ObjectTokenSet] = []
        claimed: list[np.ndarray] = []
        for root, members in sorted(merge.components().items()):
            point_chunks = [assignment.by_mask[key] for key in members]
            point_indices = np.unique(np.concatenate(point_chunks))
            if point_indices.size == 0:
                continue
            centroid, shape = encode_shape(world[point_indices])
            # appearance comes from the view where the object looks
            # largest; ties go to the smallest (camera_id, mask_id)
            best_key = members[0]
            best_area = -1
            for key in members:
                area = _mask_of(mask_sets, key).area
                if area > best_area:
                    best_area = area
                    best_key = key
            best_mask = _mask_of(mask_sets, best_key)
            image = views[best_key[0]].image
            isolated = isolate_mask(image, best_mask.raster, params.background_rgb)
            patches = grid_patch_tokens(best_mask.raster, isolated)
            step = assemble_step(
                object_id=next_candidate,
                timestamp=frame.timestamp,
                patches=patches,
                centroid=centroid,
                shape=shape,
                temporal=TemporalToken(frame.timestamp, frame.timestamp),
                point_indices=point_indices,
                cameras=tuple(sorted({key[0] for key in members})),
            )
            next_candidate += 1
            new_steps.append(step)
            claimed.append(point_indices)
        if claimed:
            unmapped = np.setdiff1d(unmapped, np.concatenate(claimed))
        accepted.extend(new_steps)
        for _ in range(params.hops):
            survivors = []
            freed = []
            for step in accepted:
                violation = check_plausibility(step, rules, history)
                if violation is None:
                    survivors.append(step)
                else:
                    rejections.append(
                        Rejection(
                            object_id=step.object_id,
                            rule_id=violation.rule_id,
                            detail=violation.detail,
                            timestamp=frame.timestamp,
                        )
                    )
                    freed.append(step.point_indices)
            accepted = survivors
            if freed:
                unmapped = np.union1d(unmapped, np.concatenate(freed))
    return FrameState(
        timestamp=frame.timestamp,
        accepted=accepted,
        unmapped=unmapped,
        rejections=rejections,
        iterations_run=iterations_run,
    )


def _mask_of(mask_sets: list[MaskSet], key: tuple[str, int]):
    for ms in mask_sets:
        if ms.camera_id == key[0]:
            return ms.by_id(key[1])
    raise KeyError(key)

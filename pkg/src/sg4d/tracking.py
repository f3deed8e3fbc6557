"""Temporal association of per-frame objects into persistent tracks.

Each new frame's accepted objects are matched against the live tracks by
a weighted blend of centroid distance, bounding-box disagreement, and
appearance difference, solved as an assignment problem with a hard gate.
Unmatched objects open new tracks; tracks unseen for too many frames are
terminated.  A sliding window drops steps older than a time horizon so
the store never grows without bound.

Association is permutation invariant: candidates are processed in a
canonical order derived from their geometry, so feeding the same frame's
objects in a different order yields identical track ids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation
from .geometry import hungarian_match
from .tokens import ObjectTokenSet, ShapeToken, with_object_id, with_temporal

__all__ = [
    "AssociationParams",
    "Track",
    "TrackStore",
    "AssociationOutcome",
    "shape_dissimilarity",
    "appearance_dissimilarity",
    "association_cost",
    "associate",
    "window_prune",
]

_HIST_BINS = 8


@dataclass(frozen=True)
class AssociationParams:
    """Weights and gates for frame-to-frame matching."""

    distance_weight: float = 0.5
    shape_weight: float = 0.3
    appearance_weight: float = 0.2
    gate_threshold: float = 1.0
    max_match_distance_m: float = 5.0
    max_gap_frames: int = 3

    def __post_init__(self) -> None:
        weights = (self.distance_weight, self.shape_weight, self.appearance_weight)
        if any(w < 0 for w in weights):
            raise ValueError("association weights cannot be negative")
        if sum(weights) <= 0:
            raise ValueError("association weights cannot all be zero")
        if self.gate_threshold <= 0:
            raise ValueError("gate_threshold must be positive")
        if self.max_match_distance_m <= 0:
            raise ValueError("max_match_distance_m must be positive")
        if self.max_gap_frames < 0:
            raise ValueError("max_gap_frames cannot be negative")


@dataclass
class Track:
    """One persistent object: an ordered run of per-frame token sets."""

    object_id: int
    birth_time: float
    steps: list[ObjectTokenSet] = field(default_factory=list)
    status: str = "active"
    missed_frames: int = 0

    @property
    def last_step(self) -> ObjectTokenSet:
        if not self.steps:
            raise InvariantViolation(f"track {self.object_id} has no steps")
        return self.steps[-1]

    @property
    def last_seen(self) -> float:
        return self.last_step.timestamp


class TrackStore:
    """Mutable registry of tracks with monotonically growing ids."""

    def __init__(self, start_id: int = 0):
        self.tracks: dict[int, Track] = {}
        self._next_id = start_id

    def new_track(self, birth_time: float) -> Track:
        track = Track(object_id=self._next_id, birth_time=birth_time)
        self._next_id += 1
        self.tracks[track.object_id] = track
        return track

    def active(self) -> list[Track]:
        return [
            self.tracks[i]
            for i in sorted(self.tracks)
            if self.tracks[i].status == "active" and self.tracks[i].steps
        ]

    def __len__(self) -> int:
        return len(self.tracks)

    def __iter__(self):
        return iter(self.tracks[i] for i in sorted(self.tracks))


def shape_dissimilarity(a: ShapeToken, b: ShapeToken) -> float:
    """Bounding-box disagreement in [0, 1].

    One minus the IoU of the axis-aligned extent boxes.  When either box
    is degenerate (zero volume), falls back to a smooth distance between
    the box centers so thin objects still compare usefully.
    """
    lo_a = np.array([ax.min for ax in a.axes])
    hi_a = np.array([ax.max for ax in a.axes])
    lo_b = np.array([ax.min for ax in b.axes])
    hi_b = np.array([ax.max for ax in b.axes])
    vol_a = float(np.prod(hi_a - lo_a))
    vol_b = float(np.prod(hi_b - lo_b))
    if vol_a <= 0 or vol_b <= 0:
        centers = np.linalg.norm((lo_a + hi_a) / 2 - (lo_b + hi_b) / 2)
        return float(1.0 - np.exp(-centers))
    overlap = np.minimum(hi_a, hi_b) - np.maximum(lo_a, lo_b)
    if np.any(overlap <= 0):
        return 1.0
    inter = float(np.prod(overlap))
    return 1.0 - inter / (vol_a + vol_b - inter)


def _color_histogram(step: ObjectTokenSet) -> np.ndarray | None:
    """Joint RGB histogram over all patch pixels, L2-normalized."""
    chunks = [
        p.patch.reshape(-1, 3)
        for p in step.patches
        if p.patch is not None and p.patch.size
    ]
    if not chunks:
        return None
    pixels = np.concatenate(chunks)
    scaled = (pixels.astype(np.int64) * _HIST_BINS) // 256
    flat = (scaled[:, 0] * _HIST_BINS + scaled[:, 1]) * _HIST_BINS + scaled[:, 2]
    hist = np.bincount(flat, minlength=_HIST_BINS**3).astype(np.float64)
    norm = np.linalg.norm(hist)
    return hist / norm if norm > 0 else None


def appearance_dissimilarity(a: ObjectTokenSet, b: ObjectTokenSet) -> float:
    """Cosine distance between joint color histograms, in [0, 1].

    Objects without image patches get a neutral 0.5 so geometry still
    drives the match.
    """
    ha = _color_histogram(a)
    hb = _color_histogram(b)
    if ha is None or hb is None:
        return 0.5
    cos = float(np.clip(ha @ hb, 0.0, 1.0))
    return 1.0 - cos


def association_cost(
    track: Track, step: ObjectTokenSet, params: AssociationParams
) -> float:
    """Blended dissimilarity between a live track and a fresh object.

    Distance above the hard gate returns the worst cost 1.0 outright.
    """
    prev = track.last_step
    dist = float(
        np.linalg.norm(prev.centroid.as_array() - step.centroid.as_array())
    )
    if dist > params.max_match_distance_m:
        return 1.0
    total = params.distance_weight + params.shape_weight + params.appearance_weight
    cost = (
        params.distance_weight * (dist / params.max_match_distance_m)
        + params.shape_weight * shape_dissimilarity(prev.shape, step.shape)
        + params.appearance_weight * appearance_dissimilarity(prev, step)
    )
    return cost / total


@dataclass
class AssociationOutcome:
    """What one frame of association did to the store."""

    matched: list[tuple[int, ObjectTokenSet]]
    born: list[int]
    terminated: list[int]


def _canonical_order(steps: list[ObjectTokenSet]) -> list[ObjectTokenSet]:
    return sorted(
        steps,
        key=lambda s: (
            s.centroid.x,
            s.centroid.y,
            s.centroid.z,
            s.n_points,
            s.object_id,
        ),
    )


def associate(
    store: TrackStore,
    steps: list[ObjectTokenSet],
    timestamp: float,
    params: AssociationParams | None = None,
) -> AssociationOutcome:
    """Fold one frame's accepted objects into the track store.

    Matched steps are appended to their track with the track's id and a
    lifetime token running from the track's birth to this frame.  Leftover
    steps open new tracks.  Active tracks that miss more frames than the
    allowed gap are terminated.
    """
    params = params or AssociationParams()
    active = store.active()
    ordered = _canonical_order(list(steps))
    cost = np.zeros((len(active), len(ordered)))
    for i, track in enumerate(active):
        for j, step in enumerate(ordered):
            cost[i, j] = association_cost(track, step, params)
    match = hungarian_match(cost, gate_threshold=params.gate_threshold)
    matched_tracks = {i for i, _ in match.pairs}
    matched_steps = {j for _, j in match.pairs}
    outcome = AssociationOutcome(matched=[], born=[], terminated=[])
    for i, j in match.pairs:
        track = active[i]
        step = _adopt(ordered[j], track, timestamp)
        track.steps.append(step)
        track.missed_frames = 0
        outcome.matched.append((track.object_id, step))
    for j, step in enumerate(ordered):
        if j in matched_steps:
            continue
        track = store.new_track(birth_time=timestamp)
        adopted = _adopt(step, track, timestamp)
        track.steps.append(adopted)
        outcome.born.append(track.object_id)
    for i, track in enumerate(active):
        if i in matched_tracks:
            continue
        track.missed_frames += 1
        if track.missed_frames > params.max_gap_frames:
            track.status = "terminated"
            outcome.terminated.append(track.object_id)
    return outcome


def _adopt(step: ObjectTokenSet, track: Track, timestamp: float) -> ObjectTokenSet:
    renamed = with_object_id(step, track.object_id)
    return with_temporal(renamed, track.birth_time, timestamp)


def window_prune(store: TrackStore, now: float, horizon_seconds: float) -> list[int]:
    """Drop steps older than the horizon; returns ids of removed tracks.

    A track whose steps all fall outside the window leaves the store
    entirely.  Ids are never reused.
    """
    if horizon_seconds <= 0:
        raise ValueError("horizon_seconds must be positive")
    cutoff = now - horizon_seconds
    removed = []
    for object_id in sorted(store.tracks):
        track = store.tracks[object_id]
        track.steps = [s for s in track.steps if s.timestamp > cutoff]
        if not track.steps:
            removed.append(object_id)
            del store.tracks[object_id]
    return removed

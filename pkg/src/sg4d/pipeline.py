"""End-to-end processing: frames in, one queryable 4-D structure out.

Each frame flows through pose lookup, object discovery, temporal
association, and graph construction; a sliding window measured in frames
(converted to seconds via the observed median frame period) bounds how
much history the result keeps.  The final structure holds the surviving
window: its frame graphs, its tracks with per-frame tokens, and the ego
trajectory, all expressed in the configured anchor frame.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .config import PipelineConfig
from .errors import MalformedFrame
from .graph import (
    EgoSample,
    PoseProvider,
    SceneGraph4D,
    SceneGraphFrame,
    assemble_4dsg,
    build_frame_graph,
)
from .refinement import Rejection, refine_frame
from .sceneio import Frame
from .segbackends import SegmentationBackend
from .tokens import ObjectTokenSet
from .tracking import TrackStore, associate, window_prune

__all__ = [
    "FrameReport",
    "PipelineResult",
    "horizon_seconds",
    "run_pipeline",
]


@dataclass(frozen=True)
class FrameReport:
    """What one frame contributed, plus stage timings in seconds."""

    frame_index: int
    timestamp: float
    n_points: int
    n_accepted: int
    n_rejected: int
    n_born: int
    n_terminated: int
    n_unmapped: int
    timings: dict[str, float] = field(default_factory=dict)


@dataclass
class PipelineResult:
    graph: SceneGraph4D
    reports: list[FrameReport]
    rejections: list[Rejection]


def horizon_seconds(timestamps: list[float], window_frames: int) -> float | None:
    """Window length in seconds: frame count times the median frame period.

    Needs at least two timestamps to know the frame rate; returns None
    until then, meaning no pruning yet.
    """
    if len(timestamps) < 2:
        return None
    periods = np.diff(np.asarray(timestamps, np.float64))
    return float(window_frames * np.median(periods))


def run_pipeline(
    frames: Iterable[Frame],
    backend: SegmentationBackend,
    config: PipelineConfig | None = None,
    pose_provider: PoseProvider | None = None,
) -> PipelineResult:
    """Process a frame sequence into one unified scene structure."""
    config = config or PipelineConfig()
    store = TrackStore()
    graph_frames: list[SceneGraphFrame] = []
    ego_samples: list[EgoSample] = []
    reports: list[FrameReport] = []
    rejections: list[Rejection] = []
    timestamps: list[float] = []
    anchor_from_world: np.ndarray | None = None

    def history(step: ObjectTokenSet):
        best = None
        best_dist = float("inf")
        target = step.centroid.as_array()
        for track in store.active():
            last = track.last_step
            dist = float(np.linalg.norm(last.centroid.as_array() - target))
            if dist < best_dist:
                best_dist = dist
                best = (last.centroid.as_array(), last.timestamp)
        if best is None or best_dist > config.association.max_match_distance_m:
            return None
        return best

    for frame_index, frame in enumerate(frames):
        if timestamps and frame.timestamp <= timestamps[-1]:
            raise MalformedFrame(
                f"frame {frame_index} timestamp {frame.timestamp} does not "
                f"advance past {timestamps[-1]}"
            )
        timings: dict[str, float] = {}
        started = time.perf_counter()
        pose = (
            pose_provider.pose_at(frame.timestamp)
            if pose_provider is not None
            else frame.ego_pose
        )
        pose = np.asarray(pose, np.float64)
        if config.anchor == "first-frame":
            if anchor_from_world is None:
                anchor_from_world = np.linalg.inv(pose)
            pose = anchor_from_world @ pose
        timings["pose"] = time.perf_counter() - started

        started = time.perf_counter()
        state = refine_frame(
            frame,
            backend,
            params=config.refine,
            rules=config.rules,
            world_from_sensor=pose,
            history=history,
            frame_index=frame_index,
        )
        rejections.extend(state.rejections)
        timings["refine"] = time.perf_counter() - started

        started = time.perf_counter()
        outcome = associate(
            store, state.accepted, frame.timestamp, config.association
        )
        adopted = [step for _, step in outcome.matched] + [
            store.tracks[object_id].last_step for object_id in outcome.born
        ]
        timings["associate"] = time.perf_counter() - started

        started = time.perf_counter()
        graph_frames.append(
            build_frame_graph(adopted, pose, config.graph)
            if adopted
            else SceneGraphFrame(timestamp=frame.timestamp, nodes=(), edges=())
        )
        ego_samples.append(EgoSample(timestamp=frame.timestamp, pose=pose))
        timings["graph"] = time.perf_counter() - started

        timestamps.append(frame.timestamp)
        started = time.perf_counter()
        if config.window_frames is not None:
            horizon = horizon_seconds(timestamps, config.window_frames)
            if horizon is not None:
                window_prune(store, frame.timestamp, horizon)
                cutoff = frame.timestamp - horizon
                graph_frames = [f for f in graph_frames if f.timestamp > cutoff]
                ego_samples = [s for s in ego_samples if s.timestamp > cutoff]
        timings["prune"] = time.perf_counter() - started

        reports.append(
            FrameReport(
                frame_index=frame_index,
                timestamp=frame.timestamp,
                n_points=frame.n_points,
                n_accepted=len(state.accepted),
                n_rejected=len(state.rejections),
                n_born=len(outcome.born),
                n_terminated=len(outcome.terminated),
                n_unmapped=int(state.unmapped.size),
                timings=timings,
            )
        )

    graph = assemble_4dsg(
        graph_frames, list(store), ego_samples, anchor=config.anchor
    )
    return PipelineResult(graph=graph, reports=reports, rejections=rejections)

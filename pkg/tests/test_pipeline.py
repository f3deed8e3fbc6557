"""Tests for the end-to-end frame processing loop."""

from __future__ import annotations

import numpy as np
import pytest

from sg4d.clustering import ClusterParams
from sg4d.config import PipelineConfig, config_from_dict
from sg4d.errors import MalformedFrame
from sg4d.graph import ManifestPoseProvider, serialize_4dsg
from sg4d.pipeline import horizon_seconds, run_pipeline
from sg4d.refinement import RefineParams
from sg4d.sceneio import Frame, load_frame, load_manifest
from sg4d.segbackends import OracleBackend
from sg4d.synth import (
    GroundSpec,
    ObjectSpec,
    ScenarioSpec,
    forward_camera,
    generate,
    load_ground_truth,
)

CONFIG = PipelineConfig(
    refine=RefineParams(
        cluster=ClusterParams(min_cluster_size=8, min_samples=4), seed=5
    )
)


def _build_scene(tmp_path, objects, frame_count=6, rate_hz=2.0, ego=None, seed=11):
    spec = ScenarioSpec(
        name="pipe",
        seed=seed,
        frame_count=frame_count,
        rate_hz=rate_hz,
        objects=objects,
        cameras=(forward_camera("front"),),
        ego_waypoints=ego or ((0.0, 0.0, 0.0, 0.0, 0.0),),
        ground=GroundSpec(enabled=False),
    )
    generate(spec, tmp_path)
    manifest = load_manifest(tmp_path)
    frames = [load_frame(tmp_path / name) for name in manifest.frames]
    return spec, frames, load_ground_truth(tmp_path)


def _two_objects():
    return (
        ObjectSpec(
            name="mover",
            class_name="cart",
            size=(1.0, 0.8, 0.9),
            waypoints=((0.0, 5.0, -1.5, 0.45), (2.5, 8.0, -1.5, 0.45)),
        ),
        ObjectSpec(
            name="ball",
            class_name="ball",
            shape="sphere",
            radius=0.6,
            waypoints=((0.0, 5.0, 2.0, 0.8),),
        ),
    )


class TestTracking:
    def test_identities_persist_across_frames(self, tmp_path):
        spec, frames, truth = _build_scene(tmp_path, _two_objects())
        result = run_pipeline(frames, OracleBackend(truth), CONFIG)
        assert len(result.graph.tracks) == 2
        for track in result.graph.tracks:
            assert track.status == "active"
            assert len(track.steps) == len(frames)

    def test_centroids_follow_truth(self, tmp_path):
        spec, frames, truth = _build_scene(tmp_path, _two_objects())
        result = run_pipeline(frames, OracleBackend(truth), CONFIG)
        # match each track to the truth instance nearest its first step
        first = truth.frames[0]
        for track in result.graph.tracks:
            origin = track.steps[0].centroid.as_array()
            instance = min(
                first.centers,
                key=lambda i: np.linalg.norm(first.centers[i] - origin),
            )
            for step in track.steps:
                center = truth.frame_at(step.timestamp).centers[instance]
                got = step.centroid.as_array()
                assert np.linalg.norm(got[:2] - center[:2]) < 0.25
                assert abs(got[2] - center[2]) < 0.4

    def test_no_identity_switches(self, tmp_path):
        spec, frames, truth = _build_scene(tmp_path, _two_objects())
        result = run_pipeline(frames, OracleBackend(truth), CONFIG)
        first = truth.frames[0]
        for track in result.graph.tracks:
            owners = set()
            for step in track.steps:
                ft = truth.frame_at(step.timestamp)
                center = step.centroid.as_array()
                owners.add(
                    min(
                        ft.centers,
                        key=lambda i: np.linalg.norm(ft.centers[i] - center),
                    )
                )
            assert len(owners) == 1

    def test_deterministic_output_bytes(self, tmp_path):
        spec, frames, truth = _build_scene(tmp_path, _two_objects())
        first = serialize_4dsg(
            run_pipeline(frames, OracleBackend(truth), CONFIG).graph,
            inline_patches=True,
        )
        second = serialize_4dsg(
            run_pipeline(frames, OracleBackend(truth), CONFIG).graph,
            inline_patches=True,
        )
        assert first == second


class TestWindow:
    def test_horizon_from_median_period(self):
        assert horizon_seconds([0.0, 0.5, 1.0], 10) == pytest.approx(5.0)
        assert horizon_seconds([0.0], 10) is None
        assert horizon_seconds([], 4) is None

    def test_only_final_window_survives(self, tmp_path):
        config = PipelineConfig(
            refine=CONFIG.refine, window_frames=4
        )
        spec, frames, truth = _build_scene(
            tmp_path, _two_objects(), frame_count=10
        )
        result = run_pipeline(frames, OracleBackend(truth), config)
        kept = [f.timestamp for f in result.graph.frames]
        assert kept == [t for t in spec.timestamps() if t > 4.5 - 2.0]
        assert len(kept) == 4
        assert result.graph.window_start == kept[0]
        assert result.graph.window_end == kept[-1]
        assert [s.timestamp for s in result.graph.ego] == kept
        for track in result.graph.tracks:
            for step in track.steps:
                assert step.timestamp in kept

    def test_unbounded_window_keeps_everything(self, tmp_path):
        config = PipelineConfig(refine=CONFIG.refine, window_frames=None)
        spec, frames, truth = _build_scene(
            tmp_path, _two_objects(), frame_count=10
        )
        result = run_pipeline(frames, OracleBackend(truth), config)
        assert len(result.graph.frames) == 10
        assert all(len(t.steps) == 10 for t in result.graph.tracks)


class TestAnchors:
    EGO = ((0.0, 2.0, 1.0, 0.0, 90.0), (2.5, 2.0, 4.0, 0.0, 90.0))

    def test_first_frame_anchor_relative_to_start(self, tmp_path):
        spec, frames, truth = _build_scene(
            tmp_path,
            (
                ObjectSpec(
                    name="post",
                    class_name="post",
                    size=(0.6, 0.6, 1.8),
                    waypoints=((0.0, 2.0, 6.0, 0.9),),
                ),
            ),
            ego=self.EGO,
        )
        result = run_pipeline(frames, OracleBackend(truth), CONFIG)
        start_pose = np.asarray(result.graph.ego[0].pose)
        np.testing.assert_allclose(start_pose, np.eye(4), atol=1e-9)
        expected = np.linalg.inv(spec.ego_pose_at(0.0)) @ np.array([2.0, 6.0, 0.9, 1.0])
        (track,) = result.graph.tracks
        centers = np.array([s.centroid.as_array() for s in track.steps])
        assert np.linalg.norm(centers.mean(0) - expected[:3]) < 0.45
        assert centers.std(0).max() < 0.15

    def test_world_anchor_keeps_recorded_frame(self, tmp_path):
        config = PipelineConfig(refine=CONFIG.refine, anchor="world")
        spec, frames, truth = _build_scene(
            tmp_path,
            (
                ObjectSpec(
                    name="post",
                    class_name="post",
                    size=(0.6, 0.6, 1.8),
                    waypoints=((0.0, 2.0, 6.0, 0.9),),
                ),
            ),
            ego=self.EGO,
        )
        result = run_pipeline(frames, OracleBackend(truth), config)
        np.testing.assert_allclose(
            np.asarray(result.graph.ego[0].pose), spec.ego_pose_at(0.0), atol=1e-9
        )
        (track,) = result.graph.tracks
        centers = np.array([s.centroid.as_array() for s in track.steps])
        assert np.linalg.norm(centers.mean(0) - np.array([2.0, 6.0, 0.9])) < 0.45
        assert centers.std(0).max() < 0.15

    def test_pose_provider_overrides_frame_pose(self, tmp_path):
        config = PipelineConfig(refine=CONFIG.refine, anchor="world")
        spec, frames, truth = _build_scene(
            tmp_path,
            (
                ObjectSpec(
                    name="post",
                    class_name="post",
                    size=(0.6, 0.6, 1.8),
                    waypoints=((0.0, 2.0, 6.0, 0.9),),
                ),
            ),
            ego=self.EGO,
        )
        stripped = [
            Frame(
                timestamp=f.timestamp,
                points=f.points,
                cameras=f.cameras,
                ego_pose=np.eye(4),
            )
            for f in frames
        ]
        provider = ManifestPoseProvider(
            [(f.timestamp, f.ego_pose) for f in frames]
        )
        result = run_pipeline(stripped, OracleBackend(truth), config, provider)
        (track,) = result.graph.tracks
        centers = np.array([s.centroid.as_array() for s in track.steps])
        assert np.linalg.norm(centers.mean(0) - np.array([2.0, 6.0, 0.9])) < 0.45


class TestRobustness:
    def test_non_advancing_timestamp_rejected(self, tmp_path):
        spec, frames, truth = _build_scene(
            tmp_path, _two_objects(), frame_count=3
        )
        shuffled = [frames[0], frames[2], frames[1]]
        with pytest.raises(MalformedFrame, match="does not advance"):
            run_pipeline(shuffled, OracleBackend(truth), CONFIG)

    def test_scene_with_nothing_to_find(self, tmp_path):
        spec = ScenarioSpec(
            name="floor",
            seed=3,
            frame_count=3,
            rate_hz=2.0,
            objects=(),
            cameras=(forward_camera("front"),),
            ground=GroundSpec(enabled=True, extent=10.0),
        )
        generate(spec, tmp_path)
        manifest = load_manifest(tmp_path)
        frames = [load_frame(tmp_path / name) for name in manifest.frames]
        result = run_pipeline(frames, OracleBackend(load_ground_truth(tmp_path)), CONFIG)
        assert result.graph.tracks == ()
        assert len(result.graph.frames) == 3
        assert all(f.nodes == () for f in result.graph.frames)

    def test_implausible_object_reported(self, tmp_path):
        spec, frames, truth = _build_scene(
            tmp_path,
            (
                ObjectSpec(
                    name="wall",
                    class_name="wall",
                    size=(60.0, 1.0, 2.0),
                    waypoints=((0.0, 10.0, 0.0, 1.0),),
                ),
            ),
            frame_count=2,
        )
        result = run_pipeline(frames, OracleBackend(truth), CONFIG)
        assert result.graph.tracks == ()
        assert result.rejections
        assert {r.rule_id for r in result.rejections} == {"max_extent"}

    def test_reports_cover_every_frame(self, tmp_path):
        spec, frames, truth = _build_scene(tmp_path, _two_objects(), frame_count=4)
        result = run_pipeline(frames, OracleBackend(truth), CONFIG)
        assert [r.frame_index for r in result.reports] == [0, 1, 2, 3]
        for report, frame in zip(result.reports, frames):
            assert report.timestamp == frame.timestamp
            assert report.n_points == frame.n_points
            assert report.n_accepted == 2
            assert set(report.timings) >= {"pose", "refine", "associate", "graph"}
        assert result.reports[0].n_born == 2
        assert sum(r.n_born for r in result.reports) == 2

"""Tests for the synthetic scene generator."""

from __future__ import annotations

import numpy as np
import pytest

from sg4d.errors import ConfigError, ManifestError
from sg4d.sceneio import load_frame, load_manifest
from sg4d.synth import (
    CameraSpec,
    GroundSpec,
    GroundTruth,
    NoiseSpec,
    ObjectSpec,
    ScenarioSpec,
    forward_camera,
    generate,
    load_ground_truth,
    scenario_from_dict,
    scenario_to_dict,
)


def _basic_spec(**overrides) -> ScenarioSpec:
    defaults = dict(
        name="basic",
        seed=5,
        frame_count=3,
        rate_hz=2.0,
        objects=(
            ObjectSpec(
                name="crate",
                class_name="crate",
                shape="box",
                size=(1.5, 1.0, 0.8),
                waypoints=((0.0, 6.0, -1.0, 0.4), (1.0, 8.0, -1.0, 0.4)),
            ),
            ObjectSpec(
                name="ball",
                class_name="ball",
                shape="sphere",
                radius=0.7,
                waypoints=((0.0, 5.0, 1.5, 0.7),),
            ),
        ),
        cameras=(forward_camera("front"),),
        ego_waypoints=((0.0, 0.0, 0.0, 0.0, 0.0),),
        ground=GroundSpec(enabled=False),
    )
    defaults.update(overrides)
    return ScenarioSpec(**defaults)


def test_generate_roundtrip_layout(tmp_path):
    spec = _basic_spec()
    manifest_path, truth = generate(spec, tmp_path)
    manifest = load_manifest(manifest_path)
    assert manifest.n_frames == 3
    frames = [load_frame(tmp_path / name) for name in manifest.frames]
    assert [f.timestamp for f in frames] == [0.0, 0.5, 1.0]
    for frame, ft in zip(frames, truth.frames):
        assert frame.n_points == len(ft.instance_ids)
        assert frame.cameras[0].camera_id == "front"
        assert frame.cameras[0].image.shape == (120, 160, 3)


def test_ground_truth_loads_back(tmp_path):
    spec = _basic_spec()
    _, truth = generate(spec, tmp_path)
    loaded = load_ground_truth(tmp_path)
    assert loaded.classes == truth.classes
    assert loaded.object_classes == truth.object_classes
    assert loaded.rate_hz == truth.rate_hz
    for a, b in zip(truth.frames, loaded.frames):
        assert a.timestamp == b.timestamp
        assert np.array_equal(a.instance_ids, b.instance_ids)
        assert np.array_equal(a.class_ids, b.class_ids)
        for cam in a.instance_maps:
            assert np.array_equal(a.instance_maps[cam], b.instance_maps[cam])


def test_box_points_lie_on_surface(tmp_path):
    spec = _basic_spec()
    _, truth = generate(spec, tmp_path)
    manifest = load_manifest(tmp_path)
    frame = load_frame(tmp_path / manifest.frames[0])
    ft = truth.frames[0]
    box_points = frame.points[ft.instance_ids == 0].astype(np.float64)
    center = np.asarray(ft.centers[0])
    half = np.asarray(spec.objects[0].half_extent)
    local = np.abs(box_points - center)
    # inside the box everywhere, and touching a face on some axis
    assert np.all(local <= half + 1e-4)
    face_gap = np.min(half - local, axis=1)
    assert np.all(face_gap <= 1e-4)


def test_sphere_points_lie_on_surface(tmp_path):
    spec = _basic_spec()
    _, truth = generate(spec, tmp_path)
    manifest = load_manifest(tmp_path)
    frame = load_frame(tmp_path / manifest.frames[0])
    ft = truth.frames[0]
    pts = frame.points[ft.instance_ids == 1].astype(np.float64)
    center = np.asarray(ft.centers[1])
    radii = np.linalg.norm(pts - center, axis=1)
    assert np.allclose(radii, spec.objects[1].radius, atol=1e-4)


def test_waypoint_motion_moves_centers(tmp_path):
    spec = _basic_spec()
    _, truth = generate(spec, tmp_path)
    c0 = np.asarray(truth.frames[0].centers[0])
    c1 = np.asarray(truth.frames[1].centers[0])
    c2 = np.asarray(truth.frames[2].centers[0])
    # 2 m/s along x at 2 Hz, clamped after the last waypoint
    assert np.allclose(c1 - c0, [1.0, 0.0, 0.0], atol=1e-9)
    assert np.allclose(c2, [8.0, -1.0, 0.4], atol=1e-9)
    assert np.allclose(np.asarray(truth.frames[2].centers[1]), [5.0, 1.5, 0.7])


def test_generation_is_deterministic(tmp_path):
    spec = _basic_spec()
    a_dir, b_dir = tmp_path / "a", tmp_path / "b"
    generate(spec, a_dir)
    generate(spec, b_dir)
    for name in load_manifest(a_dir).frames:
        cloud_a = (a_dir / name / "cloud.bin").read_bytes()
        cloud_b = (b_dir / name / "cloud.bin").read_bytes()
        assert cloud_a == cloud_b


def test_noise_and_dropout_applied(tmp_path):
    clean_spec = _basic_spec()
    noisy_spec = _basic_spec(noise=NoiseSpec(sigma=0.05, dropout=0.3))
    generate(clean_spec, tmp_path / "clean")
    _, noisy_truth = generate(noisy_spec, tmp_path / "noisy")
    clean = load_frame(tmp_path / "clean" / "frame_000000")
    noisy = load_frame(tmp_path / "noisy" / "frame_000000")
    assert noisy.n_points < clean.n_points
    assert noisy.n_points == len(noisy_truth.frames[0].instance_ids)
    kept_ratio = noisy.n_points / clean.n_points
    assert 0.55 < kept_ratio < 0.85


def test_ego_motion_transforms_cloud(tmp_path):
    spec = _basic_spec(
        ego_waypoints=((0.0, 0.0, 0.0, 0.0, 0.0), (1.0, 2.0, 0.0, 0.0, 90.0)),
        frame_count=3,
    )
    _, truth = generate(spec, tmp_path)
    manifest = load_manifest(tmp_path)
    f0 = load_frame(tmp_path / manifest.frames[0])
    f2 = load_frame(tmp_path / manifest.frames[2])
    # frame 2: ego at (2, 0, 0) yawed 90 deg left; the static ball sits at
    # world (5, 1.5, 0.7) which lands at sensor (1.5, -3, 0.7)
    ball0 = f0.points[truth.frames[0].instance_ids == 1].mean(axis=0)
    ball2 = f2.points[truth.frames[2].instance_ids == 1].mean(axis=0)
    assert np.allclose(ball0, [5.0, 1.5, 0.7], atol=0.05)
    assert np.allclose(ball2, [1.5, -3.0, 0.7], atol=0.05)
    world2 = truth.frames[2]
    assert np.allclose(
        spec.ego_pose_at(1.0)[:3, 3], [2.0, 0.0, 0.0], atol=1e-9
    )


def test_instance_maps_match_points(tmp_path):
    """Rendered silhouettes agree with projected labeled points."""
    from sg4d.geometry import project_points

    spec = _basic_spec()
    _, truth = generate(spec, tmp_path)
    manifest = load_manifest(tmp_path)
    frame = load_frame(tmp_path / manifest.frames[0])
    ft = truth.frames[0]
    inst_map = ft.instance_maps["front"]
    proj = project_points(frame.points, frame.cameras[0])
    for instance in (0, 1):
        sel = (ft.instance_ids == instance) & proj.visible
        rows = proj.pixel_rows[sel]
        cols = proj.pixel_cols[sel]
        rendered = inst_map[rows, cols]
        # surface points either land on their own silhouette or are
        # occluded by a nearer surface; a pixel off by one at the rim is
        # tolerated by voting, not demanded here
        hit = (rendered == instance).mean()
        assert hit > 0.6
        assert (inst_map == instance).sum() > 0


def test_ground_adds_labeled_floor(tmp_path):
    spec = _basic_spec(ground=GroundSpec(enabled=True, extent=10.0, spacing=1.0))
    _, truth = generate(spec, tmp_path)
    ft = truth.frames[0]
    assert (ft.instance_ids == -1).sum() > 50
    ground_class = {v: k for k, v in truth.classes.items()}["ground"]
    assert np.all(ft.class_ids[ft.instance_ids == -1] == ground_class)


def test_frame_at_tolerance():
    spec = _basic_spec()
    import tempfile

    with tempfile.TemporaryDirectory() as d:
        _, truth = generate(spec, d)
    assert truth.frame_at(0.5).timestamp == 0.5
    assert truth.frame_at(0.5 + 1e-7).timestamp == 0.5
    with pytest.raises(ManifestError):
        truth.frame_at(0.25)


def test_scenario_dict_roundtrip():
    spec = _basic_spec(
        cameras=(forward_camera("front"), forward_camera("left", yaw_deg=90.0)),
        noise=NoiseSpec(sigma=0.01, dropout=0.1),
    )
    doc = scenario_to_dict(spec)
    back = scenario_from_dict(doc)
    assert back == spec
    assert scenario_to_dict(back) == doc


def test_scenario_from_dict_rejects_garbage():
    minimal = scenario_from_dict({"name": "x"})
    assert minimal.name == "x" and len(minimal.objects) == 0
    good = scenario_to_dict(_basic_spec())
    bad = dict(good)
    bad["objects"] = [{"name": "a", "shape": "cone"}]
    with pytest.raises(ConfigError):
        scenario_from_dict(bad)
    bad_shape = dict(good)
    bad_shape["objects"] = [
        {
            "name": "a",
            "class_name": "a",
            "shape": "cone",
            "waypoints": [[0, 0, 0, 0]],
        }
    ]
    with pytest.raises(ConfigError):
        scenario_from_dict(bad_shape)

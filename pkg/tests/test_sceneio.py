"""Frame containers and sequence directory round-trips."""

import json

import numpy as np
import pytest

from sg4d.errors import (
    CalibrationInvalid,
    EmptyCloudWarning,
    MalformedFrame,
    ManifestError,
)
from sg4d.sceneio import (
    CameraView,
    Frame,
    SequenceManifest,
    load_frame,
    load_manifest,
    save_frame,
    save_manifest,
    validate_sequence,
)


def _intrinsics(fx=100.0, fy=100.0, cx=32.0, cy=24.0):
    return np.array([[fx, 0, cx], [0, fy, cy], [0, 0, 1]], np.float64)


def _view(camera_id="cam0", extrinsics=None, shape=(48, 64)):
    rng = np.random.default_rng(hash(camera_id) % 2**32)
    image = rng.integers(0, 256, size=(*shape, 3), dtype=np.uint8)
    return CameraView(
        camera_id=camera_id,
        image=image,
        intrinsics=_intrinsics(),
        extrinsics=np.eye(4) if extrinsics is None else extrinsics,
    )


def _frame(t=0.0, n=50, cameras=None):
    rng = np.random.default_rng(1)
    return Frame(
        timestamp=t,
        points=rng.normal(size=(n, 3)).astype(np.float32),
        cameras=cameras or (_view(),),
        ego_pose=np.eye(4),
    )


def test_frame_round_trip(tmp_path):
    rot = np.eye(4)
    rot[:3, :3] = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]], float)
    rot[:3, 3] = (0.1, -0.2, 0.3)
    frame = _frame(t=1.5, cameras=(_view("left"), _view("right", extrinsics=rot)))
    save_frame(frame, tmp_path / "frame_0")
    loaded = load_frame(tmp_path / "frame_0")
    assert loaded.timestamp == frame.timestamp
    assert np.array_equal(loaded.points, frame.points)
    assert [c.camera_id for c in loaded.cameras] == ["left", "right"]
    for orig, back in zip(frame.cameras, loaded.cameras):
        assert np.array_equal(orig.image, back.image)
        assert np.array_equal(orig.intrinsics, back.intrinsics)
        assert np.array_equal(orig.extrinsics, back.extrinsics)
    assert np.array_equal(loaded.ego_pose, frame.ego_pose)


def test_cloud_bin_is_plain_float32(tmp_path):
    frame = _frame(n=3)
    save_frame(frame, tmp_path)
    raw = (tmp_path / "cloud.bin").read_bytes()
    assert len(raw) == 3 * 3 * 4
    assert np.array_equal(
        np.frombuffer(raw, "<f4").reshape(-1, 3), frame.points
    )


def test_empty_cloud_warns():
    with pytest.warns(EmptyCloudWarning):
        frame = _frame(n=0)
    assert frame.n_points == 0


def test_frame_rejects_bad_inputs():
    with pytest.raises(MalformedFrame):
        _frame(t=float("nan"))
    with pytest.raises(MalformedFrame):
        Frame(
            timestamp=0.0,
            points=np.full((4, 3), np.nan, np.float32),
            cameras=(_view(),),
            ego_pose=np.eye(4),
        )
    with pytest.raises(MalformedFrame):
        Frame(
            timestamp=0.0,
            points=np.zeros((4, 2), np.float32),
            cameras=(_view(),),
            ego_pose=np.eye(4),
        )
    with pytest.raises(MalformedFrame):
        Frame(
            timestamp=0.0,
            points=np.zeros((4, 3), np.float32),
            cameras=(),
            ego_pose=np.eye(4),
        )
    with pytest.raises(MalformedFrame):
        Frame(
            timestamp=0.0,
            points=np.zeros((1, 3), np.float32),
            cameras=(_view("a"), _view("a")),
            ego_pose=np.eye(4),
        )


def test_calibration_validation():
    bad_rot = np.eye(4)
    bad_rot[0, 0] = 2.0
    with pytest.raises(CalibrationInvalid):
        _view(extrinsics=bad_rot)
    with pytest.raises(CalibrationInvalid):
        CameraView(
            camera_id="c",
            image=np.zeros((4, 4, 3), np.uint8),
            intrinsics=np.array([[0, 0, 1], [0, 1, 1], [0, 0, 1]], float),
            extrinsics=np.eye(4),
        )
    bad_pose = np.eye(4)
    bad_pose[3, 0] = 1.0
    with pytest.raises(CalibrationInvalid):
        Frame(
            timestamp=0.0,
            points=np.zeros((1, 3), np.float32),
            cameras=(_view(),),
            ego_pose=bad_pose,
        )


def test_frame_arrays_frozen():
    frame = _frame()
    with pytest.raises(ValueError):
        frame.points[0, 0] = 1.0
    with pytest.raises(ValueError):
        frame.cameras[0].image[0, 0, 0] = 1


def test_manifest_round_trip(tmp_path):
    manifest = SequenceManifest(
        frames=["frame_0", "frame_1"], recalibrated_frames=[1]
    )
    save_manifest(manifest, tmp_path)
    loaded = load_manifest(tmp_path)
    assert loaded.frames == ["frame_0", "frame_1"]
    assert loaded.recalibrated_frames == [1]
    assert loaded.units == "meters"


def test_load_manifest_errors(tmp_path):
    with pytest.raises(ManifestError):
        load_manifest(tmp_path / "nope.json")
    path = tmp_path / "manifest.json"
    path.write_text("{not json")
    with pytest.raises(ManifestError):
        load_manifest(path)
    path.write_text(json.dumps({"frames": "frame_0"}))
    with pytest.raises(ManifestError):
        load_manifest(path)


def _write_sequence(tmp_path, timestamps, intrinsics_by_frame=None):
    names = []
    for i, t in enumerate(timestamps):
        view = _view()
        if intrinsics_by_frame and i in intrinsics_by_frame:
            view = CameraView(
                camera_id="cam0",
                image=view.image,
                intrinsics=intrinsics_by_frame[i],
                extrinsics=np.eye(4),
            )
        frame = Frame(
            timestamp=t,
            points=np.zeros((5, 3), np.float32),
            cameras=(view,),
            ego_pose=np.eye(4),
        )
        name = f"frame_{i}"
        save_frame(frame, tmp_path / name)
        names.append(name)
    return names


def test_validate_sequence_clean(tmp_path):
    names = _write_sequence(tmp_path, [0.0, 1.0, 2.0])
    save_manifest(SequenceManifest(frames=names), tmp_path)
    assert validate_sequence(tmp_path) == []


def test_validate_sequence_warnings(tmp_path):
    names = _write_sequence(
        tmp_path,
        [0.0, 1.0, 0.5],
        intrinsics_by_frame={2: _intrinsics(fx=200.0)},
    )
    save_manifest(SequenceManifest(frames=names, units="feet"), tmp_path)
    warnings = validate_sequence(tmp_path)
    assert any("units" in w for w in warnings)
    assert any("not after previous" in w for w in warnings)
    assert any("calibration" in w for w in warnings)


def test_validate_sequence_recalibration_declared(tmp_path):
    names = _write_sequence(
        tmp_path,
        [0.0, 1.0],
        intrinsics_by_frame={1: _intrinsics(fx=200.0)},
    )
    save_manifest(
        SequenceManifest(frames=names, recalibrated_frames=[1]), tmp_path
    )
    assert validate_sequence(tmp_path) == []

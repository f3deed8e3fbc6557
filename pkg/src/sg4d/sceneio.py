"""Frame containers and the on-disk sequence layout.

A sequence is a directory tree with one subdirectory per frame::

    sequence/
        manifest.json
        frame_000000/
            cloud.bin      little-endian float32 xyz triplets, sensor frame
            cam_left.png   one RGB image per camera
            calib.json     per-camera intrinsics and extrinsics
            pose.json      ego pose for the frame

Conventions, fixed across the package:

* Points are stored in the *sensor* frame of their own timestamp.
* ``CameraView.extrinsics`` maps sensor coordinates to camera coordinates.
* ``Frame.ego_pose`` maps sensor coordinates to world coordinates.
* All matrices are serialized row-major; distances are meters.
"""

from __future__ import annotations

import json
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    CalibrationInvalid,
    EmptyCloudWarning,
    MalformedFrame,
    ManifestError,
)

__all__ = [
    "CameraView",
    "Frame",
    "SequenceManifest",
    "load_frame",
    "save_frame",
    "load_manifest",
    "save_manifest",
    "validate_sequence",
]

_ROTATION_TOL = 1e-6


def _as_matrix(value, shape: tuple[int, int], name: str) -> np.ndarray:
    mat = np.asarray(value, dtype=np.float64)
    if mat.shape != shape:
        raise CalibrationInvalid(f"{name} must have shape {shape}, got {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise CalibrationInvalid(f"{name} contains non-finite values")
    return mat


def check_rigid(transform: np.ndarray, name: str) -> None:
    """Raise unless ``transform`` is a valid 4x4 rigid transform."""
    if transform.shape != (4, 4):
        raise CalibrationInvalid(f"{name} must be 4x4, got {transform.shape}")
    rot = transform[:3, :3]
    err = float(np.abs(rot @ rot.T - np.eye(3)).max())
    if err > _ROTATION_TOL:
        raise CalibrationInvalid(
            f"{name} rotation block is not orthonormal (max error {err:.2e})"
        )
    det = float(np.linalg.det(rot))
    if abs(det - 1.0) > 1e-5:
        raise CalibrationInvalid(f"{name} rotation block has determinant {det:.6f}")
    if not np.allclose(transform[3], (0.0, 0.0, 0.0, 1.0)):
        raise CalibrationInvalid(f"{name} bottom row must be [0, 0, 0, 1]")


@dataclass(frozen=True)
class CameraView:
    """One calibrated camera image.

    Attributes:
        camera_id: Stable camera name, unique within a frame.
        image: RGB ``(H, W, 3)`` uint8 array.
        intrinsics: 3x3 pinhole matrix.
        extrinsics: 4x4 rigid transform taking sensor points to camera points.
    """

    camera_id: str
    image: np.ndarray
    intrinsics: np.ndarray
    extrinsics: np.ndarray

    def __post_init__(self) -> None:
        if not self.camera_id:
            raise CalibrationInvalid("camera_id must be non-empty")
        image = np.asarray(self.image)
        if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
            raise MalformedFrame(
                f"camera {self.camera_id!r} image must be (H, W, 3) uint8, "
                f"got shape {image.shape} dtype {image.dtype}"
            )
        intr = _as_matrix(self.intrinsics, (3, 3), f"{self.camera_id} intrinsics")
        if intr[0, 0] <= 0 or intr[1, 1] <= 0:
            raise CalibrationInvalid(
                f"{self.camera_id} intrinsics need positive focal lengths"
            )
        extr = _as_matrix(self.extrinsics, (4, 4), f"{self.camera_id} extrinsics")
        check_rigid(extr, f"{self.camera_id} extrinsics")
        for arr in (image, intr, extr):
            arr.flags.writeable = False
        object.__setattr__(self, "image", image)
        object.__setattr__(self, "intrinsics", intr)
        object.__setattr__(self, "extrinsics", extr)

    @property
    def resolution(self) -> tuple[int, int]:
        """Image size as ``(height, width)``."""
        return self.image.shape[0], self.image.shape[1]


@dataclass(frozen=True)
class Frame:
    """One synchronized capture: a point cloud plus calibrated images.

    Arrays are frozen after validation so a frame can be shared between
    threads without defensive copies.
    """

    timestamp: float
    points: np.ndarray
    cameras: tuple[CameraView, ...]
    ego_pose: np.ndarray

    def __post_init__(self) -> None:
        if not math.isfinite(self.timestamp):
            raise MalformedFrame("frame timestamp must be finite")
        points = np.asarray(self.points, dtype=np.float32)
        if points.ndim != 2 or points.shape[1] != 3:
            raise MalformedFrame(
                f"points must have shape (N, 3), got {points.shape}"
            )
        if not np.all(np.isfinite(points)):
            raise MalformedFrame("point cloud contains non-finite values")
        cameras = tuple(self.cameras)
        if not cameras:
            raise MalformedFrame("a frame needs at least one camera view")
        ids = [c.camera_id for c in cameras]
        if len(ids) != len(set(ids)):
            raise MalformedFrame(f"duplicate camera ids in frame: {ids}")
        pose = _as_matrix(self.ego_pose, (4, 4), "ego pose")
        check_rigid(pose, "ego pose")
        if points.shape[0] == 0:
            warnings.warn(
                f"frame at t={self.timestamp} has an empty point cloud",
                EmptyCloudWarning,
                stacklevel=2,
            )
        points.flags.writeable = False
        pose.flags.writeable = False
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "cameras", cameras)
        object.__setattr__(self, "ego_pose", pose)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def camera(self, camera_id: str) -> CameraView:
        for view in self.cameras:
            if view.camera_id == camera_id:
                return view
        raise KeyError(camera_id)


@dataclass
class SequenceManifest:
    """Index of a sequence directory.

    ``frames`` lists frame subdirectories relative to the manifest, in
    capture order.  ``recalibrated_frames`` lists frame indices at which a
    calibration change is intentional; silent drift elsewhere is reported by
    :func:`validate_sequence` as a warning.
    """

    frames: list[str]
    units: str = "meters"
    coordinate_convention: str = "sensor-frame"
    recalibrated_frames: list[int] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def n_frames(self) -> int:
        return len(self.frames)


_SAFE_CAMERA_ID = re.compile(r"[^A-Za-z0-9_-]")


def _camera_file_name(camera_id: str) -> str:
    safe = _SAFE_CAMERA_ID.sub("_", camera_id)
    return f"cam_{safe}.png"


def save_frame(frame: Frame, directory: str | Path) -> Path:
    """Write one frame to ``directory`` in the standard layout."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    points = np.ascontiguousarray(frame.points, dtype="<f4")
    (directory / "cloud.bin").write_bytes(points.tobytes())
    calib = {"cameras": {}}
    for view in frame.cameras:
        Image.fromarray(np.asarray(view.image)).save(
            directory / _camera_file_name(view.camera_id)
        )
        calib["cameras"][view.camera_id] = {
            "intrinsics": view.intrinsics.tolist(),
            "extrinsics": view.extrinsics.tolist(),
        }
    (directory / "calib.json").write_text(json.dumps(calib, indent=2, sort_keys=True))
    pose = {"timestamp": frame.timestamp, "pose": frame.ego_pose.tolist()}
    (directory / "pose.json").write_text(json.dumps(pose, indent=2, sort_keys=True))
    return directory


def _load_json(path: Path) -> dict:
    if not path.is_file():
        raise ManifestError(f"missing file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"invalid JSON in {path}: {exc}") from exc


def load_frame(directory: str | Path) -> Frame:
    """Read one frame from a directory written by :func:`save_frame`."""
    directory = Path(directory)
    cloud_path = directory / "cloud.bin"
    if not cloud_path.is_file():
        raise ManifestError(f"missing file: {cloud_path}")
    raw = cloud_path.read_bytes()
    if len(raw) % 12 != 0:
        raise MalformedFrame(
            f"{cloud_path} holds {len(raw)} bytes, not a whole number of "
            "float32 xyz triplets"
        )
    points = np.frombuffer(raw, dtype="<f4").reshape(-1, 3)
    calib = _load_json(directory / "calib.json")
    pose_doc = _load_json(directory / "pose.json")
    cameras = []
    for camera_id in sorted(calib.get("cameras", {})):
        entry = calib["cameras"][camera_id]
        image_path = directory / _camera_file_name(camera_id)
        if not image_path.is_file():
            raise ManifestError(f"missing file: {image_path}")
        with Image.open(image_path) as img:
            image = np.asarray(img.convert("RGB"), dtype=np.uint8)
        cameras.append(
            CameraView(
                camera_id=camera_id,
                image=image,
                intrinsics=np.asarray(entry["intrinsics"], dtype=np.float64),
                extrinsics=np.asarray(entry["extrinsics"], dtype=np.float64),
            )
        )
    if not cameras:
        raise ManifestError(f"{directory / 'calib.json'} declares no cameras")
    return Frame(
        timestamp=float(pose_doc["timestamp"]),
        points=points,
        cameras=tuple(cameras),
        ego_pose=np.asarray(pose_doc["pose"], dtype=np.float64),
    )


def save_manifest(manifest: SequenceManifest, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    doc = {
        "frames": list(manifest.frames),
        "units": manifest.units,
        "coordinate_convention": manifest.coordinate_convention,
        "recalibrated_frames": list(manifest.recalibrated_frames),
    }
    doc.update(manifest.extra)
    path = directory / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    return path


def load_manifest(path: str | Path) -> SequenceManifest:
    """Read ``manifest.json``; ``path`` may be the file or its directory."""
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    doc = _load_json(path)
    frames = doc.get("frames")
    if not isinstance(frames, list) or not all(isinstance(f, str) for f in frames):
        raise ManifestError(f"{path}: 'frames' must be a list of directory names")
    known = {"frames", "units", "coordinate_convention", "recalibrated_frames"}
    return SequenceManifest(
        frames=list(frames),
        units=doc.get("units", "meters"),
        coordinate_convention=doc.get("coordinate_convention", "sensor-frame"),
        recalibrated_frames=[int(i) for i in doc.get("recalibrated_frames", [])],
        extra={k: v for k, v in doc.items() if k not in known},
    )


def validate_sequence(sequence_dir: str | Path) -> list[str]:
    """Check a sequence directory; return human-readable warnings.

    Structural problems (missing files, unreadable frames) raise; soft
    inconsistencies come back as warning strings: non-monotone timestamps,
    calibration drift for a camera without a re-declaration, and unit
    conventions this package does not process.
    """
    sequence_dir = Path(sequence_dir)
    manifest = load_manifest(sequence_dir)
    warnings_out: list[str] = []
    if manifest.units != "meters":
        warnings_out.append(
            f"manifest declares units {manifest.units!r}; distances are "
            "interpreted as meters"
        )
    if manifest.coordinate_convention != "sensor-frame":
        warnings_out.append(
            "manifest declares coordinate_convention "
            f"{manifest.coordinate_convention!r}; expected 'sensor-frame'"
        )
    redeclared = set(manifest.recalibrated_frames)
    last_seen: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    prev_t: float | None = None
    for index, rel in enumerate(manifest.frames):
        frame = load_frame(sequence_dir / rel)
        if prev_t is not None and frame.timestamp <= prev_t:
            warnings_out.append(
                f"frame {index} ({rel}): timestamp {frame.timestamp} is not "
                f"after previous {prev_t}"
            )
        prev_t = frame.timestamp
        for view in frame.cameras:
            prior = last_seen.get(view.camera_id)
            if prior is not None and index not in redeclared:
                same = np.array_equal(prior[0], view.intrinsics) and np.array_equal(
                    prior[1], view.extrinsics
                )
                if not same:
                    warnings_out.append(
                        f"frame {index} ({rel}): calibration of camera "
                        f"{view.camera_id!r} changed without re-declaration"
                    )
            last_seen[view.camera_id] = (view.intrinsics, view.extrinsics)
    return warnings_out

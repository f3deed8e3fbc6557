"""Synthetic scene generator with exact ground truth.

Builds full sequences (clouds, rendered images, calibration, poses) from a
compact scenario description, along with per-point instance and class
labels, per-camera instance maps, and per-frame object centers and
extents.  Rendering is analytic ray casting against boxes and spheres, so
regenerating a scenario reproduces byte-identical files.

Conventions: objects are axis-aligned in the world frame and follow
piecewise-linear waypoint trajectories; the ego sensor yaws about +z.
Clouds are stored in the sensor frame, like every real sequence.
"""

from __future__ import annotations

import colorsys
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError, ManifestError
from .sceneio import CameraView, Frame, SequenceManifest, save_frame, save_manifest

__all__ = [
    "ObjectSpec",
    "CameraSpec",
    "GroundSpec",
    "NoiseSpec",
    "ScenarioSpec",
    "forward_camera",
    "FrameTruth",
    "GroundTruth",
    "generate",
    "load_ground_truth",
    "scenario_from_dict",
    "scenario_to_dict",
]

BACKGROUND_COLOR = (214, 220, 228)
GROUND_CLASS_NAME = "ground"

# camera axes (x right, y down, z forward) expressed against the sensor
# axes (x forward, y left, z up)
_AXES_SENSOR_TO_CAMERA = np.array(
    [[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]]
)


@dataclass(frozen=True)
class ObjectSpec:
    """One rigid scene object.

    ``waypoints`` is a list of (t, x, y, z) rows giving the center
    trajectory; positions clamp to the first/last waypoint outside their
    time range.  Boxes use ``size`` (full extent per axis), spheres use
    ``radius``.
    """

    name: str
    class_name: str
    shape: str = "box"
    size: tuple[float, float, float] = (1.0, 1.0, 1.0)
    radius: float = 0.5
    waypoints: tuple[tuple[float, float, float, float], ...] = ((0.0, 0.0, 0.0, 0.0),)
    surface_density: float = 150.0

    def __post_init__(self) -> None:
        if self.shape not in ("box", "sphere"):
            raise ConfigError(f"unknown object shape {self.shape!r}")
        if not self.waypoints:
            raise ConfigError(f"object {self.name!r} needs at least one waypoint")

    def center_at(self, t: float) -> np.ndarray:
        way = np.asarray(self.waypoints, np.float64)
        return np.array(
            [np.interp(t, way[:, 0], way[:, 1 + d]) for d in range(3)]
        )

    @property
    def half_extent(self) -> np.ndarray:
        if self.shape == "sphere":
            return np.full(3, self.radius)
        return np.asarray(self.size, np.float64) / 2.0


@dataclass(frozen=True)
class CameraSpec:
    camera_id: str
    width: int
    height: int
    intrinsics: tuple
    extrinsics: tuple

    def matrices(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.asarray(self.intrinsics, np.float64),
            np.asarray(self.extrinsics, np.float64),
        )


def forward_camera(
    camera_id: str,
    width: int = 160,
    height: int = 120,
    fov_deg: float = 90.0,
    mount: tuple[float, float, float] = (0.0, 0.0, 0.0),
    yaw_deg: float = 0.0,
) -> CameraSpec:
    """Pinhole camera rigidly mounted on the sensor, yawed about +z."""
    fx = (width / 2.0) / math.tan(math.radians(fov_deg) / 2.0)
    intr = np.array(
        [[fx, 0.0, (width - 1) / 2.0], [0.0, fx, (height - 1) / 2.0], [0.0, 0.0, 1.0]]
    )
    yaw = math.radians(yaw_deg)
    spin = np.array(
        [
            [math.cos(yaw), -math.sin(yaw), 0.0],
            [math.sin(yaw), math.cos(yaw), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    rot = _AXES_SENSOR_TO_CAMERA @ spin.T
    extr = np.eye(4)
    extr[:3, :3] = rot
    extr[:3, 3] = -rot @ np.asarray(mount, np.float64)
    return CameraSpec(
        camera_id=camera_id,
        width=width,
        height=height,
        intrinsics=tuple(map(tuple, intr)),
        extrinsics=tuple(map(tuple, extr)),
    )


@dataclass(frozen=True)
class GroundSpec:
    enabled: bool = True
    extent: float = 40.0
    spacing: float = 1.0
    jitter: float = 0.15


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0
    dropout: float = 0.0


@dataclass(frozen=True)
class ScenarioSpec:
    """Complete description of a synthetic sequence."""

    name: str = "scene"
    seed: int = 0
    frame_count: int = 10
    rate_hz: float = 1.0
    objects: tuple[ObjectSpec, ...] = ()
    cameras: tuple[CameraSpec, ...] = (None,)
    ego_waypoints: tuple[tuple[float, float, float, float, float], ...] = (
        (0.0, 0.0, 0.0, 0.0, 0.0),
    )
    ground: GroundSpec = field(default_factory=GroundSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self) -> None:
        if self.cameras == (None,):
            object.__setattr__(self, "cameras", (forward_camera("front"),))
        if self.frame_count < 1:
            raise ConfigError("frame_count must be at least 1")
        if self.rate_hz <= 0:
            raise ConfigError("rate_hz must be positive")

    def timestamps(self) -> np.ndarray:
        return np.arange(self.frame_count) / self.rate_hz

    def ego_pose_at(self, t: float) -> np.ndarray:
        way = np.asarray(self.ego_waypoints, np.float64)
        pos = [np.interp(t, way[:, 0], way[:, 1 + d]) for d in range(3)]
        yaw = math.radians(float(np.interp(t, way[:, 0], way[:, 4])))
        pose = np.eye(4)
        pose[:3, :3] = np.array(
            [
                [math.cos(yaw), -math.sin(yaw), 0.0],
                [math.sin(yaw), math.cos(yaw), 0.0],
                [0.0, 0.0, 1.0],
            ]
        )
        pose[:3, 3] = pos
        return pose


@dataclass(frozen=True)
class FrameTruth:
    """Exact per-frame reference data.

    ``instance_ids`` aligns with the saved cloud (-1 for ground/none);
    ``instance_maps`` hold per-camera object indices per pixel (-1 empty).
    """

    timestamp: float
    instance_ids: np.ndarray
    class_ids: np.ndarray
    centers: dict[int, np.ndarray]
    extents: dict[int, np.ndarray]
    instance_maps: dict[str, np.ndarray]

    def silhouette(self, camera_id: str, instance: int) -> np.ndarray:
        return self.instance_maps[camera_id] == instance


@dataclass(frozen=True)
class GroundTruth:
    """Reference data for a whole generated sequence."""

    classes: dict[int, str]
    object_classes: dict[int, int]
    object_names: dict[int, str]
    rate_hz: float
    frames: tuple[FrameTruth, ...]

    @property
    def n_objects(self) -> int:
        return len(self.object_classes)

    def frame_at(self, timestamp: float, tol: float = 1e-6) -> FrameTruth:
        for truth in self.frames:
            if abs(truth.timestamp - timestamp) <= tol:
                return truth
        raise ManifestError(f"no ground truth for timestamp {timestamp}")

    def track_centers(self, instance: int) -> list[tuple[float, np.ndarray]]:
        out = []
        for truth in self.frames:
            if instance in truth.centers:
                out.append((truth.timestamp, truth.centers[instance]))
        return out


def _object_palette(count: int) -> np.ndarray:
    colors = []
    for i in range(count):
        hue = (i * 0.618033988749895) % 1.0
        r, g, b = colorsys.hsv_to_rgb(hue, 0.75, 0.95)
        colors.append((int(r * 255), int(g * 255), int(b * 255)))
    return np.asarray(colors, np.uint8) if count else np.zeros((0, 3), np.uint8)


def _sample_box_surface(rng: np.random.Generator, half: np.ndarray, count: int):
    sx, sy, sz = 2 * half
    areas = np.array([sy * sz, sy * sz, sx * sz, sx * sz, sx * sy, sx * sy])
    total = areas.sum()
    if total <= 0:
        return np.zeros((count, 3))
    faces = rng.choice(6, size=count, p=areas / total)
    u = rng.uniform(-1.0, 1.0, size=count)
    v = rng.uniform(-1.0, 1.0, size=count)
    pts = np.empty((count, 3))
    for f in range(6):
        sel = faces == f
        axis = f // 2
        sign = 1.0 if f % 2 == 0 else -1.0
        other = [d for d in range(3) if d != axis]
        pts[sel, axis] = sign * half[axis]
        pts[sel, other[0]] = u[sel] * half[other[0]]
        pts[sel, other[1]] = v[sel] * half[other[1]]
    return pts


def _sample_sphere_surface(rng: np.random.Generator, radius: float, count: int):
    vec = rng.normal(size=(count, 3))
    norm = np.linalg.norm(vec, axis=1, keepdims=True)
    norm[norm == 0] = 1.0
    return vec / norm * radius


def _local_points(spec: ObjectSpec, seed: int, index: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 1, index)))
    if spec.shape == "sphere":
        area = 4 * math.pi * spec.radius**2
        count = max(50, int(round(area * spec.surface_density)))
        return _sample_sphere_surface(rng, spec.radius, count)
    half = spec.half_extent
    sx, sy, sz = 2 * half
    area = 2 * (sx * sy + sy * sz + sx * sz)
    count = max(50, int(round(area * spec.surface_density)))
    return _sample_box_surface(rng, half, count)


def _ground_points(spec: ScenarioSpec) -> np.ndarray:
    if not spec.ground.enabled:
        return np.zeros((0, 3))
    g = spec.ground
    axis = np.arange(-g.extent, g.extent + g.spacing / 2, g.spacing)
    xx, yy = np.meshgrid(axis, axis)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(spec.seed, 3)))
    jitter = rng.uniform(-g.jitter, g.jitter, size=(xx.size, 2))
    pts = np.column_stack(
        [xx.ravel() + jitter[:, 0], yy.ravel() + jitter[:, 1], np.zeros(xx.size)]
    )
    return pts


def _ray_grid(intrinsics: np.ndarray, width: int, height: int) -> np.ndarray:
    cols, rows = np.meshgrid(np.arange(width), np.arange(height))
    ones = np.ones_like(cols, np.float64)
    pix = np.stack([cols.astype(np.float64), rows.astype(np.float64), ones], axis=-1)
    return pix @ np.linalg.inv(intrinsics).T


def _intersect_box(origin, dirs, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t_lo = (lo - origin) * inv
        t_hi = (hi - origin) * inv
    near = np.nanmax(np.minimum(t_lo, t_hi), axis=-1)
    far = np.nanmin(np.maximum(t_lo, t_hi), axis=-1)
    hit = (far >= near) & (far > 0)
    t = np.where(near > 0, near, far)
    return np.where(hit, t, np.inf)


def _intersect_sphere(origin, dirs, center, radius):
    oc = origin - center
    a = (dirs * dirs).sum(axis=-1)
    b = 2.0 * (dirs * oc).sum(axis=-1)
    c = float(oc @ oc) - radius * radius
    disc = b * b - 4 * a * c
    with np.errstate(invalid="ignore"):
        root = np.sqrt(np.where(disc >= 0, disc, np.nan))
    t1 = (-b - root) / (2 * a)
    t2 = (-b + root) / (2 * a)
    t = np.where(t1 > 0, t1, t2)
    return np.where((disc >= 0) & (t > 0), t, np.inf)


def _render(
    spec: ScenarioSpec,
    centers: list[np.ndarray],
    ego_pose: np.ndarray,
    palette: np.ndarray,
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    images: dict[str, np.ndarray] = {}
    maps: dict[str, np.ndarray] = {}
    for cam in spec.cameras:
        intr, extr = cam.matrices()
        cam_from_sensor = extr
        world_from_cam = ego_pose @ np.linalg.inv(cam_from_sensor)
        origin = world_from_cam[:3, 3]
        rays_cam = _ray_grid(intr, cam.width, cam.height)
        dirs = rays_cam @ world_from_cam[:3, :3].T
        depth = np.full((cam.height, cam.width), np.inf)
        inst = np.full((cam.height, cam.width), -1, np.int32)
        for index, obj in enumerate(spec.objects):
            center = centers[index]
            if obj.shape == "sphere":
                t = _intersect_sphere(origin, dirs, center, obj.radius)
            else:
                half = obj.half_extent
                t = _intersect_box(origin, dirs, center - half, center + half)
            closer = t < depth
            depth[closer] = t[closer]
            inst[closer] = index
        image = np.empty((cam.height, cam.width, 3), np.uint8)
        image[:] = BACKGROUND_COLOR
        for index in range(len(spec.objects)):
            image[inst == index] = palette[index]
        images[cam.camera_id] = image
        maps[cam.camera_id] = inst
    return images, maps


def _class_table(spec: ScenarioSpec) -> tuple[dict[int, str], dict[int, int]]:
    names = sorted({obj.class_name for obj in spec.objects})
    if spec.ground.enabled:
        names = sorted(set(names) | {GROUND_CLASS_NAME})
    classes = {0: "unlabeled"}
    classes.update({i + 1: name for i, name in enumerate(names)})
    by_name = {name: i for i, name in classes.items()}
    object_classes = {
        index: by_name[obj.class_name] for index, obj in enumerate(spec.objects)
    }
    return classes, object_classes


def generate(spec: ScenarioSpec, out_dir: str | Path) -> tuple[Path, GroundTruth]:
    """Write a full sequence plus ground truth; returns (manifest path, truth)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    classes, object_classes = _class_table(spec)
    ground_class = next(
        (i for i, n in classes.items() if n == GROUND_CLASS_NAME), 0
    )
    palette = _object_palette(len(spec.objects))
    locals_ = [
        _local_points(obj, spec.seed, index)
        for index, obj in enumerate(spec.objects)
    ]
    ground = _ground_points(spec)
    camera_specs = [
        (cam, *cam.matrices()) for cam in spec.cameras
    ]
    frame_names: list[str] = []
    truths: list[FrameTruth] = []
    for frame_index, t in enumerate(spec.timestamps()):
        ego_pose = spec.ego_pose_at(float(t))
        centers = [obj.center_at(float(t)) for obj in spec.objects]
        world_chunks = []
        inst_chunks = []
        cls_chunks = []
        for index, obj in enumerate(spec.objects):
            pts = locals_[index] + centers[index]
            world_chunks.append(pts)
            inst_chunks.append(np.full(len(pts), index, np.int32))
            cls_chunks.append(np.full(len(pts), object_classes[index], np.uint16))
        if len(ground):
            world_chunks.append(ground)
            inst_chunks.append(np.full(len(ground), -1, np.int32))
            cls_chunks.append(np.full(len(ground), ground_class, np.uint16))
        world = (
            np.vstack(world_chunks) if world_chunks else np.zeros((0, 3))
        )
        instances = (
            np.concatenate(inst_chunks) if inst_chunks else np.zeros(0, np.int32)
        )
        point_classes = (
            np.concatenate(cls_chunks) if cls_chunks else np.zeros(0, np.uint16)
        )
        if spec.noise.sigma > 0 or spec.noise.dropout > 0:
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=(spec.seed, 2, frame_index))
            )
            if spec.noise.sigma > 0:
                world = world + rng.normal(0, spec.noise.sigma, world.shape)
            if spec.noise.dropout > 0:
                keep = rng.random(len(world)) >= spec.noise.dropout
                world = world[keep]
                instances = instances[keep]
                point_classes = point_classes[keep]
        sensor_from_world = np.linalg.inv(ego_pose)
        sensor = world @ sensor_from_world[:3, :3].T + sensor_from_world[:3, 3]
        images, inst_maps = _render(spec, centers, ego_pose, palette)
        views = tuple(
            CameraView(
                camera_id=cam.camera_id,
                image=images[cam.camera_id],
                intrinsics=intr,
                extrinsics=extr,
            )
            for cam, intr, extr in camera_specs
        )
        frame = Frame(
            timestamp=float(t),
            points=sensor.astype(np.float32),
            cameras=views,
            ego_pose=ego_pose,
        )
        name = f"frame_{frame_index:06d}"
        save_frame(frame, out_dir / name)
        frame_names.append(name)
        truth = FrameTruth(
            timestamp=float(t),
            instance_ids=instances,
            class_ids=point_classes,
            centers={i: centers[i] for i in range(len(spec.objects))},
            extents={
                i: 2 * spec.objects[i].half_extent
                for i in range(len(spec.objects))
            },
            instance_maps=inst_maps,
        )
        truths.append(truth)
        _save_frame_truth(out_dir / "gt" / name, truth)
    manifest_path = save_manifest(
        SequenceManifest(frames=frame_names), out_dir
    )
    truth = GroundTruth(
        classes=classes,
        object_classes=object_classes,
        object_names={i: obj.name for i, obj in enumerate(spec.objects)},
        rate_hz=spec.rate_hz,
        frames=tuple(truths),
    )
    meta = {
        "classes": {str(k): v for k, v in classes.items()},
        "object_classes": {str(k): v for k, v in object_classes.items()},
        "object_names": {str(k): v for k, v in truth.object_names.items()},
        "rate_hz": spec.rate_hz,
        "frames": frame_names,
        "timestamps": [float(t) for t in spec.timestamps()],
    }
    (out_dir / "gt" / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True)
    )
    return manifest_path, truth


def _save_frame_truth(directory: Path, truth: FrameTruth) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "instances.bin").write_bytes(
        np.ascontiguousarray(truth.instance_ids, "<i4").tobytes()
    )
    (directory / "classes.bin").write_bytes(
        np.ascontiguousarray(truth.class_ids, "<u2").tobytes()
    )
    doc = {
        "timestamp": truth.timestamp,
        "centers": {str(k): v.tolist() for k, v in truth.centers.items()},
        "extents": {str(k): v.tolist() for k, v in truth.extents.items()},
    }
    (directory / "objects.json").write_text(json.dumps(doc, indent=2, sort_keys=True))
    for camera_id, inst_map in truth.instance_maps.items():
        img = Image.fromarray((inst_map + 1).astype(np.uint16))
        img.save(directory / f"seg_{camera_id}.png")


def load_ground_truth(out_dir: str | Path) -> GroundTruth:
    """Read the gt/ tree written by :func:`generate`."""
    out_dir = Path(out_dir)
    meta_path = out_dir / "gt" / "meta.json"
    if not meta_path.is_file():
        raise ManifestError(f"missing file: {meta_path}")
    meta = json.loads(meta_path.read_text())
    frames = []
    for name, timestamp in zip(meta["frames"], meta["timestamps"]):
        directory = out_dir / "gt" / name
        instances = np.frombuffer(
            (directory / "instances.bin").read_bytes(), "<i4"
        )
        point_classes = np.frombuffer(
            (directory / "classes.bin").read_bytes(), "<u2"
        )
        doc = json.loads((directory / "objects.json").read_text())
        maps = {}
        for seg in sorted(directory.glob("seg_*.png")):
            camera_id = seg.stem[len("seg_") :]
            with Image.open(seg) as img:
                maps[camera_id] = np.asarray(img, np.int32) - 1
        frames.append(
            FrameTruth(
                timestamp=float(timestamp),
                instance_ids=instances.copy(),
                class_ids=point_classes.copy(),
                centers={
                    int(k): np.asarray(v) for k, v in doc["centers"].items()
                },
                extents={
                    int(k): np.asarray(v) for k, v in doc["extents"].items()
                },
                instance_maps=maps,
            )
        )
    return GroundTruth(
        classes={int(k): v for k, v in meta["classes"].items()},
        object_classes={int(k): v for k, v in meta["object_classes"].items()},
        object_names={int(k): v for k, v in meta["object_names"].items()},
        rate_hz=float(meta["rate_hz"]),
        frames=tuple(frames),
    )


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    return {
        "name": spec.name,
        "seed": spec.seed,
        "frame_count": spec.frame_count,
        "rate_hz": spec.rate_hz,
        "objects": [
            {
                "name": o.name,
                "class_name": o.class_name,
                "shape": o.shape,
                "size": list(o.size),
                "radius": o.radius,
                "waypoints": [list(w) for w in o.waypoints],
                "surface_density": o.surface_density,
            }
            for o in spec.objects
        ],
        "cameras": [
            {
                "camera_id": c.camera_id,
                "width": c.width,
                "height": c.height,
                "intrinsics": [list(r) for r in c.intrinsics],
                "extrinsics": [list(r) for r in c.extrinsics],
            }
            for c in spec.cameras
        ],
        "ego_waypoints": [list(w) for w in spec.ego_waypoints],
        "ground": {
            "enabled": spec.ground.enabled,
            "extent": spec.ground.extent,
            "spacing": spec.ground.spacing,
            "jitter": spec.ground.jitter,
        },
        "noise": {"sigma": spec.noise.sigma, "dropout": spec.noise.dropout},
    }


def scenario_from_dict(doc: dict) -> ScenarioSpec:
    try:
        objects = tuple(
            ObjectSpec(
                name=o["name"],
                class_name=o["class_name"],
                shape=o.get("shape", "box"),
                size=tuple(o.get("size", (1.0, 1.0, 1.0))),
                radius=float(o.get("radius", 0.5)),
                waypoints=tuple(tuple(w) for w in o["waypoints"]),
                surface_density=float(o.get("surface_density", 150.0)),
            )
            for o in doc.get("objects", [])
        )
        cameras = tuple(
            CameraSpec(
                camera_id=c["camera_id"],
                width=int(c["width"]),
                height=int(c["height"]),
                intrinsics=tuple(map(tuple, c["intrinsics"])),
                extrinsics=tuple(map(tuple, c["extrinsics"])),
            )
            for c in doc.get("cameras", [])
        ) or (None,)
        ground = doc.get("ground", {})
        noise = doc.get("noise", {})
        return ScenarioSpec(
            name=doc.get("name", "scene"),
            seed=int(doc.get("seed", 0)),
            frame_count=int(doc.get("frame_count", 10)),
            rate_hz=float(doc.get("rate_hz", 1.0)),
            objects=objects,
            cameras=cameras,
            ego_waypoints=tuple(
                tuple(w) for w in doc.get("ego_waypoints", [(0, 0, 0, 0, 0)])
            ),
            ground=GroundSpec(
                enabled=bool(ground.get("enabled", True)),
                extent=float(ground.get("extent", 40.0)),
                spacing=float(ground.get("spacing", 1.0)),
                jitter=float(ground.get("jitter", 0.15)),
            ),
            noise=NoiseSpec(
                sigma=float(noise.get("sigma", 0.0)),
                dropout=float(noise.get("dropout", 0.0)),
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario description: {exc}") from exc

"""Scene graphs per frame, pose lookup, and the unified 4-D structure.

A frame graph relates the objects seen at one timestamp: close pairs get
an undirected ``near`` edge, pairs within a wider radius get reciprocal
directional edges (left/right, front/behind, above/below) judged in the
ego frame, where x points forward, y left, and z up.

Frame graphs plus tracks plus the ego trajectory assemble into one
serializable structure whose canonical JSON is byte-stable: same inputs,
same bytes.  Image patches can be inlined as base64 or swapped for
content-addressed references into a :class:`PatchStore`.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import PoseLookupError, SchemaVersionMismatch
from .tokens import (
    AxisStats,
    CentroidToken,
    ObjectTokenSet,
    PatchToken,
    ShapeToken,
    TemporalToken,
    assemble_step,
)
from .tracking import Track

__all__ = [
    "SCHEMA_VERSION",
    "GraphParams",
    "RelationEdge",
    "SceneGraphFrame",
    "build_frame_graph",
    "PoseProvider",
    "IdentityPoseProvider",
    "ManifestPoseProvider",
    "TumPoseProvider",
    "EgoSample",
    "SceneGraph4D",
    "assemble_4dsg",
    "PatchStore",
    "serialize_4dsg",
    "deserialize_4dsg",
    "graph_sha256",
]

SCHEMA_VERSION = "4dsg/1"

# ego-frame axes: +x forward, +y left, +z up
_AXIS_RELATIONS = (
    ("front_of", "behind"),
    ("left_of", "right_of"),
    ("above", "below"),
)


@dataclass(frozen=True)
class GraphParams:
    """Distance thresholds for relating objects within a frame."""

    near_threshold_m: float = 3.0
    relation_radius_m: float = 15.0

    def __post_init__(self) -> None:
        if self.near_threshold_m <= 0:
            raise ValueError("near_threshold_m must be positive")
        if self.relation_radius_m < self.near_threshold_m:
            raise ValueError("relation_radius_m cannot be below near_threshold_m")


@dataclass(frozen=True)
class RelationEdge:
    """``source`` stands in ``relation`` to ``target``.

    ``near`` edges are undirected and stored once with source < target;
    directional edges appear in both directions.  ``value`` is the
    centroid distance in meters.
    """

    source: int
    target: int
    relation: str
    value: float


@dataclass(frozen=True)
class SceneGraphFrame:
    """All object relations at one timestamp."""

    timestamp: float
    nodes: tuple[int, ...]
    edges: tuple[RelationEdge, ...]


def build_frame_graph(
    steps: list[ObjectTokenSet],
    ego_pose: np.ndarray,
    params: GraphParams | None = None,
) -> SceneGraphFrame:
    """Relate one frame's objects by distance and ego-frame direction."""
    params = params or GraphParams()
    ordered = sorted(steps, key=lambda s: s.object_id)
    ids = [s.object_id for s in ordered]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate object ids in one frame")
    if not ordered:
        return SceneGraphFrame(timestamp=0.0, nodes=(), edges=())
    timestamp = ordered[0].timestamp
    if any(s.timestamp != timestamp for s in ordered):
        raise ValueError("steps from different timestamps in one frame graph")
    world = np.stack([s.centroid.as_array() for s in ordered])
    ego_from_world = np.linalg.inv(np.asarray(ego_pose, np.float64))
    ego = world @ ego_from_world[:3, :3].T + ego_from_world[:3, 3]
    edges: list[RelationEdge] = []
    for i in range(len(ordered)):
        for j in range(i + 1, len(ordered)):
            dist = float(np.linalg.norm(world[i] - world[j]))
            if dist <= params.near_threshold_m:
                edges.append(
                    RelationEdge(
                        source=ids[i], target=ids[j], relation="near", value=dist
                    )
                )
            elif dist <= params.relation_radius_m:
                delta = ego[j] - ego[i]
                axis = int(np.argmax(np.abs(delta)))
                forward, backward = _AXIS_RELATIONS[axis]
                if delta[axis] > 0:
                    j_rel, i_rel = forward, backward
                else:
                    j_rel, i_rel = backward, forward
                edges.append(
                    RelationEdge(
                        source=ids[j], target=ids[i], relation=j_rel, value=dist
                    )
                )
                edges.append(
                    RelationEdge(
                        source=ids[i], target=ids[j], relation=i_rel, value=dist
                    )
                )
    edges.sort(key=lambda e: (e.source, e.target, e.relation))
    return SceneGraphFrame(
        timestamp=timestamp, nodes=tuple(ids), edges=tuple(edges)
    )


class PoseProvider(ABC):
    """Maps a timestamp to a sensor-to-world pose."""

    @abstractmethod
    def pose_at(self, timestamp: float) -> np.ndarray:
        """Return the 4x4 pose for ``timestamp`` or raise PoseLookupError."""


class IdentityPoseProvider(PoseProvider):
    """Fixed identity pose: the sensor frame is the world frame."""

    def pose_at(self, timestamp: float) -> np.ndarray:
        return np.eye(4)


class ManifestPoseProvider(PoseProvider):
    """Poses recorded alongside the frames themselves."""

    def __init__(self, samples: list[tuple[float, np.ndarray]], tol: float = 1e-6):
        self._samples = [
            (float(t), np.asarray(p, np.float64)) for t, p in samples
        ]
        self._tol = tol

    def pose_at(self, timestamp: float) -> np.ndarray:
        for t, pose in self._samples:
            if abs(t - timestamp) <= self._tol:
                return pose
        raise PoseLookupError(f"no recorded pose near timestamp {timestamp}")


class TumPoseProvider(PoseProvider):
    """Poses from a trajectory file of ``t x y z qx qy qz qw`` lines.

    Lines starting with ``#`` are comments.  Lookup snaps to the nearest
    sample within ``tol`` seconds.
    """

    def __init__(self, path: str | Path, tol: float = 0.05):
        from scipy.spatial.transform import Rotation

        self._times = []
        self._poses = []
        self._tol = tol
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 8:
                raise PoseLookupError(
                    f"{path}:{lineno}: expected 8 fields, got {len(parts)}"
                )
            values = [float(p) for p in parts]
            pose = np.eye(4)
            pose[:3, :3] = Rotation.from_quat(values[4:8]).as_matrix()
            pose[:3, 3] = values[1:4]
            self._times.append(values[0])
            self._poses.append(pose)
        if not self._times:
            raise PoseLookupError(f"{path}: no pose samples")
        order = np.argsort(self._times)
        self._times = np.asarray(self._times)[order]
        self._poses = [self._poses[i] for i in order]

    def pose_at(self, timestamp: float) -> np.ndarray:
        idx = int(np.argmin(np.abs(self._times - timestamp)))
        if abs(self._times[idx] - timestamp) > self._tol:
            raise PoseLookupError(
                f"no trajectory sample within {self._tol}s of {timestamp}"
            )
        return self._poses[idx]


@dataclass(frozen=True)
class EgoSample:
    timestamp: float
    pose: np.ndarray


@dataclass(frozen=True)
class SceneGraph4D:
    """The unified structure: frames, tracks, and ego motion over a window."""

    window_start: float
    window_end: float
    frames: tuple[SceneGraphFrame, ...]
    tracks: tuple[Track, ...]
    ego: tuple[EgoSample, ...]
    anchor: str = "world"


def assemble_4dsg(
    frames: list[SceneGraphFrame],
    tracks: list[Track],
    ego: list[EgoSample],
    anchor: str = "world",
) -> SceneGraph4D:
    """Validate and bind the pieces of one window into a single structure."""
    frames = sorted(frames, key=lambda f: f.timestamp)
    times = [f.timestamp for f in frames]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("frame timestamps must strictly increase")
    tracks = sorted(tracks, key=lambda t: t.object_id)
    track_ids = {t.object_id for t in tracks}
    if len(track_ids) != len(tracks):
        raise ValueError("duplicate track ids")
    for frame in frames:
        missing = set(frame.nodes) - track_ids
        if missing:
            raise ValueError(
                f"frame {frame.timestamp} references unknown tracks {sorted(missing)}"
            )
    ego = sorted(ego, key=lambda s: s.timestamp)
    ego_times = {s.timestamp for s in ego}
    for t in times:
        if t not in ego_times:
            raise ValueError(f"no ego sample for frame timestamp {t}")
    frame_times = set(times)
    for track in tracks:
        step_times = [s.timestamp for s in track.steps]
        if any(b <= a for a, b in zip(step_times, step_times[1:])):
            raise ValueError(f"track {track.object_id} steps out of order")
        stray = set(step_times) - frame_times
        if stray:
            raise ValueError(
                f"track {track.object_id} has steps outside the window: {sorted(stray)}"
            )
    if not frames:
        window = (0.0, 0.0)
    else:
        window = (times[0], times[-1])
    return SceneGraph4D(
        window_start=window[0],
        window_end=window[1],
        frames=tuple(frames),
        tracks=tuple(tracks),
        ego=tuple(ego),
        anchor=anchor,
    )


class PatchStore:
    """Content-addressed store of image patches as PNG files.

    The reference for a patch is the SHA-256 of its PNG bytes, so equal
    content lands in one file and references are stable across runs.
    """

    def __init__(self, directory: str | Path):
        self._dir = Path(directory)
        self._dir.mkdir(parents=True, exist_ok=True)

    def put(self, patch: np.ndarray) -> str:
        buf = io.BytesIO()
        Image.fromarray(np.asarray(patch, np.uint8)).save(buf, format="PNG")
        data = buf.getvalue()
        ref = hashlib.sha256(data).hexdigest()
        path = self._dir / f"{ref}.png"
        if not path.exists():
            path.write_bytes(data)
        return ref

    def get(self, ref: str) -> np.ndarray:
        path = self._dir / f"{ref}.png"
        if not path.is_file():
            raise KeyError(f"no stored patch {ref}")
        return np.asarray(Image.open(path).convert("RGB"))

    def __contains__(self, ref: str) -> bool:
        return (self._dir / f"{ref}.png").is_file()


def _patch_payload(
    token: PatchToken, patch_store: PatchStore | None, inline: bool
) -> dict | None:
    if token.patch is None:
        return None
    if patch_store is not None:
        return {"ref": patch_store.put(token.patch)}
    if inline:
        buf = io.BytesIO()
        Image.fromarray(np.asarray(token.patch, np.uint8)).save(buf, format="PNG")
        return {"png_b64": base64.b64encode(buf.getvalue()).decode("ascii")}
    return None


def _step_doc(
    step: ObjectTokenSet, patch_store: PatchStore | None, inline: bool
) -> dict:
    return {
        "object_id": int(step.object_id),
        "t": float(step.timestamp),
        "cameras": list(step.cameras),
        "points": [int(i) for i in step.point_indices],
        "centroid": [float(v) for v in step.centroid.as_array()],
        "shape": {
            name: {
                "mean": float(ax.mean),
                "std": float(ax.std),
                "min": float(ax.min),
                "max": float(ax.max),
            }
            for name, ax in zip("xyz", step.shape.axes)
        },
        "temporal": {
            "start": float(step.temporal.start),
            "end": float(step.temporal.end),
        },
        "patches": [
            {
                "row": int(p.row),
                "col": int(p.col),
                "coverage": float(p.coverage),
                "data": _patch_payload(p, patch_store, inline),
            }
            for p in step.patches
        ],
    }


def serialize_4dsg(
    graph: SceneGraph4D,
    patch_store: PatchStore | None = None,
    inline_patches: bool = False,
) -> str:
    """Render the structure as canonical JSON: sorted keys, no whitespace.

    With a patch store, patch pixels become content-addressed references;
    with ``inline_patches`` they are embedded as base64 PNG; otherwise
    patch content is dropped and only grid positions remain.
    """
    doc = {
        "schema": SCHEMA_VERSION,
        "anchor": graph.anchor,
        "window": {
            "start": float(graph.window_start),
            "end": float(graph.window_end),
        },
        "ego": [
            {
                "t": float(s.timestamp),
                "pose": [[float(v) for v in row] for row in np.asarray(s.pose)],
            }
            for s in graph.ego
        ],
        "frames": [
            {
                "t": float(f.timestamp),
                "nodes": [int(n) for n in f.nodes],
                "edges": [
                    {
                        "source": int(e.source),
                        "target": int(e.target),
                        "relation": e.relation,
                        "value": float(e.value),
                    }
                    for e in f.edges
                ],
            }
            for f in graph.frames
        ],
        "tracks": [
            {
                "object_id": int(t.object_id),
                "birth": float(t.birth_time),
                "status": t.status,
                "steps": [
                    _step_doc(s, patch_store, inline_patches) for s in t.steps
                ],
            }
            for t in graph.tracks
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _step_from_doc(doc: dict, patch_store: PatchStore | None) -> ObjectTokenSet:
    patches = []
    for p in doc["patches"]:
        data = p.get("data")
        patch = None
        if isinstance(data, dict) and "ref" in data:
            if patch_store is None:
                raise ValueError(
                    "graph stores patch references; a patch store is required"
                )
            patch = patch_store.get(data["ref"])
        elif isinstance(data, dict) and "png_b64" in data:
            patch = np.asarray(
                Image.open(io.BytesIO(base64.b64decode(data["png_b64"]))).convert(
                    "RGB"
                )
            )
        patches.append(
            PatchToken(
                row=int(p["row"]),
                col=int(p["col"]),
                coverage=float(p["coverage"]),
                patch=patch,
            )
        )
    shape = ShapeToken(
        *(
            AxisStats(
                mean=doc["shape"][name]["mean"],
                std=doc["shape"][name]["std"],
                min=doc["shape"][name]["min"],
                max=doc["shape"][name]["max"],
            )
            for name in "xyz"
        )
    )
    return assemble_step(
        object_id=int(doc["object_id"]),
        timestamp=float(doc["t"]),
        patches=tuple(patches),
        centroid=CentroidToken(*doc["centroid"]),
        shape=shape,
        temporal=TemporalToken(doc["temporal"]["start"], doc["temporal"]["end"]),
        point_indices=np.asarray(doc["points"], np.int64),
        cameras=tuple(doc["cameras"]),
    )


def deserialize_4dsg(
    text: str, patch_store: PatchStore | None = None
) -> SceneGraph4D:
    """Parse canonical JSON back into the full structure.

    Rejects unknown schema versions.  Patch references are resolved
    through ``patch_store``; inline patches decode on their own.
    """
    doc = json.loads(text)
    schema = doc.get("schema")
    if schema != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"cannot read schema {schema!r}, expected {SCHEMA_VERSION!r}"
        )
    frames = [
        SceneGraphFrame(
            timestamp=float(f["t"]),
            nodes=tuple(int(n) for n in f["nodes"]),
            edges=tuple(
                RelationEdge(
                    source=int(e["source"]),
                    target=int(e["target"]),
                    relation=e["relation"],
                    value=float(e["value"]),
                )
                for e in f["edges"]
            ),
        )
        for f in doc["frames"]
    ]
    tracks = [
        Track(
            object_id=int(t["object_id"]),
            birth_time=float(t["birth"]),
            status=t["status"],
            steps=[_step_from_doc(s, patch_store) for s in t["steps"]],
        )
        for t in doc["tracks"]
    ]
    ego = [
        EgoSample(
            timestamp=float(s["t"]), pose=np.asarray(s["pose"], np.float64)
        )
        for s in doc["ego"]
    ]
    return assemble_4dsg(frames, tracks, ego, anchor=doc.get("anchor", "world"))


def graph_sha256(serialized: str) -> str:
    """Stable content hash of a serialized graph."""
    return hashlib.sha256(serialized.encode("utf-8")).hexdigest()

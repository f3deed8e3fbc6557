"""Point-prompted segmentation backends.

A backend answers one request per camera view: given the image and groups
of prompt pixels (one group per proposed object), it returns one mask per
group, in order, as a :class:`~sg4d.masks.MaskSet` whose mask_id is the
group index.  A group that hits nothing yields an all-false raster, so
callers can always index masks by group.

The remote backend speaks JSON over HTTP to a segmentation sidecar:

* ``POST {endpoint}/segment`` with ``{"camera_id", "timestamp",
  "frame_index", "image_png_b64", "prompt_groups": [[[u, v], ...], ...]}``
* response ``{"masks": [{"rle": {"size": [H, W], "counts": [...]},
  "score": float}, ...]}`` with exactly one entry per prompt group.

Masks travel run-length encoded in the layout of :mod:`sg4d.masks`.
"""

from __future__ import annotations

import base64
import io
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests
from PIL import Image

from .errors import (
    BackendError,
    BackendTimeout,
    BackendUnavailable,
    MaskShapeMismatch,
)
from .masks import Mask, MaskSet, decode_rle
from .synth import GroundTruth

__all__ = [
    "SegRequest",
    "SegmentationBackend",
    "OracleBackend",
    "FileBackend",
    "RemoteBackend",
    "encode_image_png_b64",
]


@dataclass(frozen=True)
class SegRequest:
    """One segmentation call for one camera view.

    ``prompt_groups`` holds (k, 2) arrays of continuous pixel coordinates
    (u=column, v=row); each group prompts one object.
    """

    camera_id: str
    timestamp: float
    frame_index: int
    image: np.ndarray
    prompt_groups: tuple[np.ndarray, ...]


class SegmentationBackend(ABC):
    """Interface every mask source implements."""

    @abstractmethod
    def segment(self, request: SegRequest) -> MaskSet:
        """Return one mask per prompt group, mask_id = group index."""


def _prompt_pixels(group: np.ndarray, height: int, width: int):
    pts = np.asarray(group, np.float64).reshape(-1, 2)
    cols = np.clip(np.rint(pts[:, 0]).astype(np.int64), 0, width - 1)
    rows = np.clip(np.rint(pts[:, 1]).astype(np.int64), 0, height - 1)
    return rows, cols


class OracleBackend(SegmentationBackend):
    """Perfect masks from synthetic ground truth.

    Each prompt group is resolved to the object instance covering the
    majority of its prompt pixels; the mask is that object's full
    silhouette.  Groups prompting only background get an empty mask, the
    way a real segmenter is expected to reject clutter prompts.
    """

    def __init__(self, truth: GroundTruth):
        self._truth = truth

    def segment(self, request: SegRequest) -> MaskSet:
        truth = self._truth.frame_at(request.timestamp)
        if request.camera_id not in truth.instance_maps:
            raise BackendError(
                f"no ground truth for camera {request.camera_id!r}"
            )
        inst_map = truth.instance_maps[request.camera_id]
        height, width = inst_map.shape
        masks = []
        for gid, group in enumerate(request.prompt_groups):
            rows, cols = _prompt_pixels(group, height, width)
            votes = inst_map[rows, cols]
            votes = votes[votes >= 0]
            if votes.size == 0:
                raster = np.zeros((height, width), bool)
                prompt = tuple()
            else:
                counts = np.bincount(votes)
                winner = int(np.argmax(counts))
                raster = inst_map == winner
                prompt = tuple(
                    (float(u), float(v))
                    for u, v in np.asarray(group, np.float64).reshape(-1, 2)
                )
            masks.append(
                Mask(mask_id=gid, raster=raster, prompt_points=prompt, score=1.0)
            )
        return MaskSet(
            camera_id=request.camera_id,
            timestamp=request.timestamp,
            masks=tuple(masks),
        )


class FileBackend(SegmentationBackend):
    """Masks read from a directory of pre-computed rasters.

    Layout: ``{root}/frame_{index:06d}/{camera_id}/{group:03d}.png``;
    nonzero pixels are inside the mask.  A missing file is an error, an
    all-zero file is a legitimate empty mask.
    """

    def __init__(self, root: str | Path):
        self._root = Path(root)

    def segment(self, request: SegRequest) -> MaskSet:
        height, width = request.image.shape[:2]
        directory = (
            self._root / f"frame_{request.frame_index:06d}" / request.camera_id
        )
        masks = []
        for gid, group in enumerate(request.prompt_groups):
            path = directory / f"{gid:03d}.png"
            if not path.is_file():
                raise BackendError(f"missing mask file: {path}")
            with Image.open(path) as img:
                raster = np.asarray(img.convert("L")) > 0
            if raster.shape != (height, width):
                raise MaskShapeMismatch(
                    f"{path} has shape {raster.shape}, image is "
                    f"{(height, width)}"
                )
            prompt = tuple(
                (float(u), float(v))
                for u, v in np.asarray(group, np.float64).reshape(-1, 2)
            )
            masks.append(
                Mask(mask_id=gid, raster=raster, prompt_points=prompt, score=1.0)
            )
        return MaskSet(
            camera_id=request.camera_id,
            timestamp=request.timestamp,
            masks=tuple(masks),
        )


def encode_image_png_b64(image: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(image, np.uint8)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class RemoteBackend(SegmentationBackend):
    """Masks from a segmentation sidecar over HTTP (contract above)."""

    def __init__(self, endpoint: str, timeout: float = 30.0, session=None):
        self._endpoint = endpoint.rstrip("/")
        self._timeout = timeout
        self._session = session or requests.Session()

    def segment(self, request: SegRequest) -> MaskSet:
        payload = {
            "camera_id": request.camera_id,
            "timestamp": request.timestamp,
            "frame_index": request.frame_index,
            "image_png_b64": encode_image_png_b64(request.image),
            "prompt_groups": [
                np.asarray(g, np.float64).reshape(-1, 2).tolist()
                for g in request.prompt_groups
            ],
        }
        try:
            response = self._session.post(
                f"{self._endpoint}/segment", json=payload, timeout=self._timeout
            )
        except requests.Timeout as exc:
            raise BackendTimeout(
                f"segmentation service timed out after {self._timeout}s"
            ) from exc
        except requests.ConnectionError as exc:
            raise BackendUnavailable(
                f"cannot reach segmentation service at {self._endpoint}"
            ) from exc
        if response.status_code != 200:
            raise BackendError(
                f"segmentation service returned {response.status_code}: "
                f"{response.text[:200]}"
            )
        try:
            doc = response.json()
            entries = doc["masks"]
        except (ValueError, KeyError) as exc:
            raise BackendError(f"malformed segmentation response: {exc}") from exc
        if len(entries) != len(request.prompt_groups):
            raise BackendError(
                f"expected {len(request.prompt_groups)} masks, got {len(entries)}"
            )
        height, width = request.image.shape[:2]
        masks = []
        for gid, (entry, group) in enumerate(zip(entries, request.prompt_groups)):
            raster = decode_rle(entry["rle"])
            if raster.shape != (height, width):
                raise MaskShapeMismatch(
                    f"mask {gid} has shape {raster.shape}, image is "
                    f"{(height, width)}"
                )
            prompt = tuple(
                (float(u), float(v))
                for u, v in np.asarray(group, np.float64).reshape(-1, 2)
            )
            masks.append(
                Mask(
                    mask_id=gid,
                    raster=raster,
                    prompt_points=prompt,
                    score=float(entry.get("score", 1.0)),
                )
            )
        return MaskSet(
            camera_id=request.camera_id,
            timestamp=request.timestamp,
            masks=tuple(masks),
        )

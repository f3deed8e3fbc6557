"""Binary mask containers and the run-length codec used on the wire.

A mask raster is a boolean ``(H, W)`` array aligned with one camera image.
For transport the raster is run-length encoded over its row-major flattening:
``counts`` alternates runs of zeros and ones and always starts with a zero
run, which may be empty.  The same layout is expected by the segmentation
sidecar, so both ends can round-trip masks without a shared dependency.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MaskShapeMismatch

__all__ = ["Mask", "MaskSet", "encode_rle", "decode_rle"]


@dataclass(frozen=True)
class Mask:
    """One segmented region in one camera image.

    Attributes:
        mask_id: Identifier unique within the owning :class:`MaskSet`.
        raster: Boolean ``(H, W)`` array, True inside the region.
        prompt_points: Pixel coordinates ``(u, v)`` that prompted the region.
        score: Backend confidence in ``[0, 1]``.
    """

    mask_id: int
    raster: np.ndarray
    prompt_points: tuple[tuple[float, float], ...] = ()
    score: float = 1.0

    def __post_init__(self) -> None:
        raster = np.asarray(self.raster, dtype=bool)
        if raster.ndim != 2:
            raise MaskShapeMismatch(
                f"mask raster must be 2-D, got shape {raster.shape}"
            )
        raster.flags.writeable = False
        object.__setattr__(self, "raster", raster)

    @property
    def area(self) -> int:
        return int(self.raster.sum())


@dataclass(frozen=True)
class MaskSet:
    """All masks produced for one camera view at one timestamp.

    ``mask_id`` values are unique within the set; rasters all share the
    resolution of the camera image they were segmented from.
    """

    camera_id: str
    timestamp: float
    masks: tuple[Mask, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "masks", tuple(self.masks))
        ids = [m.mask_id for m in self.masks]
        if len(ids) != len(set(ids)):
            raise MaskShapeMismatch(
                f"duplicate mask_id in set for camera {self.camera_id!r}"
            )
        shapes = {m.raster.shape for m in self.masks}
        if len(shapes) > 1:
            raise MaskShapeMismatch(
                f"masks for camera {self.camera_id!r} disagree on resolution: "
                f"{sorted(shapes)}"
            )

    def by_id(self, mask_id: int) -> Mask:
        for m in self.masks:
            if m.mask_id == mask_id:
                return m
        raise KeyError(mask_id)


def encode_rle(raster: np.ndarray) -> dict:
    """Encode a boolean raster as alternating run lengths.

    Returns a dict ``{"size": [H, W], "counts": [...]}`` where ``counts``
    alternates zero runs and one runs over the row-major flattening and
    starts with the (possibly zero-length) run of zeros.
    """
    raster = np.asarray(raster, dtype=bool)
    if raster.ndim != 2:
        raise MaskShapeMismatch(f"expected 2-D raster, got shape {raster.shape}")
    flat = raster.ravel(order="C")
    if flat.size == 0:
        return {"size": [int(raster.shape[0]), int(raster.shape[1])], "counts": []}
    boundaries = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], boundaries, [flat.size]))
    runs = np.diff(edges).tolist()
    if flat[0]:
        runs = [0] + runs
    return {"size": [int(raster.shape[0]), int(raster.shape[1])], "counts": runs}


def decode_rle(payload: dict) -> np.ndarray:
    """Decode ``encode_rle`` output back to a boolean ``(H, W)`` raster."""
    try:
        h, w = (int(x) for x in payload["size"])
        counts = [int(c) for c in payload["counts"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise MaskShapeMismatch(f"malformed RLE payload: {exc}") from exc
    if h < 0 or w < 0 or any(c < 0 for c in counts):
        raise MaskShapeMismatch("RLE payload contains negative values")
    total = sum(counts)
    if total != h * w:
        raise MaskShapeMismatch(
            f"RLE runs cover {total} pixels, raster has {h * w}"
        )
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    value = False
    for run in counts:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape(h, w)

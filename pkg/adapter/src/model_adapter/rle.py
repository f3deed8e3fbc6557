"""Run-length codec for boolean mask rasters on the wire.

Masks travel as ``{"size": [H, W], "counts": [...]}`` where ``counts``
alternates zero runs and one runs over the row-major flattening and always
starts with the (possibly zero-length) run of zeros. A 2x3 raster whose
only set pixel sits at row 0, column 1 encodes as
``{"size": [2, 3], "counts": [1, 1, 4]}``.
"""

from __future__ import annotations

import numpy as np


class RleError(ValueError):
    """A payload that cannot be decoded to a raster."""


def encode(raster: np.ndarray) -> dict:
    """Encode a boolean ``(H, W)`` raster as alternating run lengths."""
    raster = np.asarray(raster, dtype=bool)
    if raster.ndim != 2:
        raise RleError(f"expected 2-D raster, got shape {raster.shape}")
    flat = raster.ravel(order="C")
    if flat.size == 0:
        return {"size": [int(raster.shape[0]), int(raster.shape[1])], "counts": []}
    boundaries = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], boundaries, [flat.size]))
    runs = np.diff(edges).tolist()
    if flat[0]:
        runs = [0] + runs
    return {"size": [int(raster.shape[0]), int(raster.shape[1])], "counts": runs}


def decode(payload: dict) -> np.ndarray:
    """Decode ``encode`` output back to a boolean ``(H, W)`` raster."""
    try:
        height, width = (int(x) for x in payload["size"])
        counts = [int(c) for c in payload["counts"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise RleError(f"malformed RLE payload: {exc}") from exc
    if height < 0 or width < 0 or any(c < 0 for c in counts):
        raise RleError("RLE payload contains negative values")
    total = sum(counts)
    if total != height * width:
        raise RleError(f"RLE runs cover {total} pixels, raster has {height * width}")
    flat = np.zeros(height * width, dtype=bool)
    pos = 0
    value = False
    for run in counts:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape(height, width)

"""Compact object tokens: appearance patches, centroid, shape, lifespan.

An object detected in a frame is summarized by four token kinds:

* patch tokens from a fixed 16x16 grid laid over the full image, keeping
  cells more than half covered by the object's mask;
* a centroid token (mean of the member points, world frame);
* a shape token (per-axis mean, population spread, min, max);
* a temporal token (first and last timestamp the object was seen).

The grid divides each image axis into 16 spans whose sizes differ by at
most one pixel, longer spans first.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyPointSet, InvariantViolation

__all__ = [
    "GRID",
    "MAX_PATCH_TOKENS",
    "MIN_PATCH_COVERAGE",
    "BACKGROUND_RGB",
    "PatchToken",
    "CentroidToken",
    "AxisStats",
    "ShapeToken",
    "TemporalToken",
    "ObjectTokenSet",
    "grid_edges",
    "isolate_mask",
    "grid_patch_tokens",
    "encode_shape",
    "assemble_step",
    "with_object_id",
    "with_temporal",
]

GRID = 16
MAX_PATCH_TOKENS = GRID * GRID
MIN_PATCH_COVERAGE = 0.5
BACKGROUND_RGB = (128, 128, 128)


@dataclass(frozen=True)
class PatchToken:
    """One retained grid cell: its position, coverage, and pixel content."""

    row: int
    col: int
    coverage: float
    patch: np.ndarray | None = None


@dataclass(frozen=True)
class CentroidToken:
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], np.float64)


@dataclass(frozen=True)
class AxisStats:
    """Population statistics of one coordinate axis."""

    mean: float
    std: float
    min: float
    max: float


@dataclass(frozen=True)
class ShapeToken:
    x: AxisStats
    y: AxisStats
    z: AxisStats

    @property
    def axes(self) -> tuple[AxisStats, AxisStats, AxisStats]:
        return (self.x, self.y, self.z)

    @property
    def extent(self) -> np.ndarray:
        """Axis-aligned size (max - min) per axis."""
        return np.array([a.max - a.min for a in self.axes], np.float64)


@dataclass(frozen=True)
class TemporalToken:
    start: float
    end: float


@dataclass(frozen=True)
class ObjectTokenSet:
    """Everything the pipeline keeps about one object at one frame."""

    object_id: int
    timestamp: float
    patches: tuple[PatchToken, ...]
    centroid: CentroidToken
    shape: ShapeToken
    temporal: TemporalToken
    point_indices: np.ndarray
    cameras: tuple[str, ...]

    @property
    def n_points(self) -> int:
        return int(self.point_indices.shape[0])


def grid_edges(length: int, cells: int = GRID) -> np.ndarray:
    """Cell boundaries dividing ``length`` pixels into ``cells`` spans.

    Spans differ by at most one pixel; the longer spans come first.
    Returns ``cells + 1`` increasing edge positions from 0 to length.
    """
    base, rem = divmod(length, cells)
    sizes = np.full(cells, base, np.int64)
    sizes[:rem] += 1
    return np.concatenate(([0], np.cumsum(sizes)))


def isolate_mask(
    image: np.ndarray,
    raster: np.ndarray,
    background: tuple[int, int, int] = BACKGROUND_RGB,
) -> np.ndarray:
    """Copy of ``image`` with everything outside ``raster`` painted flat."""
    image = np.asarray(image)
    raster = np.asarray(raster, dtype=bool)
    if image.shape[:2] != raster.shape:
        raise InvariantViolation(
            f"image {image.shape[:2]} and mask {raster.shape} disagree"
        )
    out = np.empty_like(image)
    out[:] = np.asarray(background, dtype=image.dtype)
    out[raster] = image[raster]
    return out


def grid_patch_tokens(
    raster: np.ndarray, image: np.ndarray | None = None
) -> list[PatchToken]:
    """Patch tokens for the grid cells a mask covers more than half.

    Coverage is the fraction of the cell's pixels inside the mask and must
    exceed 0.5 strictly; degenerate zero-pixel cells (image smaller than
    the grid) are never retained.  When ``image`` is given, each token
    carries its cell's pixels cropped from it.
    """
    raster = np.asarray(raster, dtype=bool)
    if raster.ndim != 2:
        raise InvariantViolation(f"mask must be 2-D, got shape {raster.shape}")
    if image is not None and image.shape[:2] != raster.shape:
        raise InvariantViolation(
            f"image {image.shape[:2]} and mask {raster.shape} disagree"
        )
    height, width = raster.shape
    row_edges = grid_edges(height)
    col_edges = grid_edges(width)
    sat = np.zeros((height + 1, width + 1), np.int64)
    np.cumsum(np.cumsum(raster, axis=0), axis=1, out=sat[1:, 1:])
    r0 = row_edges[:-1][:, None]
    r1 = row_edges[1:][:, None]
    c0 = col_edges[:-1][None, :]
    c1 = col_edges[1:][None, :]
    inside = sat[r1, c1] - sat[r0, c1] - sat[r1, c0] + sat[r0, c0]
    area = (r1 - r0) * (c1 - c0)
    tokens: list[PatchToken] = []
    for row, col in zip(*np.nonzero(2 * inside > area)):
        patch = None
        if image is not None:
            patch = np.ascontiguousarray(
                image[
                    row_edges[row] : row_edges[row + 1],
                    col_edges[col] : col_edges[col + 1],
                ]
            )
        tokens.append(
            PatchToken(
                row=int(row),
                col=int(col),
                coverage=float(inside[row, col] / area[row, col]),
                patch=patch,
            )
        )
    return tokens


def encode_shape(points: np.ndarray) -> tuple[CentroidToken, ShapeToken]:
    """Centroid and per-axis population statistics of a world point set."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise EmptyPointSet(f"points must have shape (N, 3), got {pts.shape}")
    if pts.shape[0] == 0:
        raise EmptyPointSet("cannot encode shape of an empty point set")
    mean = pts.mean(axis=0)
    std = pts.std(axis=0)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    centroid = CentroidToken(x=float(mean[0]), y=float(mean[1]), z=float(mean[2]))
    axes = [
        AxisStats(
            mean=float(mean[d]), std=float(std[d]), min=float(lo[d]), max=float(hi[d])
        )
        for d in range(3)
    ]
    return centroid, ShapeToken(x=axes[0], y=axes[1], z=axes[2])


_CENTROID_TOL = 1e-9


def assemble_step(
    object_id: int,
    timestamp: float,
    patches: list[PatchToken] | tuple[PatchToken, ...],
    centroid: CentroidToken,
    shape: ShapeToken,
    temporal: TemporalToken,
    point_indices: np.ndarray,
    cameras: tuple[str, ...] | list[str],
) -> ObjectTokenSet:
    """Validate the invariants tying the tokens together, then bundle them."""
    patches = tuple(patches)
    if len(patches) > MAX_PATCH_TOKENS:
        raise InvariantViolation(
            f"{len(patches)} patch tokens exceed the {MAX_PATCH_TOKENS} cap"
        )
    seen = set()
    for token in patches:
        if not (0 <= token.row < GRID and 0 <= token.col < GRID):
            raise InvariantViolation(
                f"patch cell ({token.row}, {token.col}) outside the grid"
            )
        if (token.row, token.col) in seen:
            raise InvariantViolation(
                f"duplicate patch cell ({token.row}, {token.col})"
            )
        seen.add((token.row, token.col))
        if not MIN_PATCH_COVERAGE < token.coverage <= 1.0:
            raise InvariantViolation(
                f"patch coverage {token.coverage} outside ({MIN_PATCH_COVERAGE}, 1]"
            )
    indices = np.unique(np.asarray(point_indices, dtype=np.int64))
    if indices.size == 0:
        raise EmptyPointSet("a token set needs at least one source point")
    if temporal.start > temporal.end:
        raise InvariantViolation(
            f"temporal token runs backwards: {temporal.start} > {temporal.end}"
        )
    for name, stats in zip("xyz", shape.axes):
        if not (stats.min <= stats.mean <= stats.max):
            raise InvariantViolation(
                f"shape axis {name}: mean {stats.mean} outside "
                f"[{stats.min}, {stats.max}]"
            )
        if stats.std < 0:
            raise InvariantViolation(f"shape axis {name}: negative spread")
    for name, value, stats in zip(
        "xyz", (centroid.x, centroid.y, centroid.z), shape.axes
    ):
        if abs(value - stats.mean) > _CENTROID_TOL:
            raise InvariantViolation(
                f"centroid {name}={value} disagrees with shape mean {stats.mean}"
            )
    return ObjectTokenSet(
        object_id=int(object_id),
        timestamp=float(timestamp),
        patches=patches,
        centroid=centroid,
        shape=shape,
        temporal=temporal,
        point_indices=indices,
        cameras=tuple(cameras),
    )


def with_object_id(step: ObjectTokenSet, object_id: int) -> ObjectTokenSet:
    return replace(step, object_id=int(object_id))


def with_temporal(step: ObjectTokenSet, start: float, end: float) -> ObjectTokenSet:
    if start > end:
        raise InvariantViolation(f"temporal token runs backwards: {start} > {end}")
    return replace(step, temporal=TemporalToken(start=float(start), end=float(end)))

"""Deterministic stand-ins for the real models.

The stub segmenter answers every prompt group with the axis-aligned
rectangle bounding its points, inflated by a fixed margin and clamped to
the image. The stub responder replays scripted answers keyed by the
SHA-256 of the prompt text, falling back to a stable tag so completions
are never empty.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_MARGIN = 5


def prompt_hash(text: str) -> str:
    """Script key for a prompt: hex SHA-256 of its UTF-8 bytes."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def rect_mask(
    points: np.ndarray, height: int, width: int, margin: int
) -> np.ndarray:
    """Filled rectangle bounding ``points`` plus ``margin`` pixels each way.

    ``points`` is a (k, 2) array of (u, v) pixel coordinates with
    u = column and v = row. Bounds are inclusive, so points (10, 10) and
    (20, 20) with margin 5 light rows 5..25 and columns 5..25. A group
    lying entirely outside the image yields an empty raster.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    raster = np.zeros((height, width), dtype=bool)
    if points.shape[0] == 0:
        return raster
    col_lo = int(np.floor(points[:, 0].min())) - margin
    col_hi = int(np.ceil(points[:, 0].max())) + margin
    row_lo = int(np.floor(points[:, 1].min())) - margin
    row_hi = int(np.ceil(points[:, 1].max())) + margin
    col_lo, col_hi = max(col_lo, 0), min(col_hi, width - 1)
    row_lo, row_hi = max(row_lo, 0), min(row_hi, height - 1)
    if col_lo > col_hi or row_lo > row_hi:
        return raster
    raster[row_lo : row_hi + 1, col_lo : col_hi + 1] = True
    return raster


@dataclass(frozen=True)
class RectSegmenter:
    """Margin-inflated bounding rectangles in place of a learned model."""

    margin: int = DEFAULT_MARGIN
    model_id: str = "stub-rect-segmenter"

    def segment(
        self, image: np.ndarray, groups: list[np.ndarray]
    ) -> list[tuple[np.ndarray, float]]:
        """One (raster, score) per prompt group against ``image``."""
        height, width = image.shape[:2]
        return [
            (rect_mask(group, height, width, self.margin), 1.0)
            for group in groups
        ]

    def start_session(self, image: np.ndarray, groups: list[np.ndarray]) -> object:
        """Propagation state: the prompt groups themselves suffice here."""
        del image
        return tuple(np.asarray(g, np.float64).reshape(-1, 2) for g in groups)

    def propagate(
        self, state: object, image: np.ndarray
    ) -> list[tuple[np.ndarray, float]]:
        """Re-derive the rectangles against the new frame's dimensions."""
        height, width = image.shape[:2]
        return [
            (rect_mask(group, height, width, self.margin), 1.0)
            for group in state
        ]


@dataclass(frozen=True)
class ScriptedResponder:
    """Prompt-hash lookup table in place of a language model."""

    script: dict[str, str] = field(default_factory=dict)
    model_id: str = "stub-scripted-responder"

    def complete(
        self, prompt: str, images: list[str], answer_format: str | None
    ) -> str:
        """Scripted answer for the prompt, or a stable fallback tag."""
        del images, answer_format
        key = prompt_hash(prompt)
        return self.script.get(key) or f"stub:{key[:12]}"


def load_script(path: Path) -> dict[str, str]:
    """Read a JSON object mapping prompt hashes to answer strings."""
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in doc.items()
    ):
        raise ValueError(f"script {path} must map hash strings to answer strings")
    return doc

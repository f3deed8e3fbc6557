"""Point-cloud labeling from tracks and segmentation scoring.

Every tracked object remembers exactly which points it claimed in each
frame, so painting per-point labels back onto a cloud is a lookup, not a
model.  Scoring compares such label arrays with intersection-over-union
per class, averaged; label 0 means unlabeled and is by default excluded
from both the class list and the evaluated region.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvariantViolation, LengthMismatch, MissingProvenance
from .tracking import Track

__all__ = [
    "project_labels",
    "map_to_classes",
    "SegScores",
    "miou",
    "save_label_file",
    "load_label_file",
    "save_label_map",
    "load_label_map",
]

UNLABELED_ID = -1


def project_labels(
    tracks: "list[Track] | tuple[Track, ...]",
    timestamp: float,
    n_points: int,
    tol: float = 1e-9,
) -> np.ndarray:
    """Per-point object ids for one frame; -1 where nothing claimed.

    Each track contributes the point indices of its step at ``timestamp``.
    Claims must be disjoint; overlapping claims mean the structure was
    corrupted and raise.
    """
    if n_points < 0:
        raise ValueError("n_points cannot be negative")
    labels = np.full(n_points, UNLABELED_ID, np.int64)
    for track in sorted(tracks, key=lambda t: t.object_id):
        for step in track.steps:
            if abs(step.timestamp - timestamp) <= tol:
                idx = step.point_indices
                if idx.size and int(idx.max()) >= n_points:
                    raise IndexError(
                        f"track {track.object_id} claims point {int(idx.max())} "
                        f"but the frame has {n_points} points"
                    )
                taken = labels[idx] != UNLABELED_ID
                if taken.any():
                    raise InvariantViolation(
                        f"point {int(idx[taken][0])} claimed by two objects"
                    )
                labels[idx] = track.object_id
                break
    return labels


def map_to_classes(
    object_labels: np.ndarray,
    object_classes: dict[int, int],
    unlabeled_class: int = 0,
) -> np.ndarray:
    """Translate per-point object ids into class labels.

    Every object id present must appear in ``object_classes``; a missing
    entry means the prediction cannot be traced to a class.
    """
    labels = np.asarray(object_labels)
    out = np.full(labels.shape, unlabeled_class, np.int64)
    for object_id in np.unique(labels):
        if object_id == UNLABELED_ID:
            continue
        cls = object_classes.get(int(object_id))
        if cls is None:
            raise MissingProvenance(
                f"object {int(object_id)} has no class assignment"
            )
        out[labels == object_id] = int(cls)
    return out


@dataclass(frozen=True)
class SegScores:
    """Per-class IoU and their mean."""

    per_class: dict[int, float]
    mean: float


def miou(
    pred: np.ndarray,
    gt: np.ndarray,
    ignore_zero_gt: bool = True,
) -> SegScores:
    """Mean intersection-over-union between two label arrays.

    Classes are the union of labels seen on either side.  With
    ``ignore_zero_gt`` (default), class 0 is skipped and points whose
    ground truth is 0 are excluded from every intersection and union.
    Classes with an empty union are skipped; no classes at all scores 0.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise LengthMismatch(
            f"prediction has shape {pred.shape}, ground truth {gt.shape}"
        )
    if pred.ndim != 1:
        raise LengthMismatch("label arrays must be one-dimensional")
    if pred.size and (pred.min() < 0 or gt.min() < 0):
        raise ValueError("class labels cannot be negative")
    if ignore_zero_gt:
        keep = gt != 0
        p, g = pred[keep], gt[keep]
    else:
        p, g = pred, gt
    classes = np.union1d(np.unique(pred), np.unique(gt))
    if ignore_zero_gt:
        classes = classes[classes != 0]
    per_class: dict[int, float] = {}
    if p.size:
        # one confusion matrix pass instead of a scan per class
        lookup = {int(c): i for i, c in enumerate(classes)}
        k = len(classes)
        pi = np.array([lookup.get(int(v), k) for v in p])
        gi = np.array([lookup.get(int(v), k) for v in g])
        conf = np.bincount(gi * (k + 1) + pi, minlength=(k + 1) ** 2).reshape(
            k + 1, k + 1
        )
        for cls, i in lookup.items():
            inter = int(conf[i, i])
            union = int(conf[i, :].sum() + conf[:, i].sum() - conf[i, i])
            if union == 0:
                continue
            per_class[cls] = inter / union
    mean = sum(per_class.values()) / len(per_class) if per_class else 0.0
    return SegScores(per_class=per_class, mean=mean)


def save_label_file(path: str | Path, labels: np.ndarray) -> None:
    """Write class labels as little-endian uint16."""
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() > 65535):
        raise ValueError("labels must fit in uint16")
    Path(path).write_bytes(labels.astype("<u2").tobytes())


def load_label_file(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) % 2:
        raise ValueError(f"{path}: truncated label file")
    return np.frombuffer(data, "<u2").astype(np.int64)


def save_label_map(path: str | Path, classes: dict[int, str]) -> None:
    doc = {str(k): v for k, v in sorted(classes.items())}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))


def load_label_map(path: str | Path) -> dict[int, str]:
    doc = json.loads(Path(path).read_text())
    return {int(k): str(v) for k, v in doc.items()}

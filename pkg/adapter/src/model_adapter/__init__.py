"""HTTP sidecar serving segmentation and inference models.

Four endpoints behind stable wire contracts: /segment for point-prompted
masks, /propagate for video sessions, /infer for text completion, and
/health. A deterministic stub mode stands in for real models during
pipeline tests.
"""

from __future__ import annotations

from .rle import RleError, decode, encode
from .runtime import Lane, LaneTimeout, Responder, Segmenter
from .service import AdapterSettings, create_app
from .sessions import Session, SessionStore
from .stub import (
    DEFAULT_MARGIN,
    RectSegmenter,
    ScriptedResponder,
    load_script,
    prompt_hash,
    rect_mask,
)

__version__ = "0.1.0"

__all__ = [
    "AdapterSettings",
    "DEFAULT_MARGIN",
    "Lane",
    "LaneTimeout",
    "RectSegmenter",
    "Responder",
    "RleError",
    "ScriptedResponder",
    "Segmenter",
    "Session",
    "SessionStore",
    "create_app",
    "decode",
    "encode",
    "load_script",
    "prompt_hash",
    "rect_mask",
    "__version__",
]

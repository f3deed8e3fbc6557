"""Model interfaces and the serialized execution lanes.

Requests are handled concurrently, but each loaded model runs calls one
at a time through its lane. A caller that cannot claim the lane within
the configured wait raises ``LaneTimeout``, which the service maps to a
504 reply.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterator, Protocol, runtime_checkable

import numpy as np


class LaneTimeout(Exception):
    """Could not claim a model's execution lane in time."""


@dataclass
class Lane:
    """One-at-a-time execution slot for a single model."""

    name: str
    timeout_s: float = 30.0
    _lock: threading.Lock = field(default_factory=threading.Lock)

    @contextmanager
    def slot(self) -> Iterator[None]:
        """Hold the lane for one model call, or raise ``LaneTimeout``."""
        if not self._lock.acquire(timeout=self.timeout_s):
            raise LaneTimeout(
                f"{self.name} lane busy for more than {self.timeout_s}s"
            )
        try:
            yield
        finally:
            self._lock.release()


@runtime_checkable
class Segmenter(Protocol):
    """Point-prompted image segmentation with optional video propagation."""

    model_id: str

    def segment(
        self, image: np.ndarray, groups: list[np.ndarray]
    ) -> list[tuple[np.ndarray, float]]:
        """One boolean (H, W) raster and score per prompt group."""

    def start_session(self, image: np.ndarray, groups: list[np.ndarray]) -> object:
        """Build propagation state for a new video session."""

    def propagate(
        self, state: object, image: np.ndarray
    ) -> list[tuple[np.ndarray, float]]:
        """Masks for the session's objects on a later frame."""


@runtime_checkable
class Responder(Protocol):
    """Text completion over a prompt plus optional image attachments."""

    model_id: str

    def complete(
        self, prompt: str, images: list[str], answer_format: str | None
    ) -> str:
        """A nonempty completion."""

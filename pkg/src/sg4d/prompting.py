"""Deterministic prompt rendering and query execution.

The serialized scene structure becomes a plain-text description a
language model can reason over: one block per tracked object, the ego
trajectory, and the spatial relations of the latest frame.  Rendering is
a pure function of the graph, so the same graph always yields the same
prompt, and every answer carries hashes of both the graph and the prompt
for provenance.

Two clients ship here: an in-process mock for tests and offline use, and
an HTTP client speaking ``POST {endpoint}/infer`` with a JSON body
``{"prompt": str}`` answered by ``{"completion": str}``.
"""

from __future__ import annotations

import hashlib
import re
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable

import numpy as np
import requests

from .errors import ClientTimeout, ClientUnavailable
from .graph import SceneGraph4D, graph_sha256, serialize_4dsg
from .refinement import Rejection

__all__ = [
    "PromptContext",
    "render_prompt",
    "QueryClient",
    "MockClient",
    "RemoteClient",
    "QueryResult",
    "query",
    "normalize_answer",
]

_SYSTEM_PREAMBLE = (
    "You are answering questions about a dynamic 3-D scene reconstructed "
    "from sensors. Positions are meters in the scene frame; directions "
    "like left or front are from the observer's point of view. Use only "
    "the facts below."
)

_RELATION_PHRASES = {
    "near": "is near",
    "front_of": "is in front of",
    "behind": "is behind",
    "left_of": "is left of",
    "right_of": "is right of",
    "above": "is above",
    "below": "is below",
}


@dataclass(frozen=True)
class PromptContext:
    """A rendered prompt: fixed preamble, scene facts, optional question."""

    system: str
    scene: str
    question: str | None = None

    @property
    def full_text(self) -> str:
        parts = [self.system, "", self.scene]
        if self.question is not None:
            parts += ["", f"Question: {self.question}"]
        return "\n".join(parts)


def _fmt_point(values) -> str:
    return "({:.2f}, {:.2f}, {:.2f})".format(*(float(v) for v in values))


def render_prompt(
    graph: SceneGraph4D,
    question: str | None = None,
    rejections: list[Rejection] | None = None,
) -> PromptContext:
    """Describe a scene graph as deterministic plain text."""
    lines: list[str] = []
    n_objects = len(graph.tracks)
    lines.append(
        "Scene window: t={:.2f}s to t={:.2f}s, {} frames, {} objects.".format(
            graph.window_start, graph.window_end, len(graph.frames), n_objects
        )
    )
    if graph.ego:
        start = np.asarray(graph.ego[0].pose)[:3, 3]
        end = np.asarray(graph.ego[-1].pose)[:3, 3]
        travel = float(np.linalg.norm(end - start))
        lines.append(
            "Ego: starts at {}, ends at {}, net displacement {:.1f} m.".format(
                _fmt_point(start), _fmt_point(end), travel
            )
        )
    for track in graph.tracks:
        if not track.steps:
            continue
        first, last = track.steps[0], track.steps[-1]
        lines.append(
            "Object {}: {} from t={:.2f}s to t={:.2f}s, {} observations.".format(
                track.object_id,
                track.status,
                first.timestamp,
                last.timestamp,
                len(track.steps),
            )
        )
        extent = last.shape.extent
        lines.append(
            "  position {} -> {}; size {:.2f} x {:.2f} x {:.2f} m.".format(
                _fmt_point(first.centroid.as_array()),
                _fmt_point(last.centroid.as_array()),
                *(float(v) for v in extent),
            )
        )
        dt = last.timestamp - first.timestamp
        if dt > 0:
            moved = float(
                np.linalg.norm(
                    last.centroid.as_array() - first.centroid.as_array()
                )
            )
            lines.append(
                "  average speed {:.1f} m/s over {:.2f}s.".format(moved / dt, dt)
            )
    latest = graph.frames[-1] if graph.frames else None
    if latest is not None and latest.edges:
        lines.append("Relations at t={:.2f}s:".format(latest.timestamp))
        for edge in latest.edges:
            phrase = _RELATION_PHRASES.get(edge.relation, edge.relation)
            lines.append(
                "  object {} {} object {} ({:.2f} m).".format(
                    edge.source, phrase, edge.target, edge.value
                )
            )
    if rejections:
        counts: dict[str, int] = {}
        for r in rejections:
            counts[r.rule_id] = counts.get(r.rule_id, 0) + 1
        summary = ", ".join(f"{counts[k]} by {k}" for k in sorted(counts))
        lines.append(f"Dissolved candidates this window: {summary}.")
    return PromptContext(
        system=_SYSTEM_PREAMBLE, scene="\n".join(lines), question=question
    )


class QueryClient(ABC):
    """Anything that can complete a prompt."""

    client_id: str

    @abstractmethod
    def complete(self, prompt: str) -> str:
        """Return the model's answer for the prompt."""


class MockClient(QueryClient):
    """Scripted client for tests and offline runs.

    Accepts either a dict mapping a question substring to an answer, or a
    callable from the full prompt to an answer.
    """

    client_id = "mock"

    def __init__(self, script: "dict[str, str] | Callable[[str], str]"):
        self._script = script

    def complete(self, prompt: str) -> str:
        if callable(self._script):
            return self._script(prompt)
        for needle in sorted(self._script):
            if needle in prompt:
                return self._script[needle]
        return ""


class RemoteClient(QueryClient):
    """Client for an inference sidecar speaking the /infer contract."""

    def __init__(self, endpoint: str, timeout: float = 60.0, session=None):
        self._endpoint = endpoint.rstrip("/")
        self._timeout = timeout
        self._session = session or requests.Session()
        self.client_id = f"remote:{self._endpoint}"

    def complete(self, prompt: str) -> str:
        try:
            response = self._session.post(
                f"{self._endpoint}/infer",
                json={"prompt": prompt},
                timeout=self._timeout,
            )
        except requests.Timeout as exc:
            raise ClientTimeout(
                f"inference service timed out after {self._timeout}s"
            ) from exc
        except requests.ConnectionError as exc:
            raise ClientUnavailable(
                f"cannot reach inference service at {self._endpoint}"
            ) from exc
        if response.status_code != 200:
            raise ClientUnavailable(
                f"inference service returned {response.status_code}: "
                f"{response.text[:200]}"
            )
        try:
            completion = response.json()["completion"]
        except (ValueError, KeyError) as exc:
            raise ClientUnavailable(
                f"malformed inference response: {exc}"
            ) from exc
        if not isinstance(completion, str):
            raise ClientUnavailable("inference response completion is not text")
        return completion


@dataclass(frozen=True)
class QueryResult:
    """An answer plus everything needed to audit how it was produced."""

    question: str
    answer: str
    prompt: str
    graph_sha256: str
    prompt_sha256: str
    client_id: str
    latency_s: float


def query(
    graph: SceneGraph4D,
    question: str,
    client: QueryClient,
    rejections: list[Rejection] | None = None,
) -> QueryResult:
    """Render the graph, ask the client, and package the provenance."""
    context = render_prompt(graph, question=question, rejections=rejections)
    prompt = context.full_text
    serialized = serialize_4dsg(graph)
    started = time.perf_counter()
    answer = client.complete(prompt)
    latency = time.perf_counter() - started
    return QueryResult(
        question=question,
        answer=normalize_answer(answer),
        prompt=prompt,
        graph_sha256=graph_sha256(serialized),
        prompt_sha256=hashlib.sha256(prompt.encode("utf-8")).hexdigest(),
        client_id=client.client_id,
        latency_s=latency,
    )


def normalize_answer(text: str) -> str:
    """Collapse runs of whitespace and trim; applying it twice is a no-op."""
    return re.sub(r"\s+", " ", text).strip()

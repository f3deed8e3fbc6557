"""Training-free 4D scene graphs from point clouds and multi-camera images.

The top level re-exports the driving surface: configuration, the frame
pipeline, graph serialization, and querying. Specialist pieces stay in
their submodules (`clustering`, `geometry`, `tokens`, `refinement`,
`tracking`, `segbackends`, `prompting`, `lidarseg`, `synth`, `sceneio`).
"""

from __future__ import annotations

from .config import (
    ConfigError,
    PipelineConfig,
    config_from_dict,
    config_to_dict,
    load_config,
)
from .graph import assemble_4dsg, deserialize_4dsg, graph_sha256, serialize_4dsg
from .pipeline import FrameReport, PipelineResult, run_pipeline
from .prompting import MockClient, RemoteClient, query, render_prompt

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "FrameReport",
    "MockClient",
    "PipelineConfig",
    "PipelineResult",
    "RemoteClient",
    "assemble_4dsg",
    "config_from_dict",
    "config_to_dict",
    "deserialize_4dsg",
    "graph_sha256",
    "load_config",
    "query",
    "render_prompt",
    "run_pipeline",
    "serialize_4dsg",
    "__version__",
]

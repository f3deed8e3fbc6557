"""Shared fixtures: app instances, a test client, sample images."""

from __future__ import annotations

import base64
import io
import json
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from model_adapter import AdapterSettings, create_app
from model_adapter.stub import prompt_hash

REPO_OPENAPI = Path(__file__).resolve().parent.parent / "openapi.json"

SCRIPT = {
    prompt_hash("How many movers?"): "3",
    prompt_hash("What color is the cart?"): "red",
}


def png_b64(image: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(image, np.uint8)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def sample_image(height: int = 40, width: int = 60) -> np.ndarray:
    rows = np.arange(height, dtype=np.uint8)[:, None]
    cols = np.arange(width, dtype=np.uint8)[None, :]
    return np.stack(
        [rows + 0 * cols, 0 * rows + cols, rows + cols], axis=-1
    ).astype(np.uint8)


@pytest.fixture(scope="module")
def stub_app():
    return create_app(AdapterSettings(stub=True, script=dict(SCRIPT)))


@pytest.fixture(scope="module")
def client(stub_app):
    with TestClient(stub_app) as c:
        yield c


@pytest.fixture()
def unloaded_client():
    with TestClient(create_app(AdapterSettings(stub=False))) as c:
        yield c


@pytest.fixture(scope="session")
def repo_openapi() -> dict:
    return json.loads(REPO_OPENAPI.read_text())

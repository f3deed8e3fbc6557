"""HTTP service wiring for the model sidecar.

One FastAPI app exposes four endpoints: point-prompted segmentation,
session propagation, text inference, and health. Stub mode serves the
deterministic stand-ins; real mode serves whatever ``Segmenter`` and
``Responder`` implementations the caller injects, answering 503 until
both are present.
"""

from __future__ import annotations

import base64
import binascii
import io
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.encoders import jsonable_encoder
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from PIL import Image, UnidentifiedImageError

from . import rle
from .runtime import Lane, LaneTimeout, Responder, Segmenter
from .sessions import SessionStore
from .stub import DEFAULT_MARGIN, RectSegmenter, ScriptedResponder
from .wire import (
    ErrorResponse,
    HealthResponse,
    InferRequest,
    InferResponse,
    MaskPayload,
    PropagateRequest,
    RlePayload,
    SegmentRequest,
    SegmentResponse,
    TokenUsage,
)

API_VERSION = "0.1.0"


@dataclass(frozen=True)
class AdapterSettings:
    """Knobs for one service instance."""

    stub: bool = True
    margin: int = DEFAULT_MARGIN
    script: dict[str, str] = field(default_factory=dict)
    session_ttl_s: float = 300.0
    lane_timeout_s: float = 30.0


def _decode_image(data_b64: str) -> np.ndarray:
    """Base64 PNG to an (H, W, 3) uint8 array, or a 400 reply."""
    try:
        raw = base64.b64decode(data_b64, validate=True)
        image = Image.open(io.BytesIO(raw))
        image.load()
    except (binascii.Error, ValueError, OSError, UnidentifiedImageError) as exc:
        raise HTTPException(
            status_code=400, detail=f"invalid image_png_b64: {exc}"
        ) from exc
    return np.asarray(image.convert("RGB"), dtype=np.uint8)


def _mask_payloads(results: list[tuple[np.ndarray, float]]) -> list[MaskPayload]:
    return [
        MaskPayload(rle=RlePayload(**rle.encode(raster)), score=float(score))
        for raster, score in results
    ]


def create_app(
    settings: AdapterSettings | None = None,
    segmenter: Segmenter | None = None,
    responder: Responder | None = None,
) -> FastAPI:
    """Build the service; injected models win over the stub pair."""
    settings = settings or AdapterSettings()
    if settings.stub:
        segmenter = segmenter or RectSegmenter(margin=settings.margin)
        responder = responder or ScriptedResponder(script=settings.script)
    mode = "stub" if settings.stub else "real"

    app = FastAPI(
        title="model-adapter",
        version=API_VERSION,
        description=(
            "Sidecar for promptable image segmentation and text inference. "
            "Masks travel run-length encoded; sessions carry video state."
        ),
    )
    app.state.settings = settings
    app.state.segmenter = segmenter
    app.state.responder = responder
    app.state.sessions = SessionStore(ttl_s=settings.session_ttl_s)
    app.state.lanes = {
        "segment": Lane("segment", settings.lane_timeout_s),
        "infer": Lane("infer", settings.lane_timeout_s),
    }

    @app.exception_handler(RequestValidationError)
    def _schema_error(request: Request, exc: RequestValidationError):
        del request
        return JSONResponse(
            status_code=400, content={"detail": jsonable_encoder(exc.errors())}
        )

    @app.exception_handler(LaneTimeout)
    def _lane_timeout(request: Request, exc: LaneTimeout):
        del request
        return JSONResponse(status_code=504, content={"detail": str(exc)})

    def _require_segmenter() -> Segmenter:
        if app.state.segmenter is None:
            raise HTTPException(status_code=503, detail="segmentation model not loaded")
        return app.state.segmenter

    def _require_responder() -> Responder:
        if app.state.responder is None:
            raise HTTPException(status_code=503, detail="inference model not loaded")
        return app.state.responder

    @app.get(
        "/health",
        response_model=HealthResponse,
        responses={503: {"model": HealthResponse}},
    )
    def health():
        """Readiness: 200 once both models answer, 503 while loading."""
        models = [
            m.model_id
            for m in (app.state.segmenter, app.state.responder)
            if m is not None
        ]
        if len(models) < 2:
            return JSONResponse(
                status_code=503,
                content=HealthResponse(
                    status="loading", mode=mode, models=models
                ).model_dump(),
            )
        return HealthResponse(status="ok", mode=mode, models=models)

    @app.post(
        "/segment",
        response_model=SegmentResponse,
        responses={
            400: {"model": ErrorResponse},
            503: {"model": ErrorResponse},
            504: {"model": ErrorResponse},
        },
    )
    def segment(body: SegmentRequest):
        """One mask per prompt group; opens a session when asked to."""
        model = _require_segmenter()
        image = _decode_image(body.image_png_b64)
        groups = [
            np.asarray(group, dtype=np.float64).reshape(-1, 2)
            for group in body.prompt_groups
        ]
        with app.state.lanes["segment"].slot():
            results = model.segment(image, groups)
            if body.session_id is not None:
                state = model.start_session(image, groups)
                app.state.sessions.put(body.session_id, state)
        return SegmentResponse(
            masks=_mask_payloads(results), session_id=body.session_id
        )

    @app.post(
        "/propagate",
        response_model=SegmentResponse,
        responses={
            400: {"model": ErrorResponse},
            503: {"model": ErrorResponse},
            504: {"model": ErrorResponse},
        },
    )
    def propagate(body: PropagateRequest):
        """Masks for an open session's objects on a new frame."""
        model = _require_segmenter()
        session = app.state.sessions.get(body.session_id)
        if session is None:
            raise HTTPException(
                status_code=400,
                detail=f"unknown or expired session {body.session_id!r}",
            )
        image = _decode_image(body.image_png_b64)
        with app.state.lanes["segment"].slot():
            results = model.propagate(session.state, image)
        return SegmentResponse(
            masks=_mask_payloads(results), session_id=body.session_id
        )

    @app.post(
        "/infer",
        response_model=InferResponse,
        responses={
            400: {"model": ErrorResponse},
            503: {"model": ErrorResponse},
            504: {"model": ErrorResponse},
        },
    )
    def infer(body: InferRequest):
        """Complete the prompt; the answer is never empty on 200."""
        model = _require_responder()
        with app.state.lanes["infer"].slot():
            completion = model.complete(body.prompt, body.images, body.answer_format)
        return InferResponse(
            completion=completion,
            model_id=model.model_id,
            token_usage=TokenUsage(
                prompt_tokens=len(body.prompt.split()),
                completion_tokens=len(completion.split()),
            ),
        )

    return app

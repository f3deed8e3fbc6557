"""Request and response bodies for the sidecar endpoints.

Field names mirror what the pipeline's remote segmentation backend and
remote query client put on the wire, so either side can be swapped without
a translation layer. Unknown fields are rejected to keep schema errors
loud.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class RlePayload(BaseModel):
    """Alternating run lengths over a row-major raster, zeros first."""

    model_config = ConfigDict(extra="forbid")

    size: tuple[int, int] = Field(description="Raster dims as [height, width].")
    counts: list[int] = Field(description="Alternating zero/one run lengths.")


class MaskPayload(BaseModel):
    """One mask with its confidence."""

    model_config = ConfigDict(extra="forbid")

    rle: RlePayload
    score: float = 1.0


class SegmentRequest(BaseModel):
    """Point-prompted segmentation of a single image."""

    model_config = ConfigDict(extra="forbid")

    image_png_b64: str = Field(min_length=1, description="PNG bytes, base64.")
    prompt_groups: list[list[tuple[float, float]]] = Field(
        description="Per object, (u, v) pixel points with u = column, v = row."
    )
    session_id: str | None = Field(
        default=None,
        description="Opens or reuses propagation state under this key.",
    )
    camera_id: str | None = None
    timestamp: float | None = None
    frame_index: int | None = None


class SegmentResponse(BaseModel):
    """One mask per prompt group, in request order."""

    model_config = ConfigDict(extra="forbid")

    masks: list[MaskPayload]
    session_id: str | None = None


class PropagateRequest(BaseModel):
    """Carry an open session's objects onto a new frame."""

    model_config = ConfigDict(extra="forbid")

    session_id: str = Field(min_length=1)
    image_png_b64: str = Field(min_length=1)
    timestamp: float | None = None
    frame_index: int | None = None


class InferRequest(BaseModel):
    """Free-form text inference with optional image attachments."""

    model_config = ConfigDict(extra="forbid")

    prompt: str = Field(min_length=1)
    images: list[str] = Field(
        default_factory=list, description="PNG bytes, base64, in prompt order."
    )
    answer_format: str | None = Field(
        default=None, description="Hint such as 'integer' or 'single word'."
    )


class TokenUsage(BaseModel):
    """Rough token accounting for one completion."""

    model_config = ConfigDict(extra="forbid")

    prompt_tokens: int = Field(ge=0)
    completion_tokens: int = Field(ge=0)


class InferResponse(BaseModel):
    """A nonempty completion plus provenance."""

    model_config = ConfigDict(extra="forbid")

    completion: str = Field(min_length=1)
    model_id: str
    token_usage: TokenUsage


class HealthResponse(BaseModel):
    """Service readiness."""

    model_config = ConfigDict(extra="forbid")

    status: str = Field(description="'ok' once models are ready, else 'loading'.")
    mode: str | None = None
    models: list[str] = Field(default_factory=list)


class ErrorResponse(BaseModel):
    """Body shape for 4xx and 5xx replies."""

    detail: object

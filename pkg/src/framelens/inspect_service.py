"""HTTP service for interactive single-frame analysis.

A human submits one still image plus a free-form prompt; the service forwards
both to the inference endpoint and returns the model text verbatim. Nothing
on this path is schema-enforced: no contract template, no JSON extraction, no
validation, and the response always carries a disclaimer saying so. The
service never writes detections artifacts.
"""

from __future__ import annotations

import base64
import binascii
import logging
import threading
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import cv2
import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .contract import ChatMessage, ChatRequest, ImagePart, TextPart
from .gateway import EndpointConfig, ErrorKind, ProviderError, send_with_retry
from .sampler import SamplerError, extract_frame_at, probe_video, sample_timestamps

log = logging.getLogger(__name__)

DISCLAIMER = "qualitative inspection, not a structured artifact"
DEFAULT_INSPECT_MAX_TOKENS = 512

_STATUS_BY_KIND = {
    ErrorKind.RATE_LIMITED: 429,
    ErrorKind.AUTH_FAILED: 502,
    ErrorKind.TIMEOUT: 504,
    ErrorKind.SERVER_ERROR: 502,
    ErrorKind.NETWORK_ERROR: 502,
    ErrorKind.MALFORMED_RESPONSE: 502,
}


class InspectBody(BaseModel):
    prompt: str
    image: str
    session_id: str | None = None


@dataclass
class InspectSettings:
    endpoint: EndpointConfig
    interval_s: float = 1.0
    max_tokens: int = DEFAULT_INSPECT_MAX_TOKENS
    ui_dir: Path | None = None
    videos: list[Path] = dc_field(default_factory=list)


def decode_image_field(value: str) -> tuple[bytes, str]:
    """Accept a data: URL or bare base64; return (bytes, media_type).

    The bytes must decode as an image (checked with an actual decoder, not by
    sniffing magic numbers); anything else raises ValueError.
    """
    media_type = "image/jpeg"
    payload = value
    if value.startswith("data:"):
        header, _, payload = value.partition(",")
        if not payload:
            raise ValueError("data URL carries no payload")
        media_type = header[len("data:") :].split(";", 1)[0] or media_type
    try:
        raw = base64.b64decode(payload, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ValueError(f"image is not valid base64: {exc}") from exc
    decoded = cv2.imdecode(np.frombuffer(raw, np.uint8), cv2.IMREAD_COLOR)
    if decoded is None:
        raise ValueError("image bytes do not decode as an image")
    return raw, media_type


def build_inspect_request(
    prompt: str, image: bytes, media_type: str, width: int, height: int, config: InspectSettings
) -> ChatRequest:
    """Single-image chat request with the prompt verbatim; no contract template."""
    return ChatRequest(
        model_id=config.endpoint.model_id,
        messages=(
            ChatMessage(
                role="user",
                parts=(
                    TextPart(prompt),
                    ImagePart(
                        frame_index=0,
                        width=width,
                        height=height,
                        media_type=media_type,
                        data=image,
                    ),
                ),
            ),
        ),
        max_tokens=config.max_tokens,
        temperature=0.0,
    )


def nearest_grid_index(t: float, grid: list[float], interval_s: float) -> int:
    return max(0, min(round(t / interval_s), len(grid) - 1))


def create_app(settings: InspectSettings, transport=None) -> FastAPI:
    """Build the service; transport defaults to the real retrying gateway."""
    send = transport or (lambda request, endpoint: send_with_retry(request, endpoint))
    app = FastAPI(title="framelens inspection service")
    app.state.settings = settings
    app.state.videos = {}
    app.state.video_lock = threading.Lock()

    for path in settings.videos:
        register_video(app, path)

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/api/inspect")
    def inspect(body: InspectBody) -> dict:
        prompt = body.prompt.strip()
        if not prompt:
            raise HTTPException(status_code=400, detail="prompt must be non-empty")
        try:
            image, media_type = decode_image_field(body.image)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

        decoded = cv2.imdecode(np.frombuffer(image, np.uint8), cv2.IMREAD_COLOR)
        height, width = decoded.shape[:2]
        request = build_inspect_request(
            body.prompt, image, media_type, width, height, settings
        )
        started = time.monotonic()
        try:
            text = send(request, settings.endpoint)
        except ProviderError as err:
            # Full detail stays in the server log; the client sees the kind only.
            log.warning("inspect call failed: %s", err)
            status = _STATUS_BY_KIND.get(err.kind, 502)
            headers = {}
            if err.kind is ErrorKind.RATE_LIMITED and err.retry_after_s is not None:
                headers["Retry-After"] = str(err.retry_after_s)
            raise HTTPException(
                status_code=status,
                detail=f"provider error ({err.kind.value})",
                headers=headers or None,
            ) from err
        latency_ms = int((time.monotonic() - started) * 1000)

        response = {
            "text": text,
            "model_id": settings.endpoint.model_id,
            "latency_ms": latency_ms,
            "disclaimer": DISCLAIMER,
        }
        if body.session_id is not None:
            response["session_id"] = body.session_id
        return response

    @app.get("/api/frames/{video_id}")
    def frame_fetch(video_id: str, t: float) -> Response:
        with app.state.video_lock:
            registered = app.state.videos.get(video_id)
        if registered is None:
            raise HTTPException(status_code=404, detail=f"unknown video id {video_id!r}")
        meta, grid = registered
        if t < 0 or t >= meta.duration_s or not grid:
            raise HTTPException(
                status_code=416,
                detail=f"timestamp {t} outside [0, {meta.duration_s})",
            )
        index = nearest_grid_index(t, grid, settings.interval_s)
        try:
            frame = extract_frame_at(meta, grid[index])
        except SamplerError as exc:
            raise HTTPException(status_code=502, detail=f"frame extraction failed: {exc}") from exc
        return Response(
            content=frame.image,
            media_type=f"image/{frame.format}",
            headers={
                "X-Frame-Index": str(index),
                "X-Timestamp-S": f"{grid[index]:.6f}",
            },
        )

    if settings.ui_dir is not None and Path(settings.ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(settings.ui_dir), html=True), name="ui")

    return app


def register_video(app: FastAPI, path: str | Path) -> str:
    """Register a video for frame fetching; the id is the file stem."""
    meta = probe_video(path)
    grid = sample_timestamps(meta.duration_s, app.state.settings.interval_s)
    video_id = Path(path).stem
    with app.state.video_lock:
        app.state.videos[video_id] = (meta, grid)
    return video_id

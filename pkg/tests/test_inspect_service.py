"""Tests for the interactive single-frame inspection service.

The FastAPI app is driven through TestClient with the transport stubbed, so
no real inference endpoint is involved; provider failures are injected as
ProviderError values.
"""

import base64

import cv2
import numpy as np
import pytest
from fastapi.testclient import TestClient

from conftest import fast_endpoint, write_video
from framelens.contract import ImagePart, TextPart
from framelens.gateway import ErrorKind, ProviderError
from framelens.inspect_service import (
    DISCLAIMER,
    InspectSettings,
    create_app,
    decode_image_field,
    nearest_grid_index,
    register_video,
)


def png_bytes(width=16, height=12, value=90):
    ok, buf = cv2.imencode(".png", np.full((height, width, 3), value, np.uint8))
    assert ok
    return buf.tobytes()


def png_b64(**kwargs):
    return base64.b64encode(png_bytes(**kwargs)).decode("ascii")


def make_settings(**overrides):
    defaults = dict(endpoint=fast_endpoint("http://unused.invalid"), interval_s=1.0)
    defaults.update(overrides)
    return InspectSettings(**defaults)


@pytest.fixture
def recording():
    """Transport stub that records requests and returns a fixed text."""
    class Recorder:
        def __init__(self):
            self.requests = []
            self.reply = "a person stands near the door"

        def __call__(self, request, endpoint):
            self.requests.append(request)
            return self.reply

    return Recorder()


@pytest.fixture
def client(recording):
    app = create_app(make_settings(), transport=recording)
    return TestClient(app)


def inspect_body(prompt="what is happening?", image=None, **extra):
    body = {"prompt": prompt, "image": image or png_b64()}
    body.update(extra)
    return body


# --- /api/inspect ---


def test_inspect_returns_model_text_verbatim(client, recording):
    recording.reply = "Seen: ✓ ü 中文 and a dangling {brace"
    response = client.post("/api/inspect", json=inspect_body())
    assert response.status_code == 200
    body = response.json()
    assert body["text"] == recording.reply
    assert body["disclaimer"] == DISCLAIMER
    assert body["model_id"] == "test-model"
    assert isinstance(body["latency_ms"], int)
    assert body["latency_ms"] >= 0
    assert "session_id" not in body


def test_session_id_echoed_when_sent(client):
    response = client.post("/api/inspect", json=inspect_body(session_id="tab-3"))
    assert response.json()["session_id"] == "tab-3"


def test_prompt_and_image_reach_the_request(client, recording):
    prompt = "  describe the posture  "
    client.post("/api/inspect", json=inspect_body(prompt=prompt, image=png_b64(width=20, height=14)))
    assert len(recording.requests) == 1
    request = recording.requests[0]
    parts = request.messages[0].parts
    assert isinstance(parts[0], TextPart)
    assert parts[0].text == prompt
    assert isinstance(parts[1], ImagePart)
    assert (parts[1].width, parts[1].height) == (20, 14)
    assert parts[1].data == png_bytes(width=20, height=14)
    assert request.max_tokens == 512
    assert request.temperature == 0.0


def test_max_tokens_setting_respected(recording):
    app = create_app(make_settings(max_tokens=64), transport=recording)
    TestClient(app).post("/api/inspect", json=inspect_body())
    assert recording.requests[0].max_tokens == 64


def test_data_url_sets_media_type(client, recording):
    client.post(
        "/api/inspect", json=inspect_body(image=f"data:image/png;base64,{png_b64()}")
    )
    assert recording.requests[0].messages[0].parts[1].media_type == "image/png"


def test_bare_base64_defaults_to_jpeg_media_type(client, recording):
    client.post("/api/inspect", json=inspect_body())
    assert recording.requests[0].messages[0].parts[1].media_type == "image/jpeg"


def test_blank_prompt_is_rejected(client):
    response = client.post("/api/inspect", json=inspect_body(prompt="   \n"))
    assert response.status_code == 400
    assert response.json()["detail"] == "prompt must be non-empty"


def test_missing_fields_are_rejected(client):
    assert client.post("/api/inspect", json={"prompt": "hi"}).status_code == 422
    assert client.post("/api/inspect", json={"image": png_b64()}).status_code == 422


def test_invalid_base64_is_rejected(client):
    response = client.post("/api/inspect", json=inspect_body(image="@@not-base64@@"))
    assert response.status_code == 400
    assert "base64" in response.json()["detail"]


def test_non_image_bytes_are_rejected(client):
    payload = base64.b64encode(b"plain text pretending to be a photo").decode()
    response = client.post("/api/inspect", json=inspect_body(image=payload))
    assert response.status_code == 400
    assert "do not decode as an image" in response.json()["detail"]


def test_empty_data_url_is_rejected(client):
    response = client.post("/api/inspect", json=inspect_body(image="data:image/png;base64,"))
    assert response.status_code == 400


@pytest.mark.parametrize(
    "kind,retryable,status",
    [
        (ErrorKind.RATE_LIMITED, True, 429),
        (ErrorKind.AUTH_FAILED, False, 502),
        (ErrorKind.TIMEOUT, True, 504),
        (ErrorKind.SERVER_ERROR, True, 502),
        (ErrorKind.NETWORK_ERROR, True, 502),
        (ErrorKind.MALFORMED_RESPONSE, False, 502),
    ],
)
def test_provider_errors_map_to_http_statuses(kind, retryable, status):
    def failing(request, endpoint):
        raise ProviderError(kind, retryable, "internal detail: key sk-hush-42")

    app = create_app(make_settings(), transport=failing)
    response = TestClient(app).post("/api/inspect", json=inspect_body())
    assert response.status_code == status
    assert response.json()["detail"] == f"provider error ({kind.value})"
    # The provider's own message never reaches the client.
    assert "sk-hush-42" not in response.text


def test_rate_limit_carries_retry_after_header():
    def failing(request, endpoint):
        raise ProviderError(
            ErrorKind.RATE_LIMITED, True, "slow down", http_status=429, retry_after_s=7.0
        )

    app = create_app(make_settings(), transport=failing)
    response = TestClient(app).post("/api/inspect", json=inspect_body())
    assert response.status_code == 429
    assert response.headers["Retry-After"] == "7.0"


# --- /api/frames ---


@pytest.fixture
def video_client(tmp_path, recording):
    video = write_video(tmp_path / "hall.mp4", duration_s=3.0, fps=10.0)
    app = create_app(make_settings(videos=[video]), transport=recording)
    return TestClient(app)


def test_frame_fetch_nearest_grid_point(video_client):
    response = video_client.get("/api/frames/hall", params={"t": 2.3})
    assert response.status_code == 200
    assert response.headers["X-Frame-Index"] == "2"
    assert response.headers["X-Timestamp-S"] == "2.000000"
    assert response.headers["content-type"] == "image/jpeg"
    decoded = cv2.imdecode(np.frombuffer(response.content, np.uint8), cv2.IMREAD_COLOR)
    assert decoded.shape == (48, 64, 3)


def test_frame_fetch_rounds_to_closer_neighbor(video_client):
    assert video_client.get("/api/frames/hall", params={"t": 0.4}).headers["X-Frame-Index"] == "0"
    assert video_client.get("/api/frames/hall", params={"t": 0.6}).headers["X-Frame-Index"] == "1"


def test_frame_fetch_clamps_to_last_grid_point(video_client):
    # 2.999s is in range but rounds past the last sampled frame.
    response = video_client.get("/api/frames/hall", params={"t": 2.999})
    assert response.status_code == 200
    assert response.headers["X-Frame-Index"] == "2"


@pytest.mark.parametrize("t", [-0.1, 3.0, 99.0])
def test_frame_fetch_out_of_range_is_416(video_client, t):
    response = video_client.get("/api/frames/hall", params={"t": t})
    assert response.status_code == 416
    assert "outside [0, 3.0)" in response.json()["detail"]


def test_frame_fetch_unknown_video_is_404(video_client):
    response = video_client.get("/api/frames/ghost", params={"t": 1.0})
    assert response.status_code == 404
    assert "unknown video id 'ghost'" in response.json()["detail"]


def test_register_video_uses_file_stem(tmp_path, recording):
    app = create_app(make_settings(), transport=recording)
    client = TestClient(app)
    assert client.get("/api/frames/late", params={"t": 0.0}).status_code == 404
    video = write_video(tmp_path / "late.mp4", duration_s=2.0)
    assert register_video(app, video) == "late"
    assert client.get("/api/frames/late", params={"t": 0.0}).status_code == 200


def test_nearest_grid_index_clamps():
    grid = [0.0, 1.0, 2.0]
    assert nearest_grid_index(-5.0, grid, 1.0) == 0
    assert nearest_grid_index(0.49, grid, 1.0) == 0
    assert nearest_grid_index(1.9, grid, 1.0) == 2
    assert nearest_grid_index(50.0, grid, 1.0) == 2


def test_decode_image_field_roundtrip():
    raw, media_type = decode_image_field(png_b64())
    assert raw == png_bytes()
    assert media_type == "image/jpeg"
    raw, media_type = decode_image_field(f"data:image/webp;base64,{png_b64()}")
    assert media_type == "image/webp"


# --- service behavior ---


def test_healthz(client):
    response = client.get("/healthz")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_static_ui_mount(tmp_path, recording):
    ui = tmp_path / "dist"
    ui.mkdir()
    (ui / "index.html").write_text("<h1>frame inspector</h1>")
    (ui / "app.js").write_text("console.log('ready');")
    app = create_app(make_settings(ui_dir=ui), transport=recording)
    client = TestClient(app)
    assert "frame inspector" in client.get("/").text
    assert "ready" in client.get("/app.js").text
    # API routes still win over the static mount.
    assert client.get("/healthz").json() == {"status": "ok"}


def test_no_ui_mount_without_directory(client):
    assert client.get("/").status_code == 404


def test_service_writes_no_artifacts(tmp_path, recording):
    video = write_video(tmp_path / "hall.mp4", duration_s=2.0)
    app = create_app(make_settings(videos=[video]), transport=recording)
    client = TestClient(app)
    before = sorted(p.name for p in tmp_path.rglob("*"))
    client.post("/api/inspect", json=inspect_body())
    client.get("/api/frames/hall", params={"t": 1.0})
    after = sorted(p.name for p in tmp_path.rglob("*"))
    assert after == before

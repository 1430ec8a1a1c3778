import json
from pathlib import Path

import cv2
import numpy as np
import pytest

from framelens.artifact import (
    ContractRecord,
    DetectionsArtifact,
    FailureRecord,
    FrameRecord,
    SamplingRecord,
    VideoMetaRecord,
    utc_now_iso,
)
from framelens.gateway import EndpointConfig
from framelens.mock_provider import FailureScript, mock_provider_serve
from framelens.validation import Detection

FIXTURES = Path(__file__).parent / "fixtures"


def write_video(path, duration_s=3.0, fps=10.0, width=64, height=48, pattern="gradient"):
    """Synthetic mp4 written directly with OpenCV, independent of the media tool."""
    writer = cv2.VideoWriter(
        str(path), cv2.VideoWriter_fourcc(*"mp4v"), fps, (width, height)
    )
    assert writer.isOpened(), "mp4v writer unavailable"
    for i in range(round(duration_s * fps)):
        if pattern == "gradient":
            frame = np.zeros((height, width, 3), np.uint8)
            frame[:, :, 0] = (i * 3) % 256
            frame[:, :, 1] = 100
            frame[:, :, 2] = np.linspace(0, 255, width, dtype=np.uint8)[None, :]
        else:
            frame = np.full((height, width, 3), 120, np.uint8)
        writer.write(frame)
    writer.release()
    return path


@pytest.fixture
def make_video(tmp_path):
    def factory(name="clip.mp4", **kwargs):
        return write_video(tmp_path / name, **kwargs)

    return factory


@pytest.fixture(scope="session")
def mock_server():
    handle = mock_provider_serve(FailureScript())
    yield handle
    handle.shutdown()


@pytest.fixture
def mock(mock_server):
    """Session server reset to a clean empty script around each test."""
    mock_server.set_script(FailureScript())
    yield mock_server
    mock_server.set_script(FailureScript())


def fast_endpoint(base_url, **overrides) -> EndpointConfig:
    """Endpoint settings with near-zero backoff so retry tests do not sleep."""
    settings = dict(
        model_id="test-model",
        api_key="",
        timeout_s=5.0,
        max_retries=3,
        backoff_base_s=0.001,
        backoff_factor=2.0,
    )
    settings.update(overrides)
    return EndpointConfig(base_url=base_url, **settings)


def raw_detection(pid=0, x0=10, y0=20, x1=110, y1=220, conf=0.9, emotion="neutral"):
    return {
        "person_id": pid,
        "bbox": {"x_min": x0, "y_min": y0, "x_max": x1, "y_max": y1},
        "confidence": conf,
        "analysis_result": {"emotion": emotion},
    }


def typed_detection(**kwargs) -> Detection:
    return Detection.model_validate(raw_detection(**kwargs))


def build_artifact(
    video_path="clip.mp4",
    frames=None,
    failures=None,
    width=320,
    height=240,
    fps=10.0,
    duration_s=None,
    interval_s=1.0,
) -> DetectionsArtifact:
    """Assemble a well-formed artifact; frames is a list of detection lists
    (None marks a failed frame, paired with a generated failure entry)."""
    frames = [[typed_detection()]] if frames is None else frames
    failures = list(failures) if failures else []
    records = []
    for i, dets in enumerate(frames):
        if dets is None:
            records.append(
                FrameRecord(frame_index=i, timestamp_s=i * interval_s, status="failed", detections=[])
            )
        else:
            records.append(
                FrameRecord(frame_index=i, timestamp_s=i * interval_s, status="ok", detections=dets)
            )
    failed = [r.frame_index for r in records if r.status == "failed"]
    if failed and not failures:
        failures = [
            FailureRecord(
                batch_index=0, frame_indices=failed, error_kind="server_error", detail="scripted"
            )
        ]
    if duration_s is None:
        duration_s = max(len(frames) * interval_s, interval_s)
    return DetectionsArtifact(
        schema_version="1.0",
        created_at=utc_now_iso(),
        video=VideoMetaRecord(
            path=str(video_path), duration_s=duration_s, fps=fps, width=width, height=height
        ),
        sampling=SamplingRecord(interval_s=interval_s, frame_count=len(records)),
        contract=ContractRecord(version_id="v1", template_hash="0" * 64),
        frames=records,
        failures=failures,
    )


def load_fixture(name: str):
    return json.loads((FIXTURES / name).read_text())

"""Versioned on-disk detections artifact.

The artifact is the pipeline's machine-consumable output: every sampled frame
exactly once (ok or failed), every batch failure on record. Unknown fields in
a loaded file are preserved through a write, so future minor versions can add
fields without breaking older readers. Field-for-field format documentation
lives in docs/artifact-format.md.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, ValidationError

from .validation import Detection

SCHEMA_VERSION = "1.0"


class SchemaVersionUnsupported(Exception):
    pass


class ArtifactFormatError(Exception):
    pass


class _Record(BaseModel):
    model_config = ConfigDict(extra="allow")


class VideoMetaRecord(_Record):
    path: str
    duration_s: float
    fps: float
    width: int
    height: int


class SamplingRecord(_Record):
    interval_s: float
    frame_count: int


class ContractRecord(_Record):
    version_id: str
    template_hash: str


class FrameRecord(_Record):
    frame_index: int
    timestamp_s: float
    status: Literal["ok", "failed"]
    detections: list[Detection]


class FailureRecord(_Record):
    """One recorded failure; batch_index is null for sampling-stage failures."""

    batch_index: int | None
    frame_indices: list[int]
    error_kind: str
    detail: str


class DetectionsArtifact(_Record):
    schema_version: str = SCHEMA_VERSION
    created_at: str = ""
    video: VideoMetaRecord
    sampling: SamplingRecord
    contract: ContractRecord
    frames: list[FrameRecord]
    failures: list[FailureRecord]


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds").replace("+00:00", "Z")


def artifact_filename(video_path: str | Path) -> str:
    return f"{Path(video_path).stem}.detections.json"


def check_artifact_invariants(artifact: DetectionsArtifact) -> None:
    """Raise ArtifactFormatError when structural artifact invariants fail."""
    frames = artifact.frames
    for i, frame in enumerate(frames):
        if frame.frame_index != i:
            raise ArtifactFormatError(
                f"frames not sorted/dense: position {i} holds frame_index {frame.frame_index}"
            )
    for prev, cur in zip(frames, frames[1:]):
        if not cur.timestamp_s > prev.timestamp_s:
            raise ArtifactFormatError(
                f"timestamps not strictly increasing at frame {cur.frame_index}"
            )
    if artifact.sampling.frame_count != len(frames):
        raise ArtifactFormatError(
            f"sampling.frame_count {artifact.sampling.frame_count} != {len(frames)} frames"
        )
    failed_covered = set()
    for failure in artifact.failures:
        failed_covered.update(failure.frame_indices)
    for frame in frames:
        if frame.status == "failed":
            if frame.detections:
                raise ArtifactFormatError(
                    f"failed frame {frame.frame_index} carries detections"
                )
            if frame.frame_index not in failed_covered:
                raise ArtifactFormatError(
                    f"failed frame {frame.frame_index} has no matching failures entry"
                )
        seen_ids = set()
        for det in frame.detections:
            if det.person_id in seen_ids:
                raise ArtifactFormatError(
                    f"frame {frame.frame_index} repeats person_id {det.person_id}"
                )
            seen_ids.add(det.person_id)


def write_artifact(artifact: DetectionsArtifact, out_dir: str | Path) -> Path:
    """Serialize to <video-stem>.detections.json under out_dir."""
    check_artifact_invariants(artifact)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / artifact_filename(artifact.video.path)
    payload = json.dumps(artifact.model_dump(mode="json"), indent=2) + "\n"
    path.write_text(payload)
    return path


def load_artifact(path: str | Path) -> DetectionsArtifact:
    """Load and re-check an artifact file; unknown fields are preserved."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise exc
    except ValueError as exc:
        raise ArtifactFormatError(f"not a JSON document: {exc}") from exc
    if not isinstance(raw, dict):
        raise ArtifactFormatError("artifact must be a JSON object")

    version = raw.get("schema_version")
    if not isinstance(version, str) or not version:
        raise ArtifactFormatError("missing schema_version")
    major = version.split(".", 1)[0]
    if major != SCHEMA_VERSION.split(".", 1)[0]:
        raise SchemaVersionUnsupported(
            f"schema_version {version} not supported (reader is {SCHEMA_VERSION})"
        )

    try:
        artifact = DetectionsArtifact.model_validate(raw)
    except ValidationError as exc:
        raise ArtifactFormatError(f"artifact fields invalid: {exc}") from exc
    check_artifact_invariants(artifact)
    return artifact

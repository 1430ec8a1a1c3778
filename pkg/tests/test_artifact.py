"""Artifact serialization: round trips, invariants, version gating."""

import json

import pytest

from framelens.artifact import (
    SCHEMA_VERSION,
    ArtifactFormatError,
    DetectionsArtifact,
    FailureRecord,
    SchemaVersionUnsupported,
    artifact_filename,
    check_artifact_invariants,
    load_artifact,
    utc_now_iso,
    write_artifact,
)
from framelens.validation import Detection
from conftest import build_artifact, raw_detection


def test_filename_follows_video_stem():
    assert artifact_filename("/data/videos/walk.mp4") == "walk.detections.json"
    assert artifact_filename("clip.mov") == "clip.detections.json"


def test_write_then_load_roundtrip(tmp_path):
    artifact = build_artifact(frames=[[raw_detection()], [], [raw_detection(pid=0)]])
    path = write_artifact(artifact, tmp_path)
    assert path.name == "clip.detections.json"
    loaded = load_artifact(path)
    assert loaded == artifact


def test_roundtrip_with_failures(tmp_path):
    artifact = build_artifact(frames=[[raw_detection()], None, None])
    assert [f.status for f in artifact.frames] == ["ok", "failed", "failed"]
    loaded = load_artifact(write_artifact(artifact, tmp_path))
    assert loaded == artifact
    assert loaded.failures == artifact.failures


def test_double_roundtrip_is_stable(tmp_path):
    artifact = build_artifact(frames=[[raw_detection(), raw_detection(pid=1, x0=150, x1=250)]])
    first = write_artifact(artifact, tmp_path / "a")
    second = write_artifact(load_artifact(first), tmp_path / "b")
    assert first.read_text() == second.read_text()


def test_unknown_fields_preserved_through_roundtrip(tmp_path):
    artifact = build_artifact(frames=[[raw_detection()]])
    path = write_artifact(artifact, tmp_path)
    raw = json.loads(path.read_text())
    raw["future_field"] = {"added_by": "a later minor version"}
    raw["frames"][0]["future_flag"] = True
    path.write_text(json.dumps(raw))

    rewritten = write_artifact(load_artifact(path), tmp_path / "again")
    kept = json.loads(rewritten.read_text())
    assert kept["future_field"] == {"added_by": "a later minor version"}
    assert kept["frames"][0]["future_flag"] is True


def test_output_is_readable_json(tmp_path):
    path = write_artifact(build_artifact(frames=[[raw_detection()]]), tmp_path)
    text = path.read_text()
    assert text.endswith("\n")
    assert text.startswith("{\n  ")  # indented for human diffing
    assert json.loads(text)["schema_version"] == SCHEMA_VERSION


def test_unsorted_frames_rejected():
    artifact = build_artifact(frames=[[], []])
    artifact.frames.reverse()
    with pytest.raises(ArtifactFormatError, match="frames not sorted"):
        check_artifact_invariants(artifact)


def test_non_increasing_timestamps_rejected():
    artifact = build_artifact(frames=[[], []])
    artifact.frames[1].timestamp_s = artifact.frames[0].timestamp_s
    with pytest.raises(ArtifactFormatError, match="strictly increasing"):
        check_artifact_invariants(artifact)


def test_frame_count_mismatch_rejected():
    artifact = build_artifact(frames=[[], []])
    artifact.sampling.frame_count = 3
    with pytest.raises(ArtifactFormatError, match="frame_count"):
        check_artifact_invariants(artifact)


def test_failed_frame_with_detections_rejected():
    artifact = build_artifact(frames=[None])
    artifact.frames[0].detections = [Detection.model_validate(raw_detection())]
    with pytest.raises(ArtifactFormatError, match="carries detections"):
        check_artifact_invariants(artifact)


def test_failed_frame_without_failure_entry_rejected():
    artifact = build_artifact(frames=[None])
    artifact.failures = []
    with pytest.raises(ArtifactFormatError, match="no matching failures entry"):
        check_artifact_invariants(artifact)


def test_repeated_person_id_rejected():
    artifact = build_artifact(frames=[[raw_detection(pid=0), raw_detection(pid=0)]])
    with pytest.raises(ArtifactFormatError, match="repeats person_id"):
        check_artifact_invariants(artifact)


def test_write_refuses_invalid_artifact(tmp_path):
    artifact = build_artifact(frames=[[], []])
    artifact.sampling.frame_count = 99
    with pytest.raises(ArtifactFormatError):
        write_artifact(artifact, tmp_path)
    assert list(tmp_path.iterdir()) == []  # nothing half-written


def test_future_major_version_refused(tmp_path):
    artifact = build_artifact(frames=[[]])
    path = write_artifact(artifact, tmp_path)
    raw = json.loads(path.read_text())
    raw["schema_version"] = "99.0"
    path.write_text(json.dumps(raw))
    with pytest.raises(SchemaVersionUnsupported):
        load_artifact(path)


def test_minor_version_bump_accepted(tmp_path):
    path = write_artifact(build_artifact(frames=[[]]), tmp_path)
    raw = json.loads(path.read_text())
    raw["schema_version"] = "1.7"
    path.write_text(json.dumps(raw))
    assert load_artifact(path).schema_version == "1.7"


def test_missing_schema_version(tmp_path):
    path = write_artifact(build_artifact(frames=[[]]), tmp_path)
    raw = json.loads(path.read_text())
    del raw["schema_version"]
    path.write_text(json.dumps(raw))
    with pytest.raises(ArtifactFormatError, match="schema_version"):
        load_artifact(path)


def test_not_json_and_not_object(tmp_path):
    bad = tmp_path / "x.detections.json"
    bad.write_text("garbage{{{")
    with pytest.raises(ArtifactFormatError, match="not a JSON document"):
        load_artifact(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ArtifactFormatError, match="JSON object"):
        load_artifact(bad)


def test_load_validates_field_types(tmp_path):
    path = write_artifact(build_artifact(frames=[[]]), tmp_path)
    raw = json.loads(path.read_text())
    raw["frames"][0]["status"] = "maybe"
    path.write_text(json.dumps(raw))
    with pytest.raises(ArtifactFormatError, match="fields invalid"):
        load_artifact(path)


def test_load_rechecks_invariants(tmp_path):
    path = write_artifact(build_artifact(frames=[[], []]), tmp_path)
    raw = json.loads(path.read_text())
    raw["frames"][0]["frame_index"] = 5  # corrupt on disk after a valid write
    path.write_text(json.dumps(raw))
    with pytest.raises(ArtifactFormatError):
        load_artifact(path)


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        load_artifact(tmp_path / "absent.detections.json")


def test_null_batch_index_failure_is_valid(tmp_path):
    artifact = build_artifact(frames=[[]])
    artifact.failures.append(FailureRecord(
        batch_index=None, frame_indices=[], error_kind="decode_failed",
        detail="t=3.0 did not decode",
    ))
    loaded = load_artifact(write_artifact(artifact, tmp_path))
    assert loaded.failures[-1].batch_index is None


def test_utc_now_iso_shape():
    stamp = utc_now_iso()
    assert stamp.endswith("Z")
    assert "T" in stamp


def test_model_requires_core_fields():
    with pytest.raises(Exception):
        DetectionsArtifact.model_validate({"schema_version": "1.0"})

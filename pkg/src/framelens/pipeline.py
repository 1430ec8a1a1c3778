"""Best-effort run coordination.

One run takes a video through sampling, contiguous batching, inference,
extraction, and validation, then writes one detections artifact plus one
validation report. A batch that fails marks only its own frames failed and is
recorded in the artifact's failures list; the run itself completes whenever
sampling succeeds. Only three conditions are fatal: an unreadable video, an
unwritable output directory, and a credential failure (which aborts the run,
leaving a stub artifact in which every frame is failed).
"""

from __future__ import annotations

import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Sequence

from .artifact import (
    SCHEMA_VERSION,
    ContractRecord,
    DetectionsArtifact,
    FailureRecord,
    FrameRecord,
    SamplingRecord,
    VideoMetaRecord,
    utc_now_iso,
    write_artifact,
)
from .contract import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
    AttributeSpec,
    ChatRequest,
    ContractError,
    ContractVersion,
    EmptyBatch,
    MalformedJson,
    NoJsonFound,
    OversizedPayload,
    WrongShape,
    build_batch_request,
    extract_json_payload,
    load_contract_version,
    parse_batch_detections,
)
from .gateway import EndpointConfig, ErrorKind, ProviderError, send_with_retry
from .sampler import FrameSample, VideoMeta, probe_video, sample_frames
from .validation import (
    Detection,
    GeometryPolicy,
    ValidationReport,
    typed_detections,
    validate_geometric,
    validate_structural,
)

log = logging.getLogger(__name__)

DEFAULT_INTERVAL_S = 1.0
DEFAULT_MAX_FRAMES = 1000

# transport(request, endpoint) -> assistant text; tests swap this for a stub
Transport = Callable[[ChatRequest, EndpointConfig], str]


class PipelineAborted(Exception):
    """Credential failure killed the run; a stub artifact was still written."""

    def __init__(self, message: str, artifact: DetectionsArtifact, artifact_path: Path):
        super().__init__(message)
        self.artifact = artifact
        self.artifact_path = artifact_path


@dataclass(frozen=True)
class PipelineConfig:
    video_path: Path
    endpoint: EndpointConfig
    out_dir: Path
    interval_s: float = DEFAULT_INTERVAL_S
    max_frames: int = DEFAULT_MAX_FRAMES
    batch_size: int = DEFAULT_BATCH_SIZE
    geometry_policy: GeometryPolicy = GeometryPolicy.WARN
    attribute_spec: AttributeSpec = dc_field(default_factory=AttributeSpec)
    contract_version_id: str = "v1"
    parallel_batches: int = 1
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self) -> None:
        object.__setattr__(self, "video_path", Path(self.video_path))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.parallel_batches < 1:
            raise ValueError("parallel_batches must be >= 1")
        if self.interval_s <= 0:
            raise ValueError("interval_s must be positive")
        if self.max_frames < 0:
            raise ValueError("max_frames must be >= 0")


def report_filename(video_path: str | Path) -> str:
    return f"{Path(video_path).stem}.detections.report.json"


def write_report(
    video_path: str | Path,
    reports: Sequence[ValidationReport],
    out_dir: str | Path,
    *,
    geometry_policy: GeometryPolicy = GeometryPolicy.WARN,
    run_notes: Sequence[str] = (),
) -> Path:
    """Serialize per-batch validation reports next to the artifact."""
    payload = {
        "schema_version": SCHEMA_VERSION,
        "created_at": utc_now_iso(),
        "video": str(video_path),
        "geometry_policy": geometry_policy.value,
        "notes": list(run_notes),
        "batch_reports": [r.to_json() for r in reports],
    }
    path = Path(out_dir) / report_filename(video_path)
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


_CONTRACT_ERROR_KINDS = {
    EmptyBatch: "empty_batch",
    OversizedPayload: "oversized_payload",
    NoJsonFound: "no_json_found",
    MalformedJson: "malformed_json",
    WrongShape: "wrong_shape",
}


def _contract_error_kind(exc: ContractError) -> str:
    return _CONTRACT_ERROR_KINDS.get(type(exc), "contract_error")


@dataclass
class _BatchOutcome:
    batch_index: int
    report: ValidationReport
    detections: dict[int, list[Detection]]
    failure: FailureRecord | None
    auth_error: ProviderError | None = None


def _failed_outcome(batch_index: int, indices: list[int], kind: str, detail: str) -> _BatchOutcome:
    return _BatchOutcome(
        batch_index=batch_index,
        report=ValidationReport(batch_index=batch_index),
        detections={},
        failure=FailureRecord(
            batch_index=batch_index, frame_indices=indices, error_kind=kind, detail=detail
        ),
    )


def _summarize_structural(report: ValidationReport, failed: list[int]) -> str:
    relevant = [e for e in report.structural_errors if e.frame_index in set(failed)]
    head = "; ".join(f"{e.path}: {e.kind}" for e in relevant[:5])
    more = f" (+{len(relevant) - 5} more)" if len(relevant) > 5 else ""
    return f"{len(relevant)} structural error(s): {head}{more}"


def _process_batch(
    batch_index: int,
    frames: list[FrameSample],
    config: PipelineConfig,
    version: ContractVersion,
    transport: Transport,
    abort: threading.Event,
) -> _BatchOutcome:
    indices = [f.frame_index for f in frames]
    if abort.is_set():
        return _failed_outcome(
            batch_index, indices, "auth_failed", "not attempted: run aborted after credential failure"
        )

    try:
        request = build_batch_request(
            frames,
            config.attribute_spec,
            version,
            config.endpoint.model_id,
            max_tokens=config.max_tokens,
            temperature=config.temperature,
            batch_limit=config.batch_size,
        )
    except ContractError as exc:
        return _failed_outcome(batch_index, indices, _contract_error_kind(exc), str(exc))

    try:
        text = transport(request, config.endpoint)
    except ProviderError as err:
        if err.kind is ErrorKind.AUTH_FAILED:
            abort.set()
            outcome = _failed_outcome(batch_index, indices, err.kind.value, err.detail)
            outcome.auth_error = err
            return outcome
        log.warning("batch %d failed: %s", batch_index, err)
        return _failed_outcome(batch_index, indices, err.kind.value, err.detail)

    try:
        parsed = parse_batch_detections(extract_json_payload(text), indices)
    except ContractError as exc:
        log.warning("batch %d response unusable: %s", batch_index, exc)
        return _failed_outcome(batch_index, indices, _contract_error_kind(exc), str(exc))

    report = validate_structural(parsed, config.attribute_spec, batch_index)
    failed = sorted(report.frames_with_errors())
    detections: dict[int, list[Detection]] = {}
    for frame in frames:
        if frame.frame_index in report.frames_with_errors():
            continue
        typed = typed_detections(parsed.entries[frame.frame_index])
        kept, warnings = validate_geometric(
            frame.frame_index, typed, frame.width, frame.height, config.geometry_policy
        )
        report.geometric_warnings.extend(warnings)
        detections[frame.frame_index] = kept

    failure = None
    if failed:
        failure = FailureRecord(
            batch_index=batch_index,
            frame_indices=failed,
            error_kind="structural_error",
            detail=_summarize_structural(report, failed),
        )
    return _BatchOutcome(batch_index, report, detections, failure)


def _default_transport(request: ChatRequest, endpoint: EndpointConfig) -> str:
    return send_with_retry(request, endpoint)


def _require_writable(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"output directory {out_dir} is not writable")


def _assemble(
    config: PipelineConfig,
    meta: VideoMeta,
    version: ContractVersion,
    frame_records: list[FrameRecord],
    failures: list[FailureRecord],
) -> DetectionsArtifact:
    return DetectionsArtifact(
        schema_version=SCHEMA_VERSION,
        created_at=utc_now_iso(),
        video=VideoMetaRecord(
            path=str(config.video_path),
            duration_s=meta.duration_s,
            fps=meta.fps,
            width=meta.width,
            height=meta.height,
        ),
        sampling=SamplingRecord(interval_s=config.interval_s, frame_count=len(frame_records)),
        contract=ContractRecord(version_id=version.version_id, template_hash=version.template_hash),
        frames=frame_records,
        failures=failures,
    )


def run_pipeline(config: PipelineConfig, *, transport: Transport | None = None) -> DetectionsArtifact:
    """Run the full video → artifact pipeline, best effort.

    Returns the written artifact. Raises PipelineAborted on credential
    failure (after writing a stub in which every frame is failed); sampler
    errors and filesystem errors propagate untouched.
    """
    transport = transport or _default_transport
    meta = probe_video(config.video_path)
    _require_writable(config.out_dir)

    sampling = sample_frames(meta, config.interval_s, config.max_frames)
    version = load_contract_version(config.contract_version_id)

    failures: list[FailureRecord] = []
    run_notes: list[str] = []
    for miss in sampling.decode_failures:
        detail = f"frame at t={miss.timestamp_s:.6f}s could not be decoded: {miss.detail}"
        failures.append(
            FailureRecord(batch_index=None, frame_indices=[], error_kind="decode_failed", detail=detail)
        )
        run_notes.append(f"decode_failed: {detail}")

    frames = sampling.frames
    batches = [frames[i : i + config.batch_size] for i in range(0, len(frames), config.batch_size)]
    abort = threading.Event()

    if config.parallel_batches > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=config.parallel_batches) as pool:
            futures = [
                pool.submit(_process_batch, i, batch, config, version, transport, abort)
                for i, batch in enumerate(batches)
            ]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [
            _process_batch(i, batch, config, version, transport, abort)
            for i, batch in enumerate(batches)
        ]

    reports = [o.report for o in outcomes]
    auth_failures = [o for o in outcomes if o.auth_error is not None]
    if auth_failures:
        trigger = min(auth_failures, key=lambda o: o.batch_index)
        detail = f"credential failure: {trigger.auth_error.detail}"
        # Nothing from an unauthenticated run is trusted: the stub marks every
        # frame failed, including batches that happened to finish first.
        failures.extend(
            FailureRecord(
                batch_index=i,
                frame_indices=[f.frame_index for f in batch],
                error_kind="auth_failed",
                detail=detail,
            )
            for i, batch in enumerate(batches)
        )
        frame_records = [
            FrameRecord(
                frame_index=f.frame_index, timestamp_s=f.timestamp_s, status="failed", detections=[]
            )
            for f in frames
        ]
        artifact = _assemble(config, meta, version, frame_records, failures)
        path = write_artifact(artifact, config.out_dir)
        write_report(
            config.video_path,
            reports,
            config.out_dir,
            geometry_policy=config.geometry_policy,
            run_notes=run_notes + [f"aborted: {detail}"],
        )
        raise PipelineAborted(f"run aborted, artifact stub at {path}: {detail}", artifact, path)

    frame_records = []
    for outcome in outcomes:
        if outcome.failure is not None:
            failures.append(outcome.failure)
        failed_set = set(outcome.failure.frame_indices) if outcome.failure else set()
        for frame in batches[outcome.batch_index]:
            if frame.frame_index in failed_set:
                record = FrameRecord(
                    frame_index=frame.frame_index,
                    timestamp_s=frame.timestamp_s,
                    status="failed",
                    detections=[],
                )
            else:
                record = FrameRecord(
                    frame_index=frame.frame_index,
                    timestamp_s=frame.timestamp_s,
                    status="ok",
                    detections=outcome.detections[frame.frame_index],
                )
            frame_records.append(record)

    artifact = _assemble(config, meta, version, frame_records, failures)
    write_artifact(artifact, config.out_dir)
    write_report(
        config.video_path,
        reports,
        config.out_dir,
        geometry_policy=config.geometry_policy,
        run_notes=run_notes,
    )
    return artifact

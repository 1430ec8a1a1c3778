"""Video probing and interval frame sampling via the external media toolchain.

The sampling grid starts at t=0 and is end-exclusive: timestamps k*interval_s
for every k with k*interval_s < duration_s, so the frame count is always
ceil(duration_s / interval_s), truncated to max_frames when given.

All decoding happens in a subprocess (see media_tool.py). The tool binary is
resolved from the FRAMELENS_MEDIA_TOOL environment variable when set,
otherwise the bundled OpenCV-backed tool is used.
"""

from __future__ import annotations

import json
import os
import shlex
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

MEDIA_TOOL_ENV = "FRAMELENS_MEDIA_TOOL"
DEFAULT_STILL_FORMAT = "jpeg"
DEFAULT_STILL_QUALITY = 90

_SUBPROCESS_TIMEOUT_S = 600.0


class SamplerError(Exception):
    """Base class for frame-sampler failures."""


class UnreadableMedia(SamplerError):
    """The toolchain could not parse the file as a video container."""


class ToolchainMissing(SamplerError):
    """The external media tool binary could not be executed."""


@dataclass(frozen=True)
class VideoMeta:
    """Probed stream metadata for one video file."""

    path: str
    duration_s: float
    fps: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.duration_s <= 0 or self.fps <= 0:
            raise ValueError("duration_s and fps must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("width and height must be positive")


@dataclass(frozen=True)
class FrameSample:
    """One decoded frame: dense 0-based index, timestamp, and encoded still."""

    frame_index: int
    timestamp_s: float
    width: int
    height: int
    image: bytes
    format: str


@dataclass(frozen=True)
class DecodeFailure:
    timestamp_s: float
    detail: str


@dataclass
class SamplingResult:
    """Frames that decoded plus a record of grid points that did not.

    Surviving frames are re-indexed densely (0..n-1); a skipped timestamp
    leaves no hole in frame_index, only an entry in decode_failures.
    """

    frames: list[FrameSample] = field(default_factory=list)
    decode_failures: list[DecodeFailure] = field(default_factory=list)


def media_tool_argv() -> list[str]:
    """Resolve the toolchain command prefix.

    FRAMELENS_MEDIA_TOOL may name a binary or a command with arguments
    (split with shell quoting rules, but never run through a shell).
    """
    override = os.environ.get(MEDIA_TOOL_ENV)
    if override:
        return shlex.split(override)
    return [sys.executable, "-m", "framelens.media_tool"]


def _run_tool(args: list[str]) -> subprocess.CompletedProcess:
    argv = media_tool_argv() + args
    try:
        return subprocess.run(
            argv,
            capture_output=True,
            timeout=_SUBPROCESS_TIMEOUT_S,
            check=False,
        )
    except FileNotFoundError as exc:
        raise ToolchainMissing(f"media tool not executable: {argv[0]!r}") from exc
    except PermissionError as exc:
        raise ToolchainMissing(f"media tool not executable: {argv[0]!r}") from exc


def probe_video(path: str | Path) -> VideoMeta:
    """Probe container metadata.

    Raises FileNotFoundError for a missing path, UnreadableMedia when the
    toolchain cannot parse the file, ToolchainMissing when the external
    decoder is absent.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    proc = _run_tool(["probe", str(path)])
    if proc.returncode != 0:
        raise UnreadableMedia(_tool_error_detail(proc))
    try:
        info = json.loads(proc.stdout.decode())
        return VideoMeta(
            path=str(path),
            duration_s=float(info["duration_s"]),
            fps=float(info["fps"]),
            width=int(info["width"]),
            height=int(info["height"]),
        )
    except (ValueError, KeyError) as exc:
        raise UnreadableMedia(f"malformed probe output: {exc}") from exc


def sample_timestamps(
    duration_s: float, interval_s: float, max_frames: int | None = None
) -> list[float]:
    """The sampling grid: k*interval_s for all k with k*interval_s < duration_s."""
    if interval_s <= 0:
        raise ValueError("interval_s must be positive")
    if max_frames is not None and max_frames <= 0:
        return []
    times: list[float] = []
    k = 0
    while True:
        t = k * interval_s
        if t >= duration_s:
            break
        times.append(t)
        if max_frames is not None and len(times) >= max_frames:
            break
        k += 1
    return times


def _extract_stills(
    meta: VideoMeta, times: list[float], image_format: str, quality: int
) -> list[bytes | DecodeFailure]:
    """One toolchain invocation for all timestamps; per-timestamp failures in place."""
    with tempfile.TemporaryDirectory(prefix="framelens-extract-") as tmp:
        proc = _run_tool(
            [
                "extract",
                meta.path,
                "--times",
                ",".join(f"{t:.6f}" for t in times),
                "--out-dir",
                tmp,
                "--format",
                image_format,
                "--quality",
                str(quality),
            ]
        )
        if proc.returncode != 0:
            raise UnreadableMedia(_tool_error_detail(proc))
        try:
            manifest = json.loads(proc.stdout.decode())
            entries = manifest["frames"]
        except (ValueError, KeyError) as exc:
            raise UnreadableMedia(f"malformed extract output: {exc}") from exc
        if len(entries) != len(times):
            raise UnreadableMedia(
                f"extract returned {len(entries)} entries for {len(times)} timestamps"
            )

        stills: list[bytes | DecodeFailure] = []
        for t, entry in zip(times, entries):
            if not entry.get("ok"):
                stills.append(
                    DecodeFailure(timestamp_s=t, detail=str(entry.get("detail", "decode failed")))
                )
            else:
                stills.append(Path(entry["path"]).read_bytes())
        return stills


def sample_frames(
    meta: VideoMeta,
    interval_s: float,
    max_frames: int | None = None,
    *,
    image_format: str = DEFAULT_STILL_FORMAT,
    quality: int = DEFAULT_STILL_QUALITY,
) -> SamplingResult:
    """Extract frames on the sampling grid, skipping (and recording) decode failures.

    Stills are re-encoded at a fixed quality so payload size stays predictable;
    sampling the same file twice yields byte-identical payloads.
    """
    times = sample_timestamps(meta.duration_s, interval_s, max_frames)
    result = SamplingResult()
    if not times:
        return result
    for t, still in zip(times, _extract_stills(meta, times, image_format, quality)):
        if isinstance(still, DecodeFailure):
            result.decode_failures.append(still)
            continue
        result.frames.append(
            FrameSample(
                frame_index=len(result.frames),
                timestamp_s=t,
                width=meta.width,
                height=meta.height,
                image=still,
                format=image_format,
            )
        )
    return result


def extract_frame_at(
    meta: VideoMeta,
    timestamp_s: float,
    *,
    image_format: str = DEFAULT_STILL_FORMAT,
    quality: int = DEFAULT_STILL_QUALITY,
) -> FrameSample:
    """Extract one frame at one timestamp; UnreadableMedia when it cannot decode."""
    if not 0 <= timestamp_s < meta.duration_s:
        raise ValueError(f"timestamp {timestamp_s} outside [0, {meta.duration_s})")
    (still,) = _extract_stills(meta, [timestamp_s], image_format, quality)
    if isinstance(still, DecodeFailure):
        raise UnreadableMedia(still.detail)
    return FrameSample(
        frame_index=0,
        timestamp_s=timestamp_s,
        width=meta.width,
        height=meta.height,
        image=still,
        format=image_format,
    )


def _tool_error_detail(proc: subprocess.CompletedProcess) -> str:
    stderr = proc.stderr.decode(errors="replace").strip()
    try:
        payload = json.loads(stderr.splitlines()[-1])
        return str(payload.get("detail", stderr))
    except (ValueError, IndexError):
        return stderr or f"media tool exited {proc.returncode}"

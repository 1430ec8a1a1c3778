"""Rendering of detection hypotheses onto frames and whole videos.

Everything drawn here visualizes model output, not ground truth. Box borders
are painted as exact pixel bands (no anti-aliasing) so tests can probe
individual pixels; labels are text on a filled background rectangle.

Video re-encoding is delegated to the media toolchain: native frames stream
in over a decode subprocess as raw rgb24, annotated frames stream out to an
encode subprocess writing MP4 (mp4v).
"""

from __future__ import annotations

import json
import subprocess
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .artifact import DetectionsArtifact
from .sampler import VideoMeta, media_tool_argv, probe_video
from .validation import Detection, GeometryPolicy, validate_geometric

# Fixed 8-color palette cycled per person_id within a frame. IDs are
# frame-local, so the same color on consecutive frames implies nothing
# about identity.
PALETTE: tuple[tuple[int, int, int], ...] = (
    (230, 25, 75),    # red
    (60, 180, 75),    # green
    (0, 130, 200),    # blue
    (255, 225, 25),   # yellow
    (245, 130, 48),   # orange
    (145, 30, 180),   # purple
    (70, 240, 240),   # cyan
    (240, 50, 230),   # magenta
)

DEFAULT_LABEL_TEMPLATE = "#{person_id} {attributes} ({confidence:.2f})"

NO_DATA_COLOR = (200, 30, 30)
NO_DATA_TEXT = "no data"

HOLD_UNTIL_NEXT = "hold-until-next"
SAMPLED_ONLY = "sampled-only"


class InvalidGeometry(Exception):
    pass


class MetadataMismatch(Exception):
    pass


class EncoderFailure(Exception):
    pass


@dataclass(frozen=True)
class AnnotationStyle:
    box_color: tuple[int, int, int] = (230, 25, 75)
    box_thickness: int = 2
    label_template: str = DEFAULT_LABEL_TEMPLATE
    label_color: tuple[int, int, int] = (255, 255, 255)
    label_background: tuple[int, int, int] = (0, 0, 0)
    font_scale: float = 0.4
    use_palette: bool = True

    def __post_init__(self) -> None:
        if self.box_thickness < 1:
            raise ValueError("box_thickness must be >= 1")
        for color in (self.box_color, self.label_color, self.label_background):
            if any(not 0 <= c <= 255 for c in color):
                raise ValueError("colors must be RGB triples in [0,255]")


def box_color_for(style: AnnotationStyle, person_id: int) -> tuple[int, int, int]:
    if style.use_palette:
        return PALETTE[person_id % len(PALETTE)]
    return style.box_color


def format_label(style: AnnotationStyle, detection: Detection) -> str:
    attributes = " ".join(
        f"{key}={detection.analysis_result[key]}" for key in sorted(detection.analysis_result)
    )
    return style.label_template.format(
        person_id=detection.person_id,
        confidence=detection.confidence,
        attributes=attributes,
    )


def _paint_box_border(out: np.ndarray, box, color: tuple[int, int, int], t: int) -> None:
    x0, y0, x1, y1 = box.x_min, box.y_min, box.x_max, box.y_max
    out[y0 : min(y0 + t, y1), x0:x1] = color
    out[max(y1 - t, y0) : y1, x0:x1] = color
    out[y0:y1, x0 : min(x0 + t, x1)] = color
    out[y0:y1, max(x1 - t, x0) : x1] = color


def _paint_label(
    out: np.ndarray, text: str, x0: int, y0: int, style: AnnotationStyle
) -> None:
    height, width = out.shape[:2]
    (tw, th), baseline = cv2.getTextSize(text, cv2.FONT_HERSHEY_SIMPLEX, style.font_scale, 1)
    lw = min(tw + 4, width)
    lh = min(th + baseline + 4, height)
    # Above the box when it fits, clamped inside the image at the top edge.
    y_top = max(0, y0 - lh)
    x_left = max(0, min(x0, width - lw))
    out[y_top : y_top + lh, x_left : x_left + lw] = style.label_background
    cv2.putText(
        out,
        text,
        (x_left + 2, y_top + th + 2),
        cv2.FONT_HERSHEY_SIMPLEX,
        style.font_scale,
        style.label_color,
        1,
        cv2.LINE_8,
    )


def render_frame(
    image: np.ndarray, detections: list[Detection], style: AnnotationStyle | None = None
) -> np.ndarray:
    """Draw boxes and labels on a copy of an RGB uint8 frame.

    Detections must already satisfy the geometric invariants for this image
    (run the clamp policy first); violations raise InvalidGeometry. The input
    buffer is never modified.
    """
    style = style or AnnotationStyle()
    height, width = image.shape[:2]
    for det in detections:
        box = det.bbox
        if box.x_min >= box.x_max or box.y_min >= box.y_max:
            raise InvalidGeometry(f"inverted box for person {det.person_id}")
        if box.x_max > width or box.y_max > height:
            raise InvalidGeometry(f"out-of-bounds box for person {det.person_id}")

    out = image.copy()
    for det in detections:
        color = box_color_for(style, det.person_id)
        _paint_box_border(out, det.bbox, color, style.box_thickness)
        _paint_label(out, format_label(style, det), det.bbox.x_min, det.bbox.y_min, style)
    return out


def render_no_data_marker(image: np.ndarray) -> np.ndarray:
    """Corner marker for frames whose batch failed: visibly 'no data', not 'no people'."""
    out = image.copy()
    height, width = out.shape[:2]
    mh = min(18, height)
    mw = min(70, width)
    out[0:mh, 0:mw] = NO_DATA_COLOR
    cv2.putText(
        out, NO_DATA_TEXT, (3, min(13, height - 2)),
        cv2.FONT_HERSHEY_SIMPLEX, 0.35, (255, 255, 255), 1, cv2.LINE_8,
    )
    return out


def _require_matching_meta(artifact: DetectionsArtifact, video_path: Path) -> VideoMeta:
    meta = probe_video(video_path)
    rec = artifact.video
    if (meta.width, meta.height) != (rec.width, rec.height):
        raise MetadataMismatch(
            f"artifact recorded {rec.width}x{rec.height}, file is {meta.width}x{meta.height}"
        )
    if abs(meta.fps - rec.fps) > 1e-3 * rec.fps:
        raise MetadataMismatch(f"artifact recorded fps {rec.fps}, file has {meta.fps}")
    if abs(meta.duration_s - rec.duration_s) > max(1.0 / meta.fps, 1e-3 * rec.duration_s):
        raise MetadataMismatch(
            f"artifact recorded duration {rec.duration_s}s, file has {meta.duration_s}s"
        )
    return meta


def annotate_video(
    video_path: str | Path,
    artifact: DetectionsArtifact,
    style: AnnotationStyle | None = None,
    hold_policy: str = HOLD_UNTIL_NEXT,
    out_path: str | Path | None = None,
) -> Path:
    """Render the artifact onto every native frame and encode an annotated MP4.

    hold-until-next: a native frame at time t carries the detections of the
    latest sampled frame with timestamp <= t. sampled-only: boxes appear only
    on native frames within one native-frame duration of a sample. Frames
    governed by a failed sample get a 'no data' corner marker.
    """
    if hold_policy not in (HOLD_UNTIL_NEXT, SAMPLED_ONLY):
        raise ValueError(f"unknown hold policy {hold_policy!r}")
    style = style or AnnotationStyle()
    video_path = Path(video_path)
    meta = _require_matching_meta(artifact, video_path)
    out_path = (
        Path(out_path)
        if out_path is not None
        else video_path.with_name(video_path.stem + ".annotated.mp4")
    )

    sample_times = [f.timestamp_s for f in artifact.frames]
    # Boxes drawn on video are always clamped to the image first; the artifact
    # may legitimately contain warn-policy boxes that are out of bounds.
    clamped: list[list[Detection]] = []
    for frame in artifact.frames:
        dets, _ = validate_geometric(
            frame.frame_index, frame.detections, meta.width, meta.height, GeometryPolicy.CLAMP
        )
        clamped.append(dets)

    frame_bytes = meta.width * meta.height * 3
    tool = media_tool_argv()
    decoder = subprocess.Popen(
        tool + ["decode", str(video_path)],
        stdout=subprocess.PIPE,
        stderr=subprocess.DEVNULL,
    )
    encoder = subprocess.Popen(
        tool
        + [
            "encode",
            str(out_path),
            "--fps",
            f"{meta.fps:.6f}",
            "--width",
            str(meta.width),
            "--height",
            str(meta.height),
        ],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
    )

    native_index = 0
    pipe_broken = False
    try:
        while True:
            raw = decoder.stdout.read(frame_bytes)
            if not raw:
                break
            if len(raw) != frame_bytes:
                raise EncoderFailure(f"decoder produced a truncated frame at {native_index}")
            image = np.frombuffer(raw, np.uint8).reshape(meta.height, meta.width, 3)
            t = native_index / meta.fps
            rendered = _annotate_native_frame(
                image, t, artifact, clamped, sample_times, meta.fps, style, hold_policy
            )
            try:
                encoder.stdin.write(rendered.tobytes())
            except BrokenPipeError:
                pipe_broken = True
                break
            native_index += 1
    finally:
        decoder.stdout.close()
        decoder.wait()
        # communicate() flushes and closes encoder stdin (EOF), then reaps it
        try:
            enc_out, enc_err = encoder.communicate(timeout=120)
        except subprocess.TimeoutExpired:
            encoder.kill()
            enc_out, enc_err = encoder.communicate()

    if decoder.returncode != 0:
        raise EncoderFailure(f"decode subprocess exited {decoder.returncode}")
    if encoder.returncode != 0 or pipe_broken:
        raise EncoderFailure(
            f"encode subprocess exited {encoder.returncode}: {enc_err.decode(errors='replace')}"
        )
    written = json.loads(enc_out.decode())["frames_written"]
    if written != native_index:
        raise EncoderFailure(f"encoder wrote {written} of {native_index} frames")
    return out_path


def _annotate_native_frame(
    image: np.ndarray,
    t: float,
    artifact: DetectionsArtifact,
    clamped: list[list[Detection]],
    sample_times: list[float],
    fps: float,
    style: AnnotationStyle,
    hold_policy: str,
) -> np.ndarray:
    governing: int | None = None
    if hold_policy == HOLD_UNTIL_NEXT:
        pos = bisect_right(sample_times, t + 1e-9) - 1
        if pos >= 0:
            governing = pos
    else:
        pos = bisect_right(sample_times, t + 1e-9) - 1
        for candidate in (pos, pos + 1):
            if 0 <= candidate < len(sample_times) and abs(sample_times[candidate] - t) < 1.0 / fps:
                governing = candidate
                break

    if governing is None:
        return image.copy()
    frame = artifact.frames[governing]
    if frame.status == "failed":
        return render_no_data_marker(image)
    return render_frame(image, clamped[governing], style)

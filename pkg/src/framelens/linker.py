"""Optional greedy-IoU identity linking across frames.

person_id values are frame-local by contract; this linker is an explicitly
labeled heuristic, never run by the analyze pipeline, and its output always
embeds the disclaimer below.
"""

from __future__ import annotations

import json
from pathlib import Path

from pydantic import BaseModel, ConfigDict

from .artifact import DetectionsArtifact, utc_now_iso
from .validation import BoundingBox

HEURISTIC_DISCLAIMER = (
    "Tracks are heuristic greedy IoU associations over frame-local person_id "
    "values. They perform no re-identification, may merge or split distinct "
    "people, and must not be treated as verified identities."
)

LINKER_METHOD = "greedy-iou"


class TrackRecord(BaseModel):
    model_config = ConfigDict(extra="allow")

    track_id: int
    members: list[tuple[int, int]]  # (frame_index, person_id), strictly increasing frames


class LinkedArtifact(BaseModel):
    model_config = ConfigDict(extra="allow")

    schema_version: str = "1.0"
    created_at: str = ""
    method: str = LINKER_METHOD
    iou_threshold: float
    heuristic_disclaimer: str = HEURISTIC_DISCLAIMER
    tracks: list[TrackRecord]
    base: DetectionsArtifact


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two pixel boxes; 0 when either is degenerate."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = float(ix) * float(iy)
    area_a = float(a.x_max - a.x_min) * float(a.y_max - a.y_min)
    area_b = float(b.x_max - b.x_min) * float(b.y_max - b.y_min)
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return inter / union


def link_ids_heuristic(
    artifact: DetectionsArtifact, iou_threshold: float = 0.5
) -> LinkedArtifact:
    """Greedy matching between consecutive ok frames.

    Candidate pairs are taken in descending IoU order; a pair is accepted iff
    its IoU >= threshold and neither detection is already matched. Unmatched
    detections start new tracks.
    """
    if not 0 < iou_threshold <= 1:
        raise ValueError("iou_threshold must be in (0, 1]")
    ok_frames = [f for f in artifact.frames if f.status == "ok"]
    if not ok_frames:
        raise ValueError("artifact has no ok frames to link")

    tracks: list[list[tuple[int, int]]] = []
    # track index currently ending at (previous ok frame, detection position)
    open_tracks: dict[int, int] = {}

    for pos, frame in enumerate(ok_frames):
        if pos == 0:
            for i in range(len(frame.detections)):
                open_tracks[i] = len(tracks)
                tracks.append([(frame.frame_index, frame.detections[i].person_id)])
            continue

        prev = ok_frames[pos - 1]
        candidates = [
            (iou(prev.detections[i].bbox, frame.detections[j].bbox), i, j)
            for i in range(len(prev.detections))
            for j in range(len(frame.detections))
        ]
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))

        matched_prev: set[int] = set()
        matched_cur: dict[int, int] = {}
        for score, i, j in candidates:
            if score < iou_threshold:
                break
            if i in matched_prev or j in matched_cur:
                continue
            matched_prev.add(i)
            matched_cur[j] = open_tracks[i]

        next_open: dict[int, int] = {}
        for j in range(len(frame.detections)):
            member = (frame.frame_index, frame.detections[j].person_id)
            if j in matched_cur:
                track_index = matched_cur[j]
                tracks[track_index].append(member)
            else:
                track_index = len(tracks)
                tracks.append([member])
            next_open[j] = track_index
        open_tracks = next_open

    return LinkedArtifact(
        created_at=utc_now_iso(),
        iou_threshold=iou_threshold,
        tracks=[TrackRecord(track_id=k, members=members) for k, members in enumerate(tracks)],
        base=artifact,
    )


def linked_filename(artifact: DetectionsArtifact) -> str:
    return f"{Path(artifact.video.path).stem}.linked.json"


def write_linked(linked: LinkedArtifact, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / linked_filename(linked.base)
    path.write_text(json.dumps(linked.model_dump(mode="json"), indent=2) + "\n")
    return path

#!/usr/bin/env python3
"""Offline walkthrough of the whole pipeline against the mock provider.

    python3 scripts/demo_end_to_end.py [--out-dir demo_out]

Creates a synthetic 10 s clip, scripts the mock so the second batch returns
prose instead of JSON, runs the pipeline (best effort: only that batch's
frames fail), then links ids across frames and renders the annotated video.
No network access and no API key involved.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import cv2
import numpy as np

from framelens.annotate import annotate_video
from framelens.gateway import EndpointConfig
from framelens.linker import link_ids_heuristic, write_linked
from framelens.mock_provider import Behavior, FailureScript, mock_provider_serve
from framelens.pipeline import PipelineConfig, report_filename, run_pipeline
from framelens.validation import GeometryPolicy


def write_demo_video(path: Path, duration_s=10.0, fps=10.0, width=320, height=240) -> Path:
    writer = cv2.VideoWriter(
        str(path), cv2.VideoWriter_fourcc(*"mp4v"), fps, (width, height)
    )
    if not writer.isOpened():
        raise RuntimeError("mp4v encoder unavailable")
    for i in range(round(duration_s * fps)):
        frame = np.zeros((height, width, 3), np.uint8)
        frame[:, :, 1] = 60
        # a block drifting right, so the linked tracks mean something
        x = 20 + i * 2
        frame[80:180, x : x + 60] = (40, 160, 220)
        writer.write(frame)
    writer.release()
    return path


def scripted_batches(out_dir: Path, batch_size: int, frame_count: int) -> FailureScript:
    """Happy payloads for every batch except the second, which is prose."""
    fixtures = []
    for start in range(0, frame_count, batch_size):
        indices = range(start, min(start + batch_size, frame_count))
        payload = {
            str(i): [
                {
                    "person_id": 0,
                    "bbox": {
                        "x_min": 20 + i * 20,
                        "y_min": 80,
                        "x_max": 80 + i * 20,
                        "y_max": 180,
                    },
                    "confidence": 0.9,
                    "analysis_result": {"emotion": "neutral"},
                }
            ]
            for i in indices
        }
        fixtures.append(json.dumps(payload))
    fixtures[1] = "I cannot tell how many people are in these frames."

    behaviors = []
    for n, text in enumerate(fixtures):
        path = out_dir / f"batch_{n}.txt"
        path.write_text(text)
        behaviors.append(Behavior(kind="fixture", path=str(path)))
    return FailureScript(schedule=behaviors)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("--out-dir", default="demo_out")
    args = parser.parse_args(argv)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    video = write_demo_video(out_dir / "demo.mp4")
    print(f"synthetic clip: {video}")

    script = scripted_batches(out_dir, batch_size=4, frame_count=10)
    with mock_provider_serve(script) as mock:
        print(f"mock provider: {mock.base_url} (batch 1 scripted to return prose)")
        config = PipelineConfig(
            video_path=video,
            endpoint=EndpointConfig(base_url=mock.base_url, model_id="demo-model"),
            out_dir=out_dir,
            interval_s=1.0,
            batch_size=4,
            geometry_policy=GeometryPolicy.CLAMP,
        )
        artifact = run_pipeline(config)

    ok = sum(1 for f in artifact.frames if f.status == "ok")
    print(f"pipeline done: {ok} ok / {len(artifact.frames) - ok} failed frames")
    for failure in artifact.failures:
        print(f"  failure: batch {failure.batch_index} {failure.error_kind}: "
              f"frames {failure.frame_indices}")
    artifact_path = out_dir / f"{video.stem}.detections.json"
    print(f"artifact: {artifact_path}")
    print(f"report:   {out_dir / report_filename(video)}")

    linked = link_ids_heuristic(artifact)
    linked_path = write_linked(linked, out_dir)
    print(f"linked:   {linked_path} ({len(linked.tracks)} tracks)")
    print(f"  note: {linked.heuristic_disclaimer}")

    rendered = annotate_video(video, artifact)
    print(f"annotated video: {rendered}")
    print("failed frames carry a 'no data' corner marker instead of boxes")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line media toolchain backed by OpenCV.

The rest of the package never decodes or encodes video in-process: it drives
this tool as a subprocess through the small command contract documented in
docs/media-tool.md. Any binary honoring the same contract can be substituted
by setting the FRAMELENS_MEDIA_TOOL environment variable.

Commands:
    probe PATH                          print stream metadata as JSON
    extract PATH --times T1,T2,...      write one still per timestamp
    decode PATH                         stream raw rgb24 frames to stdout
    encode OUT --fps F --width W --height H
                                        read raw rgb24 frames from stdin

Exit codes: 0 ok, 2 usage error, 3 media error, 4 internal error.
Media errors print a one-line JSON object {"error": ..., "detail": ...}
to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MEDIA = 3
EXIT_INTERNAL = 4

STILL_FORMATS = ("jpeg", "png")
DEFAULT_JPEG_QUALITY = 90


def _fail(error: str, detail: str) -> int:
    sys.stderr.write(json.dumps({"error": error, "detail": detail}) + "\n")
    return EXIT_MEDIA


def _open_capture(path: str):
    import cv2

    cap = cv2.VideoCapture(path)
    if not cap.isOpened():
        return None
    return cap


def _stream_info(cap) -> dict | None:
    import cv2

    frame_count = int(cap.get(cv2.CAP_PROP_FRAME_COUNT))
    fps = float(cap.get(cv2.CAP_PROP_FPS))
    width = int(cap.get(cv2.CAP_PROP_FRAME_WIDTH))
    height = int(cap.get(cv2.CAP_PROP_FRAME_HEIGHT))
    if frame_count <= 0 or fps <= 0 or width <= 0 or height <= 0:
        return None
    return {
        "duration_s": frame_count / fps,
        "fps": fps,
        "width": width,
        "height": height,
        "frame_count": frame_count,
    }


def cmd_probe(args: argparse.Namespace) -> int:
    cap = _open_capture(args.path)
    if cap is None:
        return _fail("unreadable", f"cannot open {args.path!r} as a video container")
    try:
        info = _stream_info(cap)
    finally:
        cap.release()
    if info is None:
        return _fail("unreadable", f"{args.path!r} reports no usable video stream")
    sys.stdout.write(json.dumps(info) + "\n")
    return EXIT_OK


def _frame_index_for(t: float, fps: float, frame_count: int) -> int:
    # Frame i covers [i/fps, (i+1)/fps); the epsilon absorbs float rounding
    # when t lands exactly on a frame boundary.
    idx = int(t * fps + 1e-6)
    return max(0, min(idx, frame_count - 1))


def cmd_extract(args: argparse.Namespace) -> int:
    import cv2

    if args.format not in STILL_FORMATS:
        sys.stderr.write(f"unsupported still format: {args.format}\n")
        return EXIT_USAGE
    try:
        times = [float(part) for part in args.times.split(",") if part.strip()]
    except ValueError:
        sys.stderr.write(f"bad --times value: {args.times!r}\n")
        return EXIT_USAGE

    cap = _open_capture(args.path)
    if cap is None:
        return _fail("unreadable", f"cannot open {args.path!r} as a video container")
    info = _stream_info(cap)
    if info is None:
        cap.release()
        return _fail("unreadable", f"{args.path!r} reports no usable video stream")

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = "jpg" if args.format == "jpeg" else "png"
    encode_params = (
        [cv2.IMWRITE_JPEG_QUALITY, args.quality] if args.format == "jpeg" else []
    )

    entries = []
    for i, t in enumerate(times):
        idx = _frame_index_for(t, info["fps"], info["frame_count"])
        cap.set(cv2.CAP_PROP_POS_FRAMES, idx)
        ok, frame = cap.read()
        if not ok or frame is None:
            entries.append({"time": t, "ok": False, "detail": f"decode failed at frame {idx}"})
            continue
        ok2, buf = cv2.imencode(f".{ext}", frame, encode_params)
        if not ok2:
            entries.append({"time": t, "ok": False, "detail": "still encode failed"})
            continue
        path = out_dir / f"frame_{i:06d}.{ext}"
        path.write_bytes(buf.tobytes())
        entries.append({"time": t, "ok": True, "path": str(path)})
    cap.release()

    sys.stdout.write(json.dumps({"format": args.format, "frames": entries}) + "\n")
    return EXIT_OK


def cmd_decode(args: argparse.Namespace) -> int:
    cap = _open_capture(args.path)
    if cap is None:
        return _fail("unreadable", f"cannot open {args.path!r} as a video container")
    out = sys.stdout.buffer
    while True:
        ok, frame = cap.read()
        if not ok:
            break
        out.write(frame[:, :, ::-1].tobytes())  # BGR -> rgb24
    cap.release()
    out.flush()
    return EXIT_OK


def cmd_encode(args: argparse.Namespace) -> int:
    import cv2
    import numpy as np

    if args.width <= 0 or args.height <= 0 or args.fps <= 0:
        sys.stderr.write("encode requires positive --width/--height/--fps\n")
        return EXIT_USAGE
    fourcc = cv2.VideoWriter_fourcc(*args.codec)
    writer = cv2.VideoWriter(args.out, fourcc, args.fps, (args.width, args.height))
    if not writer.isOpened():
        return _fail("encoder", f"cannot open VideoWriter for {args.out!r} ({args.codec})")

    frame_bytes = args.width * args.height * 3
    stdin = sys.stdin.buffer
    written = 0
    while True:
        chunk = stdin.read(frame_bytes)
        if not chunk:
            break
        if len(chunk) != frame_bytes:
            writer.release()
            return _fail("encoder", f"truncated frame on stdin ({len(chunk)} bytes)")
        rgb = np.frombuffer(chunk, np.uint8).reshape(args.height, args.width, 3)
        writer.write(rgb[:, :, ::-1])  # rgb24 -> BGR
        written += 1
    writer.release()
    sys.stdout.write(json.dumps({"frames_written": written}) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="framelens-media", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("probe", help="print stream metadata as JSON")
    p.add_argument("path")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("extract", help="write one encoded still per timestamp")
    p.add_argument("path")
    p.add_argument("--times", required=True, help="comma-separated seconds")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", default="jpeg", choices=STILL_FORMATS)
    p.add_argument("--quality", type=int, default=DEFAULT_JPEG_QUALITY)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("decode", help="stream raw rgb24 frames to stdout")
    p.add_argument("path")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("encode", help="encode raw rgb24 frames from stdin")
    p.add_argument("out")
    p.add_argument("--fps", type=float, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--codec", default="mp4v")
    p.set_defaults(func=cmd_encode)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ImportError as exc:
        sys.stderr.write(f"media backend unavailable: {exc}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())

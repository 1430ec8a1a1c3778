"""Command-line entry points.

Exit codes: 0 success (including partial-failure analyze runs), 1 fatal
error, 2 usage error. `analyze` always prints a `frames ok/failed: X/Y`
summary; batch failures are recorded in the artifact, not turned into a
non-zero exit.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .annotate import (
    HOLD_UNTIL_NEXT,
    SAMPLED_ONLY,
    AnnotationStyle,
    EncoderFailure,
    InvalidGeometry,
    MetadataMismatch,
    annotate_video,
)
from .artifact import ArtifactFormatError, SchemaVersionUnsupported, load_artifact
from .contract import BatchDetections
from .gateway import EndpointConfig
from .linker import HEURISTIC_DISCLAIMER, link_ids_heuristic, write_linked
from .mock_provider import FailureScript, mock_provider_serve
from .pipeline import (
    DEFAULT_INTERVAL_S,
    DEFAULT_MAX_FRAMES,
    PipelineAborted,
    PipelineConfig,
    report_filename,
    run_pipeline,
    write_report,
)
from .sampler import SamplerError
from .validation import (
    GeometryPolicy,
    typed_detections,
    validate_geometric,
    validate_structural,
)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_USAGE = 2

MOCK_MODEL_ID = "mock-model"


class _Parser(argparse.ArgumentParser):
    """argparse that prints full help to stderr on usage errors."""

    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        self.print_help(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def load_config_file(path: str | Path) -> dict[str, str]:
    """Key-value config: one `key = value` per line, `#` comments, keys are
    the long flag names without the leading dashes."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected `key = value`, got {line!r}")
        key, _, value = stripped.partition("=")
        values[key.strip()] = value.strip()
    return values


_CONFIG_COERCERS = {
    "interval": float,
    "batch-size": int,
    "max-frames": int,
    "parallel-batches": int,
    "max-tokens": int,
    "timeout": float,
    "max-retries": int,
}


def apply_config_file(args: argparse.Namespace, argv: list[str]) -> None:
    """Config values fill in flags not given explicitly on the command line."""
    if not getattr(args, "config", None):
        return
    values = load_config_file(args.config)
    for key, raw in values.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ValueError(f"unknown config key {key!r}")
        if f"--{key}" in argv:
            continue
        coerce = _CONFIG_COERCERS.get(key, str)
        setattr(args, attr, coerce(raw))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="framelens", description=__doc__, allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="run the video → detections pipeline")
    analyze.add_argument("--video", required=True, help="input video file")
    analyze.add_argument("--interval", type=float, default=DEFAULT_INTERVAL_S,
                         help="sampling interval in seconds")
    analyze.add_argument("--max-frames", type=int, default=DEFAULT_MAX_FRAMES)
    analyze.add_argument("--batch-size", type=int, default=4)
    analyze.add_argument("--geometry-policy", choices=[p.value for p in GeometryPolicy],
                         default=GeometryPolicy.WARN.value)
    analyze.add_argument("--out-dir", default=".", help="artifact output directory")
    analyze.add_argument("--endpoint-url", help="chat-completions base URL")
    analyze.add_argument("--model", help="model id sent to the endpoint")
    analyze.add_argument("--mock-script",
                         help="failure-script JSON; runs against an in-process mock provider")
    analyze.add_argument("--parallel-batches", type=int, default=1)
    analyze.add_argument("--max-tokens", type=int, default=1024)
    analyze.add_argument("--timeout", type=float, default=120.0)
    analyze.add_argument("--max-retries", type=int, default=3)
    analyze.add_argument("--config", help="key-value config file mirroring these flags")
    analyze.set_defaults(func=cmd_analyze)

    annotate = sub.add_parser("annotate", help="render an artifact onto its video")
    annotate.add_argument("--video", required=True)
    annotate.add_argument("--artifact", required=True)
    annotate.add_argument("--out", help="output path (default <video-stem>.annotated.mp4)")
    annotate.add_argument("--hold", choices=[HOLD_UNTIL_NEXT, SAMPLED_ONLY],
                          default=HOLD_UNTIL_NEXT)
    annotate.add_argument("--no-palette", action="store_true",
                          help="single box color instead of per-id palette")
    annotate.set_defaults(func=cmd_annotate)

    validate = sub.add_parser("validate", help="re-run validation over an artifact file")
    validate.add_argument("artifact")
    validate.set_defaults(func=cmd_validate)

    link = sub.add_parser("link", help="heuristic cross-frame id linking (opt-in)")
    link.add_argument("artifact")
    link.add_argument("--iou-threshold", type=float, default=0.5)
    link.add_argument("--out-dir", help="default: alongside the artifact")
    link.set_defaults(func=cmd_link)

    serve = sub.add_parser("inspect-serve", help="start the interactive inspection service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--video", action="append", default=[],
                       help="register a video for frame fetching (repeatable)")
    serve.add_argument("--interval", type=float, default=DEFAULT_INTERVAL_S)
    serve.add_argument("--endpoint-url")
    serve.add_argument("--model")
    serve.add_argument("--max-tokens", type=int, default=512)
    serve.add_argument("--ui-dir", help="built UI assets (default frontend/dist when present)")
    serve.add_argument("--mock-script",
                       help="failure-script JSON; serve against an in-process mock provider")
    serve.set_defaults(func=cmd_inspect_serve)

    return parser


def _endpoint_from_args(args, parser_error) -> tuple[EndpointConfig, object | None]:
    """Resolve endpoint settings; with --mock-script an in-process provider is
    started and the returned handle must be shut down by the caller."""
    timeout = getattr(args, "timeout", 120.0)
    max_retries = getattr(args, "max_retries", 3)
    if args.mock_script:
        script = FailureScript.from_json_file(args.mock_script)
        handle = mock_provider_serve(script)
        endpoint = EndpointConfig.from_env(
            base_url=handle.base_url,
            model_id=args.model or MOCK_MODEL_ID,
            timeout_s=timeout,
            max_retries=max_retries,
        )
        return endpoint, handle
    if not args.endpoint_url:
        parser_error("--endpoint-url is required unless --mock-script is given")
    if not args.model:
        parser_error("--model is required unless --mock-script is given")
    endpoint = EndpointConfig.from_env(
        base_url=args.endpoint_url,
        model_id=args.model,
        timeout_s=timeout,
        max_retries=max_retries,
    )
    return endpoint, None


def cmd_analyze(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    try:
        endpoint, handle = _endpoint_from_args(args, parser.error)
    except (OSError, ValueError, KeyError) as exc:
        print(f"fatal: cannot start mock provider: {exc}", file=sys.stderr)
        return EXIT_FATAL
    try:
        config = PipelineConfig(
            video_path=Path(args.video),
            endpoint=endpoint,
            out_dir=Path(args.out_dir),
            interval_s=args.interval,
            max_frames=args.max_frames,
            batch_size=args.batch_size,
            geometry_policy=GeometryPolicy(args.geometry_policy),
            parallel_batches=args.parallel_batches,
            max_tokens=args.max_tokens,
        )
        artifact = run_pipeline(config)
    except PipelineAborted as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except (FileNotFoundError, SamplerError, OSError, ValueError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return EXIT_FATAL
    finally:
        if handle is not None:
            handle.shutdown()

    ok = sum(1 for f in artifact.frames if f.status == "ok")
    failed = len(artifact.frames) - ok
    artifact_path = config.out_dir / f"{config.video_path.stem}.detections.json"
    print(f"artifact written: {artifact_path}")
    print(f"report written: {config.out_dir / report_filename(config.video_path)}")
    print(f"frames ok/failed: {ok}/{failed}")
    return EXIT_OK


def cmd_annotate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    try:
        artifact = load_artifact(args.artifact)
        style = AnnotationStyle(use_palette=not args.no_palette)
        out = annotate_video(
            args.video, artifact, style=style, hold_policy=args.hold, out_path=args.out
        )
    except (FileNotFoundError, OSError, SamplerError, ArtifactFormatError,
            SchemaVersionUnsupported, MetadataMismatch, EncoderFailure,
            InvalidGeometry, ValueError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return EXIT_FATAL
    print(f"annotated video written: {out}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    """Validate the detections inside an artifact file, report-only.

    Works on the raw JSON so hand-edited files with invalid detections are
    reported rather than rejected at load time."""
    path = Path(args.artifact)
    try:
        raw = json.loads(path.read_text())
        video = raw["video"]
        width, height = int(video["width"]), int(video["height"])
        frames = raw["frames"]
        entries = {int(f["frame_index"]): list(f.get("detections", [])) for f in frames}
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"fatal: not a readable artifact: {exc}", file=sys.stderr)
        return EXIT_FATAL

    batch = BatchDetections(entries=entries, parse_warnings=[])
    report = validate_structural(batch)
    bad_frames = report.frames_with_errors()
    for frame_index, raw_detections in sorted(entries.items()):
        if frame_index in bad_frames:
            continue
        typed = typed_detections(raw_detections)
        _, warnings = validate_geometric(
            frame_index, typed, width, height, GeometryPolicy.WARN
        )
        report.geometric_warnings.extend(warnings)

    video_path = video.get("path", path.stem)
    report_path = write_report(video_path, [report], path.parent)
    print(f"report written: {report_path}")
    print(
        f"structural errors: {len(report.structural_errors)}, "
        f"geometric warnings: {len(report.geometric_warnings)}"
    )
    return EXIT_OK if report.accepted else EXIT_FATAL


def cmd_link(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    try:
        artifact = load_artifact(args.artifact)
        linked = link_ids_heuristic(artifact, iou_threshold=args.iou_threshold)
        out_dir = Path(args.out_dir) if args.out_dir else Path(args.artifact).parent
        out = write_linked(linked, out_dir)
    except (FileNotFoundError, OSError, ArtifactFormatError,
            SchemaVersionUnsupported, ValueError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return EXIT_FATAL
    print(HEURISTIC_DISCLAIMER)
    print(f"linked artifact written: {out} ({len(linked.tracks)} tracks)")
    return EXIT_OK


def cmd_inspect_serve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    import uvicorn

    from .inspect_service import InspectSettings, create_app

    try:
        endpoint, handle = _endpoint_from_args(args, parser.error)
    except (OSError, ValueError, KeyError) as exc:
        print(f"fatal: cannot start mock provider: {exc}", file=sys.stderr)
        return EXIT_FATAL
    ui_dir = Path(args.ui_dir) if args.ui_dir else Path("frontend/dist")
    settings = InspectSettings(
        endpoint=endpoint,
        interval_s=args.interval,
        max_tokens=args.max_tokens,
        ui_dir=ui_dir if ui_dir.is_dir() else None,
        videos=[Path(v) for v in args.video],
    )
    try:
        app = create_app(settings)
    except (FileNotFoundError, SamplerError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        if handle is not None:
            handle.shutdown()
        return EXIT_FATAL
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    finally:
        if handle is not None:
            handle.shutdown()
    return EXIT_OK


def _exit_code(exc: SystemExit) -> int:
    if exc.code is None:
        return EXIT_OK
    return exc.code if isinstance(exc.code, int) else EXIT_USAGE


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        apply_config_file(args, argv)
    except SystemExit as exc:
        return _exit_code(exc)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, parser)
    except SystemExit as exc:
        # parser.error inside a subcommand (e.g. missing --endpoint-url)
        return _exit_code(exc)


if __name__ == "__main__":
    raise SystemExit(main())

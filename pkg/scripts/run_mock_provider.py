#!/usr/bin/env python3
"""Run the scriptable mock inference provider as a standalone process.

    python3 scripts/run_mock_provider.py --port 8900 --script failures.json

Point the pipeline at it with --endpoint-url http://127.0.0.1:8900 (any
--model value works). Without --script every request succeeds with an
auto-generated empty-detections payload. Ctrl-C shuts it down cleanly.
"""

from __future__ import annotations

import argparse
import signal
import sys
import threading

from framelens.mock_provider import FailureScript, PortInUse, mock_provider_serve


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8900, help="0 picks a free port")
    parser.add_argument("--script", help="failure-script JSON file")
    args = parser.parse_args(argv)

    script = FailureScript()
    if args.script:
        try:
            script = FailureScript.from_json_file(args.script)
        except (OSError, ValueError) as exc:
            print(f"error: cannot load script: {exc}", file=sys.stderr)
            return 2

    try:
        handle = mock_provider_serve(script, port=args.port, host=args.host)
    except PortInUse as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    print(f"mock provider listening on {handle.base_url}")
    print(f"  scripted behaviors queued: {len(script.schedule)}")
    print("  POST /chat/completions, GET /healthz, GET /__requests, POST /__script")

    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    stop.wait()
    print("shutting down")
    handle.shutdown()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

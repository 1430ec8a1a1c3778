"""Scriptable mock of the chat-completions wire protocol, for offline runs.

A FailureScript is an ordered list of per-request behaviors; each incoming
request consumes the next entry. When the schedule is exhausted the mock
succeeds: with the configured default fixture text when one is set, otherwise
with an auto-generated payload mapping every frame index found in the request
to an empty detection list.

Besides POST /chat/completions the server exposes test introspection:
GET /__requests (recorded bodies), POST /__script (replace script + reset),
POST /__reset, GET /healthz.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .contract import ImagePart
from .gateway import deserialize_chat_request

BEHAVIOR_KINDS = ("fixture", "http_status", "malformed_text", "delay")


class PortInUse(Exception):
    pass


@dataclass(frozen=True)
class Behavior:
    kind: str
    path: str | None = None          # fixture
    status: int | None = None        # http_status
    text: str | None = None          # malformed_text
    seconds: float | None = None     # delay
    then: "Behavior | None" = None   # delay
    retry_after_s: float | None = None  # optional Retry-After on http_status

    @classmethod
    def from_dict(cls, raw: dict) -> "Behavior":
        kind = raw.get("kind")
        if kind not in BEHAVIOR_KINDS:
            raise ValueError(f"unknown behavior kind {kind!r}")
        if kind == "delay":
            if "then" not in raw:
                raise ValueError("delay behavior requires 'then'")
            return cls(
                kind="delay",
                seconds=float(raw["seconds"]),
                then=cls.from_dict(raw["then"]),
            )
        return cls(
            kind=kind,
            path=raw.get("path"),
            status=int(raw["status"]) if kind == "http_status" else None,
            text=raw.get("text"),
            retry_after_s=(
                float(raw["retry_after_s"]) if raw.get("retry_after_s") is not None else None
            ),
        )


@dataclass
class FailureScript:
    """Ordered per-request behaviors, consumed once each, then success."""

    schedule: list[Behavior] = field(default_factory=list)
    default_fixture: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "FailureScript":
        return cls(
            schedule=[Behavior.from_dict(b) for b in raw.get("schedule", [])],
            default_fixture=raw.get("default_fixture"),
        )

    @classmethod
    def from_json_file(cls, path: str | Path) -> "FailureScript":
        """Load a script; relative fixture paths resolve against the script file."""
        path = Path(path)
        script = cls.from_dict(json.loads(path.read_text()))
        return script.resolved_against(path.parent)

    def resolved_against(self, base: Path) -> "FailureScript":
        return FailureScript(
            schedule=[_resolve_behavior(b, base) for b in self.schedule],
            default_fixture=_resolve_path(self.default_fixture, base),
        )


def _resolve_path(path: str | None, base: Path) -> str | None:
    if path is None:
        return None
    p = Path(path)
    return str(p if p.is_absolute() else base / p)


def _resolve_behavior(behavior: Behavior, base: Path) -> Behavior:
    if behavior.kind == "delay" and behavior.then is not None:
        return replace(behavior, then=_resolve_behavior(behavior.then, base))
    if behavior.kind == "fixture":
        return replace(behavior, path=_resolve_path(behavior.path, base))
    return behavior


def _chat_envelope(model: str, content: str, serial: int) -> bytes:
    return json.dumps(
        {
            "id": f"mock-{serial}",
            "object": "chat.completion",
            "model": model,
            "choices": [
                {
                    "index": 0,
                    "message": {"role": "assistant", "content": content},
                    "finish_reason": "stop",
                }
            ],
        }
    ).encode()


def _auto_empty_payload(body: dict) -> str:
    """Empty detection lists for every frame index present in the request."""
    indices: list[int] = []
    try:
        request = deserialize_chat_request(body)
        for message in request.messages:
            for part in message.parts:
                if isinstance(part, ImagePart):
                    indices.append(part.frame_index)
    except (KeyError, ValueError, TypeError):
        pass
    return json.dumps({str(i): [] for i in sorted(set(indices))})


class _MockState:
    def __init__(self, script: FailureScript):
        self.lock = threading.Lock()
        self.script = script
        self.position = 0
        self.requests: list[dict] = []
        self.serial = 0

    def next_behavior(self, body: dict) -> tuple[Behavior | None, int]:
        with self.lock:
            self.requests.append(body)
            self.serial += 1
            serial = self.serial
            behavior = None
            if self.position < len(self.script.schedule):
                behavior = self.script.schedule[self.position]
                self.position += 1
            return behavior, serial

    def reset(self, script: FailureScript | None = None) -> None:
        with self.lock:
            if script is not None:
                self.script = script
            self.position = 0
            self.requests = []
            self.serial = 0

    def snapshot_requests(self) -> list[dict]:
        with self.lock:
            return list(self.requests)


class _Handler(BaseHTTPRequestHandler):
    state: _MockState  # set by subclassing in mock_provider_serve

    def log_message(self, fmt, *args):  # silence per-request stderr noise
        pass

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b"{}"
        try:
            return json.loads(raw.decode())
        except ValueError:
            return {}

    def _send(self, status: int, payload: bytes, content_type="application/json", headers=None):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        for name, value in (headers or {}).items():
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(payload)

    def do_GET(self):
        if self.path == "/healthz":
            self._send(200, b'{"status":"ok"}')
        elif self.path == "/__requests":
            payload = json.dumps({"requests": self.state.snapshot_requests()}).encode()
            self._send(200, payload)
        else:
            self._send(404, b'{"error":"not found"}')

    def do_POST(self):
        if self.path == "/chat/completions":
            self._handle_chat()
        elif self.path == "/__script":
            body = self._read_body()
            self.state.reset(FailureScript.from_dict(body))
            self._send(200, b'{"status":"ok"}')
        elif self.path == "/__reset":
            self.state.reset()
            self._send(200, b'{"status":"ok"}')
        else:
            self._send(404, b'{"error":"not found"}')

    def _handle_chat(self):
        body = self._read_body()
        behavior, serial = self.state.next_behavior(body)
        while behavior is not None and behavior.kind == "delay":
            time.sleep(behavior.seconds or 0.0)
            behavior = behavior.then

        model = str(body.get("model", "mock-model"))
        if behavior is None:
            fixture = self.state.script.default_fixture
            if fixture is not None:
                content = Path(fixture).read_text()
            else:
                content = _auto_empty_payload(body)
            self._send(200, _chat_envelope(model, content, serial))
        elif behavior.kind == "fixture":
            self._send(200, _chat_envelope(model, Path(behavior.path).read_text(), serial))
        elif behavior.kind == "http_status":
            headers = {}
            if behavior.retry_after_s is not None:
                headers["Retry-After"] = str(behavior.retry_after_s)
            payload = json.dumps({"error": {"code": behavior.status, "message": "scripted"}})
            self._send(behavior.status, payload.encode(), headers=headers)
        elif behavior.kind == "malformed_text":
            self._send(200, (behavior.text or "").encode(), content_type="text/plain")
        else:  # unreachable: from_dict rejects unknown kinds
            self._send(500, b'{"error":"bad behavior"}')


class MockProviderHandle:
    """Running mock server; use as a context manager or call shutdown()."""

    def __init__(self, server: ThreadingHTTPServer, thread: threading.Thread, state: _MockState):
        self._server = server
        self._thread = thread
        self._state = state

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def base_url(self) -> str:
        host = self._server.server_address[0]
        return f"http://{host}:{self.port}"

    def recorded_requests(self) -> list[dict]:
        return self._state.snapshot_requests()

    def set_script(self, script: FailureScript) -> None:
        self._state.reset(script)

    def reset(self) -> None:
        self._state.reset()

    def shutdown(self) -> None:
        self._server.shutdown()
        self._thread.join(timeout=5)
        self._server.server_close()

    def __enter__(self) -> "MockProviderHandle":
        return self

    def __exit__(self, *exc_info) -> None:
        self.shutdown()


def mock_provider_serve(
    script: FailureScript | None = None,
    port: int = 0,
    host: str = "127.0.0.1",
) -> MockProviderHandle:
    """Start the mock provider on the given port (0 picks a free one)."""
    state = _MockState(script or FailureScript())

    handler = type("BoundHandler", (_Handler,), {"state": state})
    try:
        server = ThreadingHTTPServer((host, port), handler)
    except OSError as exc:
        raise PortInUse(f"cannot bind {host}:{port}: {exc}") from exc
    server.daemon_threads = True
    thread = threading.Thread(target=server.serve_forever, name="framelens-mock", daemon=True)
    thread.start()
    return MockProviderHandle(server, thread, state)

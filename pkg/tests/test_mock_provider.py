"""The scriptable offline provider itself."""

import json
import time

import pytest
import requests

from framelens.gateway import send_chat
from framelens.mock_provider import (
    Behavior,
    FailureScript,
    PortInUse,
    mock_provider_serve,
)
from conftest import fast_endpoint
from test_gateway import image_request, tiny_request


def chat_post(base_url, body=None):
    return requests.post(
        f"{base_url}/chat/completions", json=body or {"model": "m", "messages": []},
        timeout=5,
    )


def test_schedule_consumed_in_order_then_success(mock):
    mock.set_script(FailureScript(schedule=[
        Behavior(kind="http_status", status=429),
        Behavior(kind="http_status", status=500),
        Behavior(kind="malformed_text", text="prose"),
    ]))
    assert chat_post(mock.base_url).status_code == 429
    assert chat_post(mock.base_url).status_code == 500
    third = chat_post(mock.base_url)
    assert third.status_code == 200
    assert third.text == "prose"
    assert chat_post(mock.base_url).status_code == 200  # exhausted: success


def test_auto_empty_payload_mirrors_request_frames(mock):
    text = send_chat(image_request(), fast_endpoint(mock.base_url))
    assert json.loads(text) == {"3": [], "5": []}


def test_default_fixture_wins_over_auto_payload(tmp_path, mock):
    fixture = tmp_path / "canned.txt"
    fixture.write_text('{"0": []}')
    mock.set_script(FailureScript(default_fixture=str(fixture)))
    assert send_chat(image_request(), fast_endpoint(mock.base_url)) == '{"0": []}'


def test_fixture_behavior_returns_file_content(tmp_path, mock):
    fixture = tmp_path / "one.txt"
    fixture.write_text("first reply")
    mock.set_script(FailureScript(schedule=[Behavior(kind="fixture", path=str(fixture))]))
    assert send_chat(tiny_request(), fast_endpoint(mock.base_url)) == "first reply"


def test_delay_then_chain(mock):
    mock.set_script(FailureScript(schedule=[
        Behavior(kind="delay", seconds=0.15,
                 then=Behavior(kind="http_status", status=503)),
    ]))
    started = time.monotonic()
    response = chat_post(mock.base_url)
    assert time.monotonic() - started >= 0.15
    assert response.status_code == 503


def test_retry_after_header_emitted(mock):
    mock.set_script(FailureScript(schedule=[
        Behavior(kind="http_status", status=429, retry_after_s=3.0),
    ]))
    assert chat_post(mock.base_url).headers["Retry-After"] == "3.0"


def test_requests_endpoint_records_bodies(mock):
    chat_post(mock.base_url, {"model": "m1", "messages": []})
    chat_post(mock.base_url, {"model": "m2", "messages": []})
    payload = requests.get(f"{mock.base_url}/__requests", timeout=5).json()
    assert [r["model"] for r in payload["requests"]] == ["m1", "m2"]
    assert [r["model"] for r in mock.recorded_requests()] == ["m1", "m2"]


def test_script_endpoint_replaces_and_resets(mock):
    chat_post(mock.base_url)
    response = requests.post(
        f"{mock.base_url}/__script",
        json={"schedule": [{"kind": "http_status", "status": 500}]},
        timeout=5,
    )
    assert response.status_code == 200
    assert mock.recorded_requests() == []  # replacing the script resets history
    assert chat_post(mock.base_url).status_code == 500


def test_reset_endpoint_rewinds_schedule(mock):
    mock.set_script(FailureScript(schedule=[Behavior(kind="http_status", status=500)]))
    assert chat_post(mock.base_url).status_code == 500
    assert chat_post(mock.base_url).status_code == 200
    requests.post(f"{mock.base_url}/__reset", timeout=5)
    assert chat_post(mock.base_url).status_code == 500  # schedule starts over


def test_healthz(mock):
    assert requests.get(f"{mock.base_url}/healthz", timeout=5).json() == {"status": "ok"}


def test_unknown_paths_404(mock):
    assert requests.get(f"{mock.base_url}/nope", timeout=5).status_code == 404
    assert requests.post(f"{mock.base_url}/nope", timeout=5).status_code == 404


def test_port_in_use(mock_server):
    with pytest.raises(PortInUse):
        mock_provider_serve(port=mock_server.port)


def test_context_manager_shuts_down():
    with mock_provider_serve() as handle:
        port = handle.port
        assert requests.get(f"{handle.base_url}/healthz", timeout=5).status_code == 200
    with pytest.raises(requests.ConnectionError):
        requests.get(f"http://127.0.0.1:{port}/healthz", timeout=2)


def test_script_file_resolves_relative_fixture_paths(tmp_path):
    (tmp_path / "replies").mkdir()
    (tmp_path / "replies" / "a.txt").write_text("from file")
    (tmp_path / "default.txt").write_text("fallback")
    script_path = tmp_path / "script.json"
    script_path.write_text(json.dumps({
        "schedule": [
            {"kind": "fixture", "path": "replies/a.txt"},
            {"kind": "delay", "seconds": 0.0, "then": {"kind": "fixture", "path": "replies/a.txt"}},
        ],
        "default_fixture": "default.txt",
    }))
    script = FailureScript.from_json_file(script_path)
    assert script.schedule[0].path == str(tmp_path / "replies" / "a.txt")
    assert script.schedule[1].then.path == str(tmp_path / "replies" / "a.txt")
    assert script.default_fixture == str(tmp_path / "default.txt")


def test_script_file_keeps_absolute_paths(tmp_path):
    script_path = tmp_path / "script.json"
    script_path.write_text(json.dumps({
        "schedule": [{"kind": "fixture", "path": "/abs/path.txt"}],
    }))
    script = FailureScript.from_json_file(script_path)
    assert script.schedule[0].path == "/abs/path.txt"


def test_unknown_behavior_kind_rejected():
    with pytest.raises(ValueError):
        Behavior.from_dict({"kind": "explode"})
    with pytest.raises(ValueError):
        Behavior.from_dict({"kind": "delay", "seconds": 1.0})  # missing then

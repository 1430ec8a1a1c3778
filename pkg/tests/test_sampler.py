"""Sampling-grid law and toolchain plumbing."""

import math
import sys

import cv2
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from framelens.sampler import (
    MEDIA_TOOL_ENV,
    ToolchainMissing,
    UnreadableMedia,
    VideoMeta,
    extract_frame_at,
    media_tool_argv,
    probe_video,
    sample_frames,
    sample_timestamps,
)
from oracles import grid_count_reference, grid_timestamps_reference


def test_grid_examples():
    assert sample_timestamps(3.0, 1.0) == [0.0, 1.0, 2.0]
    assert sample_timestamps(3.0, 1.0, max_frames=2) == [0.0, 1.0]
    assert sample_timestamps(0.5, 1.0) == [0.0]
    assert sample_timestamps(2.0, 2.0) == [0.0]  # end-exclusive: t=2.0 is out
    assert sample_timestamps(10.0, 3.0) == [0.0, 3.0, 6.0, 9.0]


def test_grid_rejects_bad_interval():
    with pytest.raises(ValueError):
        sample_timestamps(3.0, 0.0)
    with pytest.raises(ValueError):
        sample_timestamps(3.0, -1.0)


def test_grid_max_frames_zero_is_empty():
    assert sample_timestamps(5.0, 1.0, max_frames=0) == []


# durations are built as interval*(n-1+frac) with frac well inside (0,1) so
# the ceil law is not sitting on a float boundary
@given(
    interval=st.floats(0.05, 60.0),
    n=st.integers(1, 400),
    frac=st.floats(0.05, 0.95),
    max_frames=st.one_of(st.none(), st.integers(0, 500)),
)
@settings(max_examples=300, deadline=None)
def test_grid_matches_reference(interval, n, frac, max_frames):
    duration = interval * (n - 1 + frac)
    got = sample_timestamps(duration, interval, max_frames)
    assert len(got) == grid_count_reference(duration, interval, max_frames)
    assert got == grid_timestamps_reference(duration, interval, max_frames)
    # grid invariants independent of the reference
    assert all(t < duration for t in got)
    for k, t in enumerate(got):
        assert t == k * interval


def test_probe_reads_synthetic_video(make_video):
    video = make_video(duration_s=2.5, fps=10.0, width=64, height=48)
    meta = probe_video(video)
    assert meta.path == str(video)
    assert meta.duration_s == pytest.approx(2.5)
    assert meta.fps == pytest.approx(10.0)
    assert (meta.width, meta.height) == (64, 48)


def test_probe_missing_file():
    with pytest.raises(FileNotFoundError):
        probe_video("/no/such/file.mp4")


def test_probe_non_video(tmp_path):
    junk = tmp_path / "junk.mp4"
    junk.write_bytes(b"mpeg? no." * 100)
    with pytest.raises(UnreadableMedia):
        probe_video(junk)


def test_sample_frames_counts_and_indices(make_video):
    video = make_video(duration_s=3.0, fps=10.0)
    meta = probe_video(video)
    result = sample_frames(meta, 0.7)
    expected = grid_count_reference(3.0, 0.7, None)
    assert len(result.frames) == expected
    assert result.decode_failures == []
    assert [f.frame_index for f in result.frames] == list(range(expected))
    assert [f.timestamp_s for f in result.frames] == sample_timestamps(3.0, 0.7)


def test_sample_frames_respects_max_frames(make_video):
    video = make_video(duration_s=5.0, fps=10.0)
    meta = probe_video(video)
    assert len(sample_frames(meta, 1.0, max_frames=3).frames) == 3
    assert sample_frames(meta, 1.0, max_frames=0).frames == []


def test_sampled_stills_decode_to_video_dimensions(make_video):
    video = make_video(duration_s=2.0, fps=10.0, width=80, height=60)
    meta = probe_video(video)
    for frame in sample_frames(meta, 1.0).frames:
        assert frame.format == "jpeg"
        arr = cv2.imdecode(np.frombuffer(frame.image, np.uint8), cv2.IMREAD_COLOR)
        assert arr.shape == (60, 80, 3)
        assert (frame.width, frame.height) == (80, 60)


def test_sampling_is_byte_deterministic(make_video):
    video = make_video(duration_s=2.0, fps=10.0)
    meta = probe_video(video)
    first = sample_frames(meta, 0.5)
    second = sample_frames(meta, 0.5)
    assert [f.image for f in first.frames] == [f.image for f in second.frames]


def test_png_format_supported(make_video):
    meta = probe_video(make_video(duration_s=1.0, fps=5.0))
    frames = sample_frames(meta, 1.0, image_format="png").frames
    assert frames[0].image.startswith(b"\x89PNG")


def test_extract_frame_at(make_video):
    meta = probe_video(make_video(duration_s=2.0, fps=10.0))
    frame = extract_frame_at(meta, 1.3)
    assert frame.frame_index == 0
    assert frame.timestamp_s == 1.3
    assert len(frame.image) > 0


def test_extract_frame_at_range_check(make_video):
    meta = probe_video(make_video(duration_s=2.0, fps=10.0))
    with pytest.raises(ValueError):
        extract_frame_at(meta, -0.1)
    with pytest.raises(ValueError):
        extract_frame_at(meta, 2.0)  # duration itself is out of range


def test_media_tool_env_override(monkeypatch, make_video):
    # quoted override must be split with shell rules, not run through a shell
    monkeypatch.setenv(MEDIA_TOOL_ENV, f"'{sys.executable}' -m framelens.media_tool")
    assert media_tool_argv() == [sys.executable, "-m", "framelens.media_tool"]
    meta = probe_video(make_video(duration_s=1.0, fps=5.0))
    assert meta.fps == pytest.approx(5.0)


def test_media_tool_missing_binary(monkeypatch, make_video):
    video = make_video(duration_s=1.0, fps=5.0)
    monkeypatch.setenv(MEDIA_TOOL_ENV, "/no/such/binary-for-media")
    with pytest.raises(ToolchainMissing):
        probe_video(video)


def test_decode_failure_is_recorded_not_raised(monkeypatch, make_video, tmp_path):
    # wrapper tool that marks every still as failed, leaving probe untouched
    wrapper = tmp_path / "flaky_tool.py"
    wrapper.write_text(
        "import json, subprocess, sys\n"
        f"argv = [{sys.executable!r}, '-m', 'framelens.media_tool'] + sys.argv[1:]\n"
        "proc = subprocess.run(argv, capture_output=True)\n"
        "if sys.argv[1] == 'extract':\n"
        "    manifest = json.loads(proc.stdout)\n"
        "    for entry in manifest['frames']:\n"
        "        if entry['time'] == 1.0:\n"
        "            entry.clear()\n"
        "            entry.update({'time': 1.0, 'ok': False, 'detail': 'injected'})\n"
        "    sys.stdout.write(json.dumps(manifest) + '\\n')\n"
        "else:\n"
        "    sys.stdout.buffer.write(proc.stdout)\n"
        "    sys.stderr.buffer.write(proc.stderr)\n"
        "sys.exit(proc.returncode)\n"
    )
    meta = probe_video(make_video(duration_s=3.0, fps=10.0))
    monkeypatch.setenv(MEDIA_TOOL_ENV, f"{sys.executable} {wrapper}")

    result = sample_frames(meta, 1.0)
    assert len(result.decode_failures) == 1
    assert result.decode_failures[0].timestamp_s == 1.0
    assert result.decode_failures[0].detail == "injected"
    # survivors re-indexed densely: no hole where t=1.0 would have been
    assert [f.frame_index for f in result.frames] == [0, 1]
    assert [f.timestamp_s for f in result.frames] == [0.0, 2.0]


def test_video_meta_validation():
    with pytest.raises(ValueError):
        VideoMeta(path="x", duration_s=0.0, fps=10.0, width=64, height=48)
    with pytest.raises(ValueError):
        VideoMeta(path="x", duration_s=1.0, fps=10.0, width=0, height=48)


def test_grid_count_never_exceeds_ceil():
    for duration, interval in [(3.0, 1.0), (2.999, 1.0), (3.001, 1.0), (0.1, 0.3)]:
        n = len(sample_timestamps(duration, interval))
        assert n == math.ceil(duration / interval)

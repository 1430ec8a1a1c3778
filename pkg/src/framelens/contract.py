"""The model output contract: versioned batch prompts and payload extraction.

Prompt templates are versioned text files under templates/; a ContractVersion
pins the template by content hash so artifacts record exactly which wording
produced them. Extraction is a purely lexical balanced-brace scan, because
hosted models routinely wrap their JSON in code fences or prose.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping

from .sampler import FrameSample

DEFAULT_BATCH_SIZE = 4
DEFAULT_MAX_REQUEST_BYTES = 20_000_000
DEFAULT_MAX_TOKENS = 1024
DEFAULT_TEMPERATURE = 0.0

_ATTR_NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")

DEFAULT_ATTRIBUTE_INSTRUCTIONS = {
    "emotion": "the person's apparent emotional expression, as a short lowercase phrase",
}


class ContractError(Exception):
    """Base class for output-contract failures."""


class EmptyBatch(ContractError):
    pass


class OversizedPayload(ContractError):
    pass


class NoJsonFound(ContractError):
    """No balanced top-level JSON object in the model text; fails the batch only."""


class MalformedJson(ContractError):
    pass


class WrongShape(ContractError):
    """Top level is not an object of arrays."""


@dataclass(frozen=True)
class AttributeSpec:
    """Which per-person attributes to request, with instruction text per attribute."""

    attributes: tuple[str, ...] = ("emotion",)
    instructions: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.attributes:
            raise ValueError("at least one attribute is required")
        seen = set()
        for name in self.attributes:
            if not _ATTR_NAME_RE.match(name):
                raise ValueError(f"attribute name must be a lowercase identifier: {name!r}")
            if name in seen:
                raise ValueError(f"duplicate attribute name: {name!r}")
            seen.add(name)

    def instruction_for(self, name: str) -> str:
        if name in self.instructions:
            return self.instructions[name]
        if name in DEFAULT_ATTRIBUTE_INSTRUCTIONS:
            return DEFAULT_ATTRIBUTE_INSTRUCTIONS[name]
        return f"the person's {name.replace('_', ' ')}, or \"unknown\""


@dataclass(frozen=True)
class ContractVersion:
    version_id: str
    template_hash: str


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    frame_index: int
    width: int
    height: int
    media_type: str
    data: bytes


@dataclass(frozen=True)
class ChatMessage:
    role: str
    parts: tuple[TextPart | ImagePart, ...]


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple[ChatMessage, ...]
    max_tokens: int
    temperature: float

    def __post_init__(self) -> None:
        if sum(1 for m in self.messages if m.role == "system") > 1:
            raise ValueError("at most one system message")


def template_text(version_id: str) -> str:
    name = f"batch_{version_id}.txt"
    try:
        return (resources.files("framelens") / "templates" / name).read_text()
    except FileNotFoundError as exc:
        raise ContractError(f"no prompt template for version {version_id!r}") from exc


def load_contract_version(version_id: str = "v1") -> ContractVersion:
    """Pin a template version; the hash is the sha256 of the template file bytes."""
    raw = template_text(version_id).encode()
    return ContractVersion(version_id=version_id, template_hash=hashlib.sha256(raw).hexdigest())


def frame_intro_text(frame_index: int, width: int, height: int) -> str:
    return f"Frame {frame_index} ({width}x{height} pixels):"


_FRAME_INTRO_RE = re.compile(r"^Frame (\d+) \((\d+)x(\d+) pixels\):$")


def parse_frame_intro(text: str) -> tuple[int, int, int] | None:
    m = _FRAME_INTRO_RE.match(text)
    if not m:
        return None
    return int(m.group(1)), int(m.group(2)), int(m.group(3))


def render_system_prompt(
    frames: list[FrameSample], spec: AttributeSpec, version: ContractVersion
) -> str:
    template = template_text(version.version_id)
    frame_keys = ", ".join(f'"{f.frame_index}"' for f in frames)
    attribute_keys = ", ".join(f'"{a}"' for a in spec.attributes)
    attribute_lines = "\n".join(
        f'- "{a}": {spec.instruction_for(a)}.' for a in spec.attributes
    )
    return template.format(
        frame_count=len(frames),
        frame_keys=frame_keys,
        attribute_keys=attribute_keys,
        attribute_lines=attribute_lines,
    )


def build_batch_request(
    frames: list[FrameSample],
    spec: AttributeSpec,
    version: ContractVersion,
    model_id: str,
    *,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    temperature: float = DEFAULT_TEMPERATURE,
    batch_limit: int = DEFAULT_BATCH_SIZE,
    max_request_bytes: int = DEFAULT_MAX_REQUEST_BYTES,
) -> ChatRequest:
    """Build one deterministic chat request for a batch of frames.

    The system message is the rendered contract template; the user message
    interleaves a frame-intro text part before each inline image, in
    frame_index order.
    """
    if not frames:
        raise EmptyBatch("batch must contain at least one frame")
    if len(frames) > batch_limit:
        raise ValueError(f"batch of {len(frames)} exceeds configured batch size {batch_limit}")
    ordered = sorted(frames, key=lambda f: f.frame_index)

    user_parts: list[TextPart | ImagePart] = []
    for f in ordered:
        user_parts.append(TextPart(frame_intro_text(f.frame_index, f.width, f.height)))
        user_parts.append(
            ImagePart(
                frame_index=f.frame_index,
                width=f.width,
                height=f.height,
                media_type=f"image/{f.format}",
                data=f.image,
            )
        )

    request = ChatRequest(
        model_id=model_id,
        messages=(
            ChatMessage(role="system", parts=(TextPart(render_system_prompt(ordered, spec, version)),)),
            ChatMessage(role="user", parts=tuple(user_parts)),
        ),
        max_tokens=max_tokens,
        temperature=temperature,
    )
    estimated = estimate_request_bytes(request)
    if estimated > max_request_bytes:
        raise OversizedPayload(
            f"estimated request size {estimated} exceeds limit {max_request_bytes}"
        )
    return request


def estimate_request_bytes(request: ChatRequest) -> int:
    """Estimated serialized size: text bytes + base64-expanded image bytes + envelope."""
    total = 256
    for message in request.messages:
        for part in message.parts:
            if isinstance(part, TextPart):
                total += len(part.text.encode()) + 64
            else:
                total += (len(part.data) * 4 + 2) // 3 + 128
    return total


def extract_json_payload(model_text: str) -> str:
    """Return the first balanced top-level JSON object embedded in model text.

    Purely lexical: scans for '{', walks balanced braces while respecting
    string literals and escapes, and ignores any fences or prose around the
    object. Idempotent on its own output.
    """
    start = model_text.find("{")
    while start != -1:
        end = _balanced_end(model_text, start)
        if end is not None:
            return model_text[start:end]
        start = model_text.find("{", start + 1)
    raise NoJsonFound("no balanced JSON object in model text")


def _balanced_end(text: str, start: int) -> int | None:
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i + 1
    return None


@dataclass
class BatchDetections:
    """Parsed payload for one batch: raw detection dicts per expected frame.

    Entries stay as raw JSON values until structural validation has accepted
    them; parse_warnings records fill-ins and dropped keys as "kind: detail"
    strings for the validator to carry into its report.
    """

    entries: dict[int, list] = field(default_factory=dict)
    parse_warnings: list[str] = field(default_factory=list)


def parse_batch_detections(raw: str, expected_frames: list[int]) -> BatchDetections:
    """Parse extracted JSON into per-frame detection lists.

    Missing expected frames become empty lists with a missing_frame warning;
    unexpected or non-integer keys are dropped with a warning. A value that is
    not an array makes the whole payload WrongShape.
    """
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"payload is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise WrongShape(f"top level is {type(payload).__name__}, expected an object")

    expected = set(expected_frames)
    batch = BatchDetections()
    kept: dict[int, list] = {}
    for key, value in payload.items():
        try:
            frame_index = int(key)
        except (TypeError, ValueError):
            batch.parse_warnings.append(f"dropped_key: non-integer frame key {key!r}")
            continue
        if frame_index not in expected:
            batch.parse_warnings.append(f"dropped_key: unexpected frame key {key!r}")
            continue
        if not isinstance(value, list):
            raise WrongShape(
                f"frame {frame_index} maps to {type(value).__name__}, expected an array"
            )
        kept[frame_index] = value

    for frame_index in sorted(expected):
        if frame_index in kept:
            batch.entries[frame_index] = kept[frame_index]
        else:
            batch.entries[frame_index] = []
            batch.parse_warnings.append(f"missing_frame: {frame_index}")
    return batch

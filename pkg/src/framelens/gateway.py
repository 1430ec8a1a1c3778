"""HTTP gateway to chat-completions-compatible inference endpoints.

Owns the wire protocol (request serialization and envelope parsing), error
classification into ProviderError kinds, and the retry loop with exponential
backoff. The API key is read from the FRAMELENS_API_KEY environment variable
and is never logged or serialized.
"""

from __future__ import annotations

import base64
import enum
import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Callable

import requests

from .contract import ChatMessage, ChatRequest, ImagePart, TextPart, parse_frame_intro

log = logging.getLogger(__name__)

API_KEY_ENV = "FRAMELENS_API_KEY"

DEFAULT_TIMEOUT_S = 120.0
DEFAULT_MAX_RETRIES = 3
DEFAULT_BACKOFF_BASE_S = 1.0
DEFAULT_BACKOFF_FACTOR = 2.0


class ErrorKind(str, enum.Enum):
    RATE_LIMITED = "rate_limited"
    AUTH_FAILED = "auth_failed"
    SERVER_ERROR = "server_error"
    TIMEOUT = "timeout"
    MALFORMED_RESPONSE = "malformed_response"
    NETWORK_ERROR = "network_error"


@dataclass
class ProviderError(Exception):
    kind: ErrorKind
    retryable: bool
    detail: str
    http_status: int | None = None
    retry_after_s: float | None = None

    def __post_init__(self) -> None:
        if self.kind is ErrorKind.RATE_LIMITED and not self.retryable:
            raise ValueError("rate-limited errors are retryable by definition")
        if self.kind is ErrorKind.AUTH_FAILED and self.retryable:
            raise ValueError("auth failures are never retryable")

    def __str__(self) -> str:
        status = f" (HTTP {self.http_status})" if self.http_status else ""
        return f"{self.kind.value}{status}: {self.detail}"


@dataclass
class EndpointConfig:
    """Connection settings for one chat-completions endpoint."""

    base_url: str
    model_id: str
    api_key: str = field(default="", repr=False)
    timeout_s: float = DEFAULT_TIMEOUT_S
    max_retries: int = DEFAULT_MAX_RETRIES
    backoff_base_s: float = DEFAULT_BACKOFF_BASE_S
    backoff_factor: float = DEFAULT_BACKOFF_FACTOR

    def __post_init__(self) -> None:
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.backoff_base_s <= 0:
            raise ValueError("backoff_base_s must be positive")
        if self.backoff_factor < 1:
            raise ValueError("backoff_factor must be >= 1")

    @classmethod
    def from_env(cls, base_url: str, model_id: str, **kwargs) -> "EndpointConfig":
        return cls(
            base_url=base_url,
            model_id=model_id,
            api_key=os.environ.get(API_KEY_ENV, ""),
            **kwargs,
        )


def serialize_chat_request(request: ChatRequest) -> dict:
    """Wire form: model, messages with text / inline-image content parts."""
    messages = []
    for message in request.messages:
        content = []
        for part in message.parts:
            if isinstance(part, TextPart):
                content.append({"type": "text", "text": part.text})
            else:
                b64 = base64.b64encode(part.data).decode()
                content.append(
                    {
                        "type": "image_url",
                        "image_url": {"url": f"data:{part.media_type};base64,{b64}"},
                    }
                )
        messages.append({"role": message.role, "content": content})
    return {
        "model": request.model_id,
        "messages": messages,
        "max_tokens": request.max_tokens,
        "temperature": request.temperature,
    }


def request_wire_bytes(request: ChatRequest) -> bytes:
    """Deterministic serialized body; identical requests serialize identically."""
    return json.dumps(serialize_chat_request(request), separators=(",", ":")).encode()


_DATA_URL_PREFIX = "data:"


def deserialize_chat_request(body: dict) -> ChatRequest:
    """Inverse of serialize_chat_request.

    Image frame tagging (frame_index, dimensions) is recovered from the
    frame-intro text part that the contract guarantees precedes every image;
    images without one get index 0 and zero dimensions.
    """
    messages = []
    for raw_message in body["messages"]:
        parts: list[TextPart | ImagePart] = []
        last_intro: tuple[int, int, int] | None = None
        content = raw_message["content"]
        if isinstance(content, str):
            parts.append(TextPart(content))
        else:
            for raw_part in content:
                if raw_part["type"] == "text":
                    parts.append(TextPart(raw_part["text"]))
                    last_intro = parse_frame_intro(raw_part["text"])
                elif raw_part["type"] == "image_url":
                    url = raw_part["image_url"]["url"]
                    if not url.startswith(_DATA_URL_PREFIX):
                        raise ValueError("only data: image URLs are supported")
                    header, b64 = url[len(_DATA_URL_PREFIX):].split(",", 1)
                    media_type = header.split(";")[0]
                    frame_index, width, height = last_intro or (0, 0, 0)
                    parts.append(
                        ImagePart(
                            frame_index=frame_index,
                            width=width,
                            height=height,
                            media_type=media_type,
                            data=base64.b64decode(b64),
                        )
                    )
                    last_intro = None
                else:
                    raise ValueError(f"unsupported content part type {raw_part['type']!r}")
        messages.append(ChatMessage(role=raw_message["role"], parts=tuple(parts)))
    return ChatRequest(
        model_id=body["model"],
        messages=tuple(messages),
        max_tokens=body["max_tokens"],
        temperature=body["temperature"],
    )


def _parse_retry_after(value: str | None) -> float | None:
    if not value:
        return None
    try:
        seconds = float(value)
    except ValueError:
        return None
    return seconds if seconds >= 0 else None


def classify_http_status(status: int, detail: str, retry_after_s: float | None = None) -> ProviderError:
    if status == 429:
        return ProviderError(
            ErrorKind.RATE_LIMITED, True, detail, http_status=status, retry_after_s=retry_after_s
        )
    if status in (401, 403):
        return ProviderError(ErrorKind.AUTH_FAILED, False, detail, http_status=status)
    if status >= 500:
        return ProviderError(ErrorKind.SERVER_ERROR, True, detail, http_status=status)
    return ProviderError(
        ErrorKind.SERVER_ERROR, False, f"unexpected status: {detail}", http_status=status
    )


def send_chat(
    request: ChatRequest,
    config: EndpointConfig,
    *,
    session: requests.Session | None = None,
) -> str:
    """Send one request and return the assistant text verbatim.

    Every failure surfaces as a classified ProviderError; nothing else is
    raised. The Authorization header is attached here and appears in no log
    line or artifact.
    """
    url = config.base_url.rstrip("/") + "/chat/completions"
    body = serialize_chat_request(request)
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"

    post = session.post if session is not None else requests.post
    try:
        response = post(url, json=body, headers=headers, timeout=config.timeout_s)
    except requests.Timeout as exc:
        raise ProviderError(
            ErrorKind.TIMEOUT, True, f"no response within {config.timeout_s}s"
        ) from exc
    except requests.ConnectionError as exc:
        raise ProviderError(ErrorKind.NETWORK_ERROR, True, str(exc)) from exc
    except requests.RequestException as exc:
        raise ProviderError(ErrorKind.NETWORK_ERROR, True, str(exc)) from exc

    if response.status_code != 200:
        detail = response.text[:500]
        raise classify_http_status(
            response.status_code,
            detail,
            _parse_retry_after(response.headers.get("Retry-After")),
        )

    try:
        envelope = response.json()
        content = envelope["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise ProviderError(
            ErrorKind.MALFORMED_RESPONSE,
            False,
            f"response is not a chat-completions envelope: {exc}",
            http_status=200,
        ) from exc
    if not isinstance(content, str):
        raise ProviderError(
            ErrorKind.MALFORMED_RESPONSE,
            False,
            f"assistant content is {type(content).__name__}, expected text",
            http_status=200,
        )
    return content


def send_with_retry(
    request: ChatRequest,
    config: EndpointConfig,
    *,
    session: requests.Session | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """send_chat with retries on retryable errors only.

    Retry k (1-based) sleeps backoff_base_s * backoff_factor**(k-1) first,
    except that a Retry-After header on a rate-limit response overrides the
    computed delay. Total attempts never exceed 1 + max_retries.
    """
    attempt = 0
    while True:
        attempt += 1
        try:
            return send_chat(request, config, session=session)
        except ProviderError as err:
            if not err.retryable or attempt > config.max_retries:
                raise
            delay = config.backoff_base_s * config.backoff_factor ** (attempt - 1)
            if err.kind is ErrorKind.RATE_LIMITED and err.retry_after_s is not None:
                delay = err.retry_after_s
            log.debug(
                "retrying after %s (attempt %d/%d, sleeping %.3fs)",
                err.kind.value,
                attempt,
                1 + config.max_retries,
                delay,
            )
            sleep(delay)

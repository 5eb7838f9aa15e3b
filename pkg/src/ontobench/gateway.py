"""Uniform access to chat-completion language models.

Two providers share one interface: an HTTP client speaking the de-facto
OpenAI-compatible chat-completions protocol, and a deterministic scripted
provider that replays a fixed list of responses so every pipeline can be
exercised offline.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Iterable, Protocol

import requests

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant", "tool")
FINISH_REASONS = ("stop", "tool_call", "length")


class GatewayError(Exception):
    """Base class for all gateway failures."""


class TransportError(GatewayError):
    """Retryable transport-level failure; carries the provider diagnostic."""

    def __init__(self, message: str, *, diagnostic: str | None = None, retryable: bool = True):
        super().__init__(message)
        self.diagnostic = diagnostic or message
        self.retryable = retryable


class ScriptExhaustedError(GatewayError):
    """The scripted provider has no steps left."""


@dataclass(frozen=True)
class ChatMessage:
    """One role-tagged turn of model interaction."""

    role: str
    content: str
    tool_call_id: str | None = None

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.role == "tool" and not self.tool_call_id:
            raise ValueError("role=tool requires tool_call_id")


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.4
    max_tokens: int = 1024
    model_name: str = "default"

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class ToolSpec:
    """A callable the model may request by name."""

    name: str
    description: str
    parameters_schema: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("tool name must be non-empty")


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ChatResponse:
    text: str = ""
    tool_call: ToolCall | None = None
    finish_reason: str = "stop"

    def __post_init__(self) -> None:
        if self.finish_reason not in FINISH_REASONS:
            raise ValueError(f"unknown finish_reason {self.finish_reason!r}")
        if (self.finish_reason == "tool_call") != (self.tool_call is not None):
            raise ValueError("finish_reason=tool_call iff tool_call is present")


class ChatProvider(Protocol):
    def complete(
        self,
        messages: list[ChatMessage],
        params: SamplingParams,
        tools: list[ToolSpec] | None,
    ) -> ChatResponse: ...


def _coerce_step(step: ChatResponse | ToolCall | str) -> ChatResponse:
    if isinstance(step, ChatResponse):
        return step
    if isinstance(step, ToolCall):
        return ChatResponse(text="", tool_call=step, finish_reason="tool_call")
    if isinstance(step, str):
        return ChatResponse(text=step, finish_reason="stop")
    raise TypeError(f"unsupported script step type {type(step).__name__}")


class ScriptedProvider:
    """Replays a fixed script of responses, one per completion call.

    Cursor advancement is serialized; a call past the end raises
    ScriptExhaustedError. The call counter is exposed for tests that pin
    how many completions a pipeline issues.
    """

    def __init__(self, steps: Iterable[ChatResponse | ToolCall | str]):
        self._steps = [_coerce_step(s) for s in steps]
        if not self._steps:
            raise ValueError("script must have at least one step")
        self._cursor = 0
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return self._cursor

    @property
    def remaining(self) -> int:
        return len(self._steps) - self._cursor

    def complete(
        self,
        messages: list[ChatMessage],
        params: SamplingParams,
        tools: list[ToolSpec] | None,
    ) -> ChatResponse:
        with self._lock:
            if self._cursor >= len(self._steps):
                raise ScriptExhaustedError(
                    f"script exhausted after {len(self._steps)} steps"
                )
            step = self._steps[self._cursor]
            self._cursor += 1
            return step


def script_provider(steps: Iterable[ChatResponse | ToolCall | str]) -> ScriptedProvider:
    """Build a scripted provider; raises on an empty script."""
    return ScriptedProvider(steps)


class HttpProvider:
    """OpenAI-compatible chat-completions client.

    POSTs to {base_url}/chat/completions with model, messages, temperature,
    max_tokens and (when given) tools; reads the first choice. Transport
    errors and 5xx responses are retried up to ``max_attempts`` with
    exponential backoff; 4xx responses are not retried.
    """

    def __init__(
        self,
        base_url: str,
        *,
        timeout_seconds: float = 60.0,
        api_key_env: str = "OPENAI_API_KEY",
        max_attempts: int = 3,
        backoff_seconds: float = 0.5,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout_seconds = timeout_seconds
        self.api_key_env = api_key_env
        self.max_attempts = max_attempts
        self.backoff_seconds = backoff_seconds
        self._session = session or requests.Session()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _payload(
        self,
        messages: list[ChatMessage],
        params: SamplingParams,
        tools: list[ToolSpec] | None,
    ) -> dict[str, Any]:
        wire_messages = []
        for m in messages:
            entry: dict[str, Any] = {"role": m.role, "content": m.content}
            if m.tool_call_id is not None:
                entry["tool_call_id"] = m.tool_call_id
            wire_messages.append(entry)
        payload: dict[str, Any] = {
            "model": params.model_name,
            "messages": wire_messages,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        if tools:
            payload["tools"] = [
                {
                    "type": "function",
                    "function": {
                        "name": t.name,
                        "description": t.description,
                        "parameters": t.parameters_schema,
                    },
                }
                for t in tools
            ]
        return payload

    @staticmethod
    def _parse_choice(body: dict[str, Any]) -> ChatResponse:
        try:
            choice = body["choices"][0]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(
                "malformed completion response", diagnostic=json.dumps(body)[:500]
            ) from exc
        message = choice.get("message") or {}
        text = message.get("content") or ""
        raw_calls = message.get("tool_calls") or []
        tool_call = None
        if raw_calls:
            fn = raw_calls[0].get("function") or {}
            raw_args = fn.get("arguments") or "{}"
            if isinstance(raw_args, str):
                try:
                    arguments = json.loads(raw_args)
                except json.JSONDecodeError:
                    arguments = {"_raw": raw_args}
            else:
                arguments = raw_args
            tool_call = ToolCall(name=fn.get("name", ""), arguments=arguments)
        reason = choice.get("finish_reason")
        if tool_call is not None:
            finish = "tool_call"
        elif reason == "length":
            finish = "length"
        else:
            finish = "stop"
        return ChatResponse(text=text, tool_call=tool_call, finish_reason=finish)

    def complete(
        self,
        messages: list[ChatMessage],
        params: SamplingParams,
        tools: list[ToolSpec] | None,
    ) -> ChatResponse:
        url = f"{self.base_url}/chat/completions"
        payload = self._payload(messages, params, tools)
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                resp = self._session.post(
                    url,
                    json=payload,
                    headers=self._headers(),
                    timeout=self.timeout_seconds,
                )
            except requests.RequestException as exc:
                last_error = TransportError(str(exc), diagnostic=repr(exc))
            else:
                if resp.status_code < 400:
                    return self._parse_choice(resp.json())
                diagnostic = resp.text[:500]
                if 400 <= resp.status_code < 500:
                    raise TransportError(
                        f"provider rejected request: HTTP {resp.status_code}",
                        diagnostic=diagnostic,
                        retryable=False,
                    )
                last_error = TransportError(
                    f"provider error: HTTP {resp.status_code}", diagnostic=diagnostic
                )
            if attempt + 1 < self.max_attempts:
                delay = self.backoff_seconds * (2**attempt)
                logger.warning("gateway attempt %d failed, retrying in %.1fs", attempt + 1, delay)
                time.sleep(delay)
        assert last_error is not None
        raise last_error


class Gateway:
    """Provider-backed chat completion with precondition checks."""

    def __init__(self, provider: ChatProvider, default_params: SamplingParams | None = None):
        self.provider = provider
        self.default_params = default_params or SamplingParams()

    def complete_chat(
        self,
        messages: list[ChatMessage],
        params: SamplingParams | None = None,
        tools: list[ToolSpec] | None = None,
    ) -> ChatResponse:
        if not messages:
            raise ValueError("messages must be non-empty")
        if messages[0].role not in ("system", "user"):
            raise ValueError("first message must have role system or user")
        if tools is not None:
            names = [t.name for t in tools]
            if len(names) != len(set(names)):
                raise ValueError("tool names must be unique")
        return self.provider.complete(messages, params or self.default_params, tools)


def scripted_gateway(
    steps: Iterable[ChatResponse | ToolCall | str],
    default_params: SamplingParams | None = None,
) -> Gateway:
    """Gateway over a fresh scripted provider; the workhorse of the test suite."""
    return Gateway(script_provider(steps), default_params=default_params)


def user(content: str) -> ChatMessage:
    return ChatMessage(role="user", content=content)


def system(content: str) -> ChatMessage:
    return ChatMessage(role="system", content=content)

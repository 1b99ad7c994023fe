"""Uniform chat-completion interface over multiple providers, plus a scripted mock.

Models are addressed as "provider/model-name"; a bare name falls back to the
configured default provider. The OpenAI chat-completions JSON shape is the
canonical wire dialect and other providers are adapted to it. Credentials come
from environment variables (optionally loaded from a .env file); their values
are redacted from every error message this module raises.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import httpx

from .errors import (
    MalformedResponseError,
    MissingCredentialError,
    ProviderHttpError,
    ScriptExhaustedError,
    TransportFailure,
    UnknownProviderError,
    UnknownScriptKeyError,
)

LOGGER = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 120.0
TRANSPORT_RETRIES = 2
RETRY_BACKOFF_S = 0.5

TEMPERATURE_RANGE = (0.0, 2.0)
TOP_P_MIN = 1e-3  # top_p must stay strictly positive after clamping

# provider prefix → (chat endpoint, credential variable, dialect)
PROVIDER_TABLE: dict[str, tuple[str, str | None, str]] = {
    "openai": ("https://api.openai.com/v1/chat/completions", "OPENAI_API_KEY", "openai"),
    "anthropic": ("https://api.anthropic.com/v1/messages", "ANTHROPIC_API_KEY", "anthropic"),
    "mistral": ("https://api.mistral.ai/v1/chat/completions", "MISTRAL_API_KEY", "openai"),
    "groq": ("https://api.groq.com/openai/v1/chat/completions", "GROQ_API_KEY", "openai"),
}


class ClampWarning(UserWarning):
    """A sampling parameter was outside its range and was clamped."""


@dataclass(frozen=True)
class ProviderRoute:
    provider: str
    endpoint: str
    credential_var: str | None
    dialect: str  # openai | anthropic | mock
    model: str


@dataclass
class CompletionRequest:
    model: str
    messages: list[dict[str, str]]
    temperature: float = 0.7
    top_p: float = 1.0
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.messages[0].get("role") not in ("system", "user"):
            raise ValueError("first message role must be system or user")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be positive, got {self.max_tokens}")
        low, high = TEMPERATURE_RANGE
        if not low <= self.temperature <= high:
            clamped = min(max(self.temperature, low), high)
            warnings.warn(
                f"temperature {self.temperature} clamped to {clamped}", ClampWarning, stacklevel=2
            )
            self.temperature = clamped
        if not TOP_P_MIN <= self.top_p <= 1.0:
            clamped = min(max(self.top_p, TOP_P_MIN), 1.0)
            warnings.warn(f"top_p {self.top_p} clamped to {clamped}", ClampWarning, stacklevel=2)
            self.top_p = clamped


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    provider: str = ""
    latency_s: float = 0.0


def resolve_provider(
    model: str,
    custom_endpoints: Mapping[str, Mapping[str, str]] | None = None,
    default_provider: str = "openai",
) -> ProviderRoute:
    """Split "provider/model" and look up endpoint, credential variable, dialect.

    Unknown prefixes fall back to the custom-endpoint table, which is how
    locally served models are addressed. Bare model names use the default
    provider.
    """
    if not model:
        raise ValueError("model must be non-empty")
    prefix, sep, rest = model.partition("/")
    if not sep:
        prefix, rest = default_provider, model
    if prefix == "mock":
        return ProviderRoute("mock", "", None, "mock", rest)
    entry = PROVIDER_TABLE.get(prefix)
    if entry is not None:
        endpoint, var, dialect = entry
        return ProviderRoute(prefix, endpoint, var, dialect, rest)
    custom = (custom_endpoints or {}).get(prefix)
    if custom is not None:
        return ProviderRoute(
            prefix,
            custom["url"],
            custom.get("credential_var"),
            custom.get("dialect", "openai"),
            rest,
        )
    raise UnknownProviderError(
        f"unknown provider prefix {prefix!r}; add it to the custom endpoint table"
    )


def load_dotenv(path: str | Path = ".env") -> dict[str, str]:
    """Read KEY=VALUE lines into a dict; missing file gives an empty dict."""
    path = Path(path)
    values: dict[str, str] = {}
    if not path.is_file():
        return values
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip().strip("\"'")
    return values


def _redact(text: str, secrets: list[str]) -> str:
    for secret in secrets:
        if secret:
            text = text.replace(secret, "[redacted]")
    return text


def messages_key(messages: list[dict[str, str]]) -> str:
    """Stable hash of a message list, used by the keyed mock."""
    canonical = json.dumps(messages, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class MockLlm:
    """Deterministic in-process provider for tests and offline runs.

    Three modes: a sequence consumed one response per call, a map keyed by a
    stable hash of the request messages, or echo (returns the last user
    message). Every request is captured on ``.requests``.
    """

    def __init__(
        self,
        sequence: list[str] | None = None,
        keyed: dict[str, str] | None = None,
        echo: bool = False,
    ):
        modes = sum((sequence is not None, keyed is not None, echo))
        if modes != 1:
            raise ValueError("exactly one of sequence, keyed, echo must be chosen")
        if sequence is not None and not sequence:
            raise ValueError("sequence script must be non-empty")
        if keyed is not None and not keyed:
            raise ValueError("keyed script must be non-empty")
        self._sequence = list(sequence) if sequence is not None else None
        self._keyed = dict(keyed) if keyed is not None else None
        self._echo = echo
        self._cursor = 0
        self._lock = threading.Lock()
        self.requests: list[CompletionRequest] = []

    @classmethod
    def sequence(cls, responses: list[str]) -> "MockLlm":
        return cls(sequence=responses)

    @classmethod
    def keyed(cls, responses: dict[str, str]) -> "MockLlm":
        return cls(keyed=responses)

    @classmethod
    def echo(cls) -> "MockLlm":
        return cls(echo=True)

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        with self._lock:
            self.requests.append(request)
            if self._sequence is not None:
                if self._cursor >= len(self._sequence):
                    raise ScriptExhaustedError(
                        f"mock script exhausted after {len(self._sequence)} responses"
                    )
                text = self._sequence[self._cursor]
                self._cursor += 1
            elif self._keyed is not None:
                key = messages_key(request.messages)
                if key not in self._keyed:
                    raise UnknownScriptKeyError(f"no scripted response for message hash {key[:12]}")
                text = self._keyed[key]
            else:
                users = [m["content"] for m in request.messages if m["role"] == "user"]
                text = users[-1] if users else ""
        return CompletionResponse(text=text, provider="mock")


def _openai_body(request: CompletionRequest, model: str) -> dict[str, Any]:
    return {
        "model": model,
        "messages": request.messages,
        "temperature": request.temperature,
        "top_p": request.top_p,
        "max_tokens": request.max_tokens,
    }


def _anthropic_body(request: CompletionRequest, model: str) -> dict[str, Any]:
    system_parts = [m["content"] for m in request.messages if m["role"] == "system"]
    chat = [m for m in request.messages if m["role"] != "system"]
    body: dict[str, Any] = {
        "model": model,
        "messages": chat,
        "temperature": request.temperature,
        "top_p": request.top_p,
        "max_tokens": request.max_tokens,
    }
    if system_parts:
        body["system"] = "\n\n".join(system_parts)
    return body


def _extract_text(dialect: str, payload: dict[str, Any]) -> tuple[str, int, int]:
    try:
        if dialect == "anthropic":
            text = "".join(
                block.get("text", "") for block in payload["content"] if isinstance(block, dict)
            )
            usage = payload.get("usage") or {}
            return text, usage.get("input_tokens", 0) or 0, usage.get("output_tokens", 0) or 0
        text = payload["choices"][0]["message"]["content"]
        if text is None:
            text = ""
        usage = payload.get("usage") or {}
        return text, usage.get("prompt_tokens", 0) or 0, usage.get("completion_tokens", 0) or 0
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedResponseError(f"provider response missing expected fields: {exc}") from exc


class LlmClient:
    """HTTP completion client with provider routing, retries, and redaction."""

    def __init__(
        self,
        credentials: Mapping[str, str] | None = None,
        custom_endpoints: Mapping[str, Mapping[str, str]] | None = None,
        default_provider: str = "openai",
        timeout_s: float = DEFAULT_TIMEOUT_S,
        transport: httpx.BaseTransport | None = None,
        retries: int = TRANSPORT_RETRIES,
        mock: MockLlm | None = None,
    ):
        env = dict(os.environ)
        env.update(load_dotenv())
        if credentials:
            env.update(credentials)
        self._credentials = env
        self._custom_endpoints = custom_endpoints or {}
        self._default_provider = default_provider
        self._timeout_s = timeout_s
        self._transport = transport
        self._retries = retries
        self._mock = mock

    def _secret_values(self) -> list[str]:
        return [v for k, v in self._credentials.items() if "KEY" in k or "TOKEN" in k]

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        route = resolve_provider(request.model, self._custom_endpoints, self._default_provider)
        if route.dialect == "mock":
            mock = self._mock
            if mock is None:
                mock = MockLlm.echo() if route.model == "echo" else None
            if mock is None:
                raise UnknownProviderError(
                    f"mock model {route.model!r} requires an injected mock script"
                )
            return mock.complete(request)
        headers = {"content-type": "application/json"}
        if route.credential_var is not None:
            key = self._credentials.get(route.credential_var, "")
            if not key:
                raise MissingCredentialError(route.credential_var)
            if route.dialect == "anthropic":
                headers["x-api-key"] = key
                headers["anthropic-version"] = "2023-06-01"
            else:
                headers["authorization"] = f"Bearer {key}"
        body = (
            _anthropic_body(request, route.model)
            if route.dialect == "anthropic"
            else _openai_body(request, route.model)
        )
        started = time.perf_counter()
        payload = self._post(route.endpoint, headers, body)
        latency = time.perf_counter() - started
        text, prompt_tokens, completion_tokens = _extract_text(route.dialect, payload)
        return CompletionResponse(
            text=text,
            prompt_tokens=prompt_tokens,
            completion_tokens=completion_tokens,
            provider=route.provider,
            latency_s=latency,
        )

    def _post(self, url: str, headers: dict[str, str], body: dict[str, Any]) -> dict[str, Any]:
        secrets = self._secret_values()
        last_error: Exception | None = None
        for attempt in range(self._retries + 1):
            try:
                with httpx.Client(timeout=self._timeout_s, transport=self._transport) as client:
                    response = client.post(url, headers=headers, json=body)
                if response.status_code >= 400:
                    excerpt = _redact(response.text[:300], secrets)
                    raise ProviderHttpError(response.status_code, excerpt)
                return response.json()
            except ProviderHttpError:
                raise
            except (httpx.TransportError, json.JSONDecodeError, ValueError) as exc:
                last_error = exc
                if attempt < self._retries:
                    LOGGER.warning("transport error, retrying: %s", _redact(str(exc), secrets))
                    time.sleep(RETRY_BACKOFF_S * (attempt + 1))
        raise TransportFailure(
            f"completion failed after {self._retries + 1} attempts: "
            f"{_redact(str(last_error), secrets)}"
        )

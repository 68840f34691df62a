"""Completion backends: fixture replay for offline runs, HTTP chat-completions for live ones."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx

from ..errors import BudgetExceeded, ConfigError, FixtureMiss, ProviderError, ProviderUnavailable

log = logging.getLogger(__name__)

API_KEY_ENV = "APIKG_API_KEY"

# Fixed budgets for entity extraction and the two fusion units; 1024 elsewhere.
UNIT_MAX_TOKENS = {
    "entity_extraction": 128,
    "entity_type_fusion": 4096,
    "relation_type_fusion": 4096,
}
DEFAULT_MAX_TOKENS = 1024


def max_tokens_for(unit: str) -> int:
    return UNIT_MAX_TOKENS.get(unit, DEFAULT_MAX_TOKENS)


def prompt_hash(rendered_prompt: str) -> str:
    return hashlib.sha256(rendered_prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ProviderRequest:
    rendered_prompt: str
    unit_name: str
    max_tokens: int
    temperature: float = 0.0
    n: int = 1
    frequency_penalty: float = 0.0
    presence_penalty: float = 0.0

    def __post_init__(self):
        if self.temperature != 0 or self.n != 1:
            raise ValueError("requests must be deterministic: temperature=0 and n=1")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    @classmethod
    def for_unit(cls, unit: str, rendered_prompt: str) -> "ProviderRequest":
        return cls(rendered_prompt, unit, max_tokens_for(unit))

    @property
    def prompt_hash(self) -> str:
        return prompt_hash(self.rendered_prompt)


@dataclass(frozen=True)
class ProviderResponse:
    raw_text: str
    provider_id: str
    usage: dict | None = None


class Provider(Protocol):
    def complete(self, request: ProviderRequest) -> ProviderResponse: ...


class RequestBudget:
    """Thread-safe cap on the number of provider calls; ``None`` means unlimited."""

    def __init__(self, limit: int | None = None):
        self.limit = limit
        self.used = 0
        self._lock = threading.Lock()

    def charge(self) -> None:
        with self._lock:
            if self.limit is not None and self.used >= self.limit:
                raise BudgetExceeded(self.limit)
            self.used += 1


class FixtureProvider:
    """Replays recorded responses keyed by ``(unit, sha256(prompt))``."""

    provider_id = "fixture"

    def __init__(self, responses: dict[tuple[str, str], str], budget: RequestBudget | None = None):
        self._responses = dict(responses)
        self.budget = budget or RequestBudget()
        self._lock = threading.Lock()
        self.calls = 0

    @classmethod
    def from_file(cls, path: str | Path, budget: RequestBudget | None = None) -> "FixtureProvider":
        try:
            records = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read fixture file {path}: {exc}") from exc
        responses = {}
        for rec in records:
            key = (rec["unit"], rec["prompt_hash"])
            if key in responses:
                raise ConfigError(f"{path}: duplicate fixture for {key}")
            responses[key] = rec["response"]
        return cls(responses, budget)

    def complete(self, request: ProviderRequest) -> ProviderResponse:
        self.budget.charge()
        with self._lock:
            self.calls += 1
        key = (request.unit_name, request.prompt_hash)
        if key not in self._responses:
            raise FixtureMiss(*key)
        return ProviderResponse(self._responses[key], self.provider_id)


class CallbackProvider:
    """Answers through a plain function; used to author fixtures and in tests."""

    provider_id = "callback"

    def __init__(self, fn: Callable[[ProviderRequest], str], budget: RequestBudget | None = None):
        self.fn = fn
        self.budget = budget or RequestBudget()

    def complete(self, request: ProviderRequest) -> ProviderResponse:
        self.budget.charge()
        return ProviderResponse(self.fn(request), self.provider_id)


@dataclass
class RecordingProvider:
    """Wraps another provider and keeps every exchange for writing a fixture file."""

    inner: Provider
    records: dict[tuple[str, str], str] = field(default_factory=dict)

    def __post_init__(self):
        self._lock = threading.Lock()

    def complete(self, request: ProviderRequest) -> ProviderResponse:
        response = self.inner.complete(request)
        with self._lock:
            self.records[(request.unit_name, request.prompt_hash)] = response.raw_text
        return response

    def dump(self, path: str | Path) -> None:
        payload = [
            {"unit": unit, "prompt_hash": h, "response": text}
            for (unit, h), text in sorted(self.records.items())
        ]
        Path(path).write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


_TRANSIENT_STATUS = {408, 409, 429, 500, 502, 503, 504}


class HttpProvider:
    """Chat-completion style JSON POST with bounded retries and an in-flight cap."""

    provider_id = "http"

    def __init__(
        self,
        base_url: str,
        model: str,
        *,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_attempts: int = 3,
        backoff: float = 1.0,
        max_in_flight: int = 4,
        budget: RequestBudget | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        if max_attempts < 1 or max_in_flight < 1:
            raise ConfigError("max_attempts and max_in_flight must be at least 1")
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.budget = budget or RequestBudget()
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self.attempts = 0

    def _payload(self, request: ProviderRequest) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": request.rendered_prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "n": request.n,
            "frequency_penalty": request.frequency_penalty,
            "presence_penalty": request.presence_penalty,
        }

    def complete(self, request: ProviderRequest) -> ProviderResponse:
        self.budget.charge()
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last_error: Exception | None = None
        with self._slots:
            for attempt in range(1, self.max_attempts + 1):
                self.attempts += 1
                try:
                    resp = self._client.post(self.url, json=self._payload(request), headers=headers)
                except httpx.TransportError as exc:
                    last_error = exc
                else:
                    if resp.status_code == 200:
                        return self._parse(resp)
                    if resp.status_code not in _TRANSIENT_STATUS:
                        raise ProviderError(f"provider returned HTTP {resp.status_code}: {resp.text[:200]}")
                    last_error = ProviderError(f"HTTP {resp.status_code}")
                if attempt < self.max_attempts:
                    delay = self.backoff * 2 ** (attempt - 1)
                    log.warning("provider call failed (%s); retry %d in %.2fs", last_error, attempt, delay)
                    time.sleep(delay)
        raise ProviderUnavailable(f"{self.url} unreachable after {self.max_attempts} attempts: {last_error}")

    def _parse(self, resp: httpx.Response) -> ProviderResponse:
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"unexpected completion payload: {resp.text[:200]}") from exc
        if text is None:
            raise ProviderError("completion payload has no content")
        return ProviderResponse(text, f"{self.provider_id}:{self.model}", body.get("usage"))

    def close(self) -> None:
        self._client.close()

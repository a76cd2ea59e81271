"""Minimal client for OpenAI-compatible ``/chat/completions`` endpoints."""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable

import httpx

from ..errors import (
    BackendFailure,
    ConfigInvalid,
    HttpStatusError,
    RetriesExhausted,
    Timeout,
    TransportError,
)

logger = logging.getLogger(__name__)

API_KEY_ENV = "HIVE_API_KEY"

Message = dict[str, str]


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str
    temperature: float = 0.0
    max_tokens: int = 1024
    timeout: float = 60.0
    max_attempts: int = 3
    backoff: float = 1.0
    backoff_factor: float = 2.0
    max_concurrency: int = 8

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ConfigInvalid(f"temperature must be >= 0, got {self.temperature}")
        if self.max_attempts < 1:
            raise ConfigInvalid(f"max_attempts must be >= 1, got {self.max_attempts}")
        if self.max_tokens < 1 or self.timeout <= 0 or self.max_concurrency < 1:
            raise ConfigInvalid("max_tokens, timeout and max_concurrency must be positive")
        if self.backoff < 0 or self.backoff_factor < 1:
            raise ConfigInvalid("backoff must be >= 0 and backoff_factor >= 1")

    def delay_before(self, attempt: int) -> float:
        """Sleep before ``attempt`` (1-based); the first attempt never waits."""
        if attempt <= 1:
            return 0.0
        return self.backoff * self.backoff_factor ** (attempt - 2)


def _retryable(exc: BackendFailure) -> bool:
    if isinstance(exc, HttpStatusError):
        return exc.status_code == 429 or exc.status_code >= 500
    return isinstance(exc, (Timeout, TransportError))


class ChatClient:
    """Thread-safe chat-completion client with bounded retries.

    Transport errors, timeouts, 429 and 5xx responses are retried with
    exponential backoff; other 4xx responses fail immediately.
    """

    def __init__(
        self,
        endpoint: EndpointConfig,
        *,
        api_key: str | None = None,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.endpoint = endpoint
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        if not key:
            logger.warning("%s is not set; sending unauthenticated requests", API_KEY_ENV)
        self._http = httpx.Client(
            base_url=endpoint.base_url.rstrip("/") + "/",
            headers=headers,
            timeout=endpoint.timeout,
            transport=transport,
        )
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(endpoint.max_concurrency)

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "ChatClient":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()

    def _attempt(self, body: dict[str, Any]) -> str:
        try:
            resp = self._http.post("chat/completions", json=body)
        except httpx.TimeoutException as exc:
            raise Timeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code != 200:
            raise HttpStatusError(resp.status_code, resp.text)
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion body: {exc!r}") from exc
        return content or ""

    def complete(self, messages: list[Message]) -> str:
        ep = self.endpoint
        body = {
            "model": ep.model,
            "messages": messages,
            "temperature": ep.temperature,
            "max_tokens": ep.max_tokens,
        }
        last: BackendFailure | None = None
        with self._slots:
            for attempt in range(1, ep.max_attempts + 1):
                delay = ep.delay_before(attempt)
                if delay:
                    self._sleep(delay)
                try:
                    return self._attempt(body)
                except BackendFailure as exc:
                    if not _retryable(exc):
                        raise
                    last = exc
                    logger.warning("attempt %d/%d failed: %s", attempt, ep.max_attempts, exc)
        raise RetriesExhausted(ep.max_attempts, last)


def complete(endpoint: EndpointConfig, messages: list[Message], **kwargs: Any) -> str:
    """One-shot completion with a throwaway client."""
    with ChatClient(endpoint, **kwargs) as client:
        return client.complete(messages)

"""Text-completion backends: a chat-completion HTTP client and its error types."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from typing import Callable, Optional, Protocol

import httpx

log = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "CLOUDANO_API_KEY"


@dataclass(frozen=True)
class AgentPrompt:
    system_text: str
    user_text: str
    expected_schema: str  # hypothesis | assessment | verdict | summary | lines

    def with_suffix(self, text: str) -> "AgentPrompt":
        return AgentPrompt(self.system_text, f"{self.user_text}\n\n{text}", self.expected_schema)


class Backend(Protocol):
    def complete(self, prompt: AgentPrompt) -> str: ...


class BackendError(RuntimeError):
    def __init__(self, message: str, attempts: int = 0):
        super().__init__(message)
        self.attempts = attempts


class TransportExhaustedError(BackendError):
    pass


class BackendTimeoutError(BackendError):
    pass


class AuthenticationError(BackendError):
    pass


class MissingAPIKeyError(BackendError):
    def __init__(self, env_var: str):
        super().__init__(f"API key environment variable {env_var} is not set")
        self.env_var = env_var


@dataclass(frozen=True)
class BackendConfig:
    endpoint_url: str
    model_name: str
    api_key_source: str = DEFAULT_API_KEY_ENV
    timeout_seconds: int = 60
    max_attempts: int = 3
    temperature: Optional[float] = None
    backoff_seconds: float = 1.0

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.timeout_seconds <= 0:
            raise ValueError("timeout_seconds must be positive")
        if self.temperature is not None and self.temperature < 0:
            raise ValueError("temperature must be >= 0")


class HTTPBackend:
    """Chat-completion client. Safe to share between threads."""

    def __init__(
        self,
        config: BackendConfig,
        client: Optional[httpx.Client] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        key = os.environ.get(config.api_key_source)
        if not key:
            raise MissingAPIKeyError(config.api_key_source)
        self._headers = {"Authorization": f"Bearer {key}"}
        self._client = client or httpx.Client(timeout=config.timeout_seconds)
        self._sleep = sleep

    def _payload(self, prompt: AgentPrompt) -> dict:
        body = {
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
        }
        if self.config.temperature is not None:
            body["temperature"] = self.config.temperature
        return body

    def complete(self, prompt: AgentPrompt) -> str:
        attempts = self.config.max_attempts
        timed_out = False
        last_error = ""
        for attempt in range(1, attempts + 1):
            try:
                resp = self._client.post(self.config.endpoint_url, json=self._payload(prompt),
                                         headers=self._headers, timeout=self.config.timeout_seconds)
            except httpx.TimeoutException as exc:
                timed_out, last_error = True, str(exc) or "timed out"
            except httpx.TransportError as exc:
                timed_out, last_error = False, str(exc) or type(exc).__name__
            else:
                if resp.status_code in (401, 403):
                    raise AuthenticationError(
                        f"endpoint rejected credentials from {self.config.api_key_source} "
                        f"(HTTP {resp.status_code})", attempt)
                if resp.status_code == 429 or resp.status_code >= 500:
                    timed_out, last_error = False, f"HTTP {resp.status_code}"
                elif resp.status_code >= 400:
                    raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}", attempt)
                else:
                    return _first_choice_text(resp, attempt)
            log.warning("backend attempt %d/%d failed: %s", attempt, attempts, last_error)
            if attempt < attempts:
                self._sleep(self.config.backoff_seconds * 2 ** (attempt - 1))
        if timed_out:
            raise BackendTimeoutError(f"request timed out after {attempts} attempts", attempts)
        raise TransportExhaustedError(f"transport failed after {attempts} attempts: {last_error}", attempts)


def _first_choice_text(resp: httpx.Response, attempt: int) -> str:
    try:
        choice = resp.json()["choices"][0]
        if "message" in choice:
            return choice["message"]["content"] or ""
        return choice["text"] or ""
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise BackendError(f"unexpected response shape: {exc!r}", attempt) from None


def backend_complete(config: BackendConfig, prompt: AgentPrompt) -> str:
    return HTTPBackend(config).complete(prompt)

"""Chat-completion client plus a canned-response mock for offline use."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import requests


class ChatTransportError(RuntimeError):
    """Network or protocol failure while talking to the chat endpoint."""


@dataclass(frozen=True)
class ChatEndpointConfig:
    """Connection settings for any OpenAI-style chat-completion endpoint."""

    base_url: str
    model_name: str
    api_key_env_var: str = "CHAT_API_KEY"
    timeout: float = 60.0
    max_retries: int = 2

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be nonnegative, got {self.max_retries}")


class ChatClient(Protocol):
    max_retries: int

    def complete(self, messages: list[dict]) -> str: ...


class HttpChatClient:
    """POSTs to {base_url}/chat/completions with the configured model."""

    def __init__(self, config: ChatEndpointConfig):
        self.config = config
        self.max_retries = config.max_retries

    def complete(self, messages: list[dict]) -> str:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_env_var)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {"model": self.config.model_name, "messages": messages}
        try:
            response = requests.post(url, json=payload, headers=headers, timeout=self.config.timeout)
            response.raise_for_status()
            body = response.json()
            return body["choices"][0]["message"]["content"]
        except requests.RequestException as exc:
            raise ChatTransportError(f"chat endpoint request failed: {exc}") from exc
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ChatTransportError(f"malformed chat endpoint response: {exc}") from exc


class MockChatClient:
    """Replays canned response texts in sequence, cycling when exhausted.

    Fixture files are JSON objects {"responses": [text, ...]}. Every request
    is recorded on .requests so tests can inspect the prompts sent.
    """

    def __init__(self, responses: list[str], max_retries: int = 2):
        if not responses:
            raise ValueError("mock chat client needs at least one canned response")
        self.responses = list(responses)
        self.max_retries = max_retries
        self.requests: list[list[dict]] = []
        self._cursor = 0

    @classmethod
    def from_fixture(cls, path: str | Path, max_retries: int = 2) -> "MockChatClient":
        record = json.loads(Path(path).read_text())
        return cls(record["responses"], max_retries=max_retries)

    def complete(self, messages: list[dict]) -> str:
        self.requests.append(messages)
        text = self.responses[self._cursor % len(self.responses)]
        self._cursor += 1
        return text

"""Uniform chat-completion and embedding interface over LLM providers.

Three kinds: a remote HTTP API (OpenAI-style JSON protocol), a locally hosted
server speaking the same protocol, and a deterministic scripted provider for
tests that matches pattern rules against the latest user message.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import struct
import threading
import time
from dataclasses import dataclass, field


class ProviderUnavailable(Exception):
    pass


class ScriptExhausted(Exception):
    """No scripted rule matched: a test configuration error."""


@dataclass
class Message:
    role: str  # system | user | assistant | tool
    content: str


@dataclass
class ChatRequest:
    messages: list[Message]
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.messages[0].role not in ("system", "user"):
            raise ValueError("first message must be system or user")

    def last_user_content(self) -> str:
        for msg in reversed(self.messages):
            if msg.role == "user":
                return msg.content
        return ""


@dataclass
class Completion:
    text: str
    usage: dict = field(default_factory=dict)


@dataclass
class ProviderConfig:
    kind: str  # remote_api | local_server | scripted
    model: str = ""
    endpoint: str | None = None
    credentials_ref: str | None = None  # env var holding the API key
    script_path: str | None = None
    embedding_dim: int = 32

    def __post_init__(self):
        if self.kind in ("remote_api", "local_server") and not self.endpoint:
            raise ValueError(f"{self.kind} provider requires an endpoint")
        if self.kind == "scripted" and not self.script_path:
            raise ValueError("scripted provider requires a script file")

    @staticmethod
    def from_dict(data: dict) -> "ProviderConfig":
        return ProviderConfig(
            kind=data["kind"],
            model=data.get("model", ""),
            endpoint=data.get("endpoint"),
            credentials_ref=data.get("credentialsRef"),
            script_path=data.get("scriptPath"),
            embedding_dim=data.get("embeddingDim", 32),
        )


class Provider:
    """Interface: complete() and embed(). Subclasses are behaviorally
    substitutable; the orchestrator and tests run unmodified against any."""

    def complete(self, request: ChatRequest, conversation_id: str = "default") -> Completion:
        raise NotImplementedError

    def embed(self, texts: list[str]) -> list[list[float]]:
        raise NotImplementedError


def _hash_vector(text: str, dim: int) -> list[float]:
    raw = []
    counter = 0
    while len(raw) < dim:
        digest = hashlib.sha256(f"{counter}:{text}".encode("utf-8")).digest()
        for i in range(0, len(digest) - 7, 8):
            (value,) = struct.unpack(">q", digest[i : i + 8])
            raw.append(value / 2**63)
        counter += 1
    raw = raw[:dim]
    norm = math.sqrt(sum(x * x for x in raw)) or 1.0
    return [x / norm for x in raw]


@dataclass
class ScriptRule:
    pattern: str
    response: str
    turn: int | None = None  # 1-based index of the call within a conversation


class ScriptedProvider(Provider):
    """Deterministic provider driven by ordered (pattern -> response) rules.

    Rules match against the latest user message; an optional turn constraint
    matches the rule only on the n-th complete() call of a conversation.
    First matching rule wins. Raises ScriptExhausted when nothing matches.
    """

    def __init__(self, rules: list[ScriptRule], embedding_dim: int = 32):
        self.rules = rules
        self.embedding_dim = embedding_dim
        self._turns: dict[str, int] = {}
        self._lock = threading.Lock()

    @staticmethod
    def from_file(path, embedding_dim: int = 32) -> "ScriptedProvider":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        rules = [
            ScriptRule(
                pattern=item["pattern"],
                response=item["response"],
                turn=item.get("turn"),
            )
            for item in data
        ]
        return ScriptedProvider(rules, embedding_dim=embedding_dim)

    def complete(self, request: ChatRequest, conversation_id: str = "default") -> Completion:
        with self._lock:
            turn = self._turns.get(conversation_id, 0) + 1
            self._turns[conversation_id] = turn
        last_user = request.last_user_content()
        for rule in self.rules:
            if rule.turn is not None and rule.turn != turn:
                continue
            if re.search(rule.pattern, last_user, re.DOTALL):
                return Completion(
                    text=rule.response,
                    usage={"prompt_tokens": len(last_user.split()), "completion_tokens": len(rule.response.split())},
                )
        raise ScriptExhausted(
            f"no rule matched on call {turn} of conversation {conversation_id!r}; "
            f"last user message started with: {last_user[:120]!r}"
        )

    def embed(self, texts: list[str]) -> list[list[float]]:
        return [_hash_vector(t, self.embedding_dim) for t in texts]


class HttpProvider(Provider):
    """OpenAI-style chat-completion and embeddings over HTTP.

    Covers both remote APIs and locally hosted open-model servers; transient
    network failures are retried twice with backoff.
    """

    RETRIES = 2

    def __init__(self, config: ProviderConfig, client=None):
        import httpx

        self.config = config
        self._client = client or httpx.Client(timeout=60.0)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.config.credentials_ref:
            key = os.environ.get(self.config.credentials_ref)
            if key:
                headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, path: str, payload: dict) -> dict:
        import httpx

        url = self.config.endpoint.rstrip("/") + path
        last_error = None
        for attempt in range(self.RETRIES + 1):
            try:
                response = self._client.post(url, json=payload, headers=self._headers())
                response.raise_for_status()
                return response.json()
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                last_error = exc
                if attempt < self.RETRIES:
                    time.sleep(0.2 * 2**attempt)
        raise ProviderUnavailable(str(last_error))

    def complete(self, request: ChatRequest, conversation_id: str = "default") -> Completion:
        payload = {
            "model": self.config.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        data = self._post("/chat/completions", payload)
        return Completion(
            text=data["choices"][0]["message"]["content"],
            usage=data.get("usage", {}),
        )

    def embed(self, texts: list[str]) -> list[list[float]]:
        data = self._post("/embeddings", {"model": self.config.model, "input": texts})
        return [item["embedding"] for item in data["data"]]


def make_provider(config: ProviderConfig) -> Provider:
    if config.kind == "scripted":
        return ScriptedProvider.from_file(config.script_path, config.embedding_dim)
    if config.kind in ("remote_api", "local_server"):
        return HttpProvider(config)
    raise ValueError(f"unknown provider kind {config.kind!r}")

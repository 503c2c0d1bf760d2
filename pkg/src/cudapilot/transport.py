"""Chat-completion transports: a real HTTP endpoint client and a scripted
stand-in for offline, deterministic runs."""

from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass

import requests


class TransportError(Exception):
    """Base error for chat transport failures."""


class TransientTransportError(TransportError):
    """Retryable failure: rate limit, 5xx, connection trouble."""


class AuthError(TransportError):
    pass


class ScriptExhausted(TransportError):
    def __init__(self, role: str):
        self.role = role
        super().__init__(f"scripted transport has no response left for role {role!r}")


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: dict


@dataclass(frozen=True)
class TransportResponse:
    text: str
    prompt_tokens: int | None = None
    completion_tokens: int | None = None
    tool_calls: tuple[ToolCall, ...] = ()


class HttpTransport:
    """OpenAI-style chat completions over HTTP.

    Credentials are read from the environment variable named in config,
    never from flags or files.
    """

    def __init__(self, endpoint: str, credential_env: str, timeout: float = 120.0):
        self.endpoint = endpoint.rstrip("/")
        self.credential_env = credential_env
        self.timeout = timeout

    def _headers(self) -> dict:
        key = os.environ.get(self.credential_env, "")
        if not key:
            raise AuthError(
                f"no credential found in environment variable {self.credential_env!r}"
            )
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def send(
        self,
        role: str,
        system_text: str,
        user_text: str,
        model: str,
        temperature: float,
    ) -> TransportResponse:
        payload = {
            "model": model,
            "temperature": temperature,
            "messages": [
                {"role": "system", "content": system_text},
                {"role": "user", "content": user_text},
            ],
        }
        try:
            resp = requests.post(
                f"{self.endpoint}/chat/completions",
                json=payload,
                headers=self._headers(),
                timeout=self.timeout,
            )
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise TransientTransportError(str(exc)) from exc
        if resp.status_code in (401, 403):
            raise AuthError(f"endpoint rejected credentials ({resp.status_code})")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientTransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        if resp.status_code != 200:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
            message = body["choices"][0]["message"]
        except (ValueError, KeyError, IndexError) as exc:
            raise TransportError(f"malformed completion payload: {exc}") from exc
        tool_calls = []
        for call in message.get("tool_calls") or []:
            fn = call.get("function", {})
            try:
                args = json.loads(fn.get("arguments", "{}"))
            except ValueError:
                args = {}
            tool_calls.append(ToolCall(name=fn.get("name", ""), arguments=args))
        usage = body.get("usage") or {}
        return TransportResponse(
            text=message.get("content") or "",
            prompt_tokens=usage.get("prompt_tokens"),
            completion_tokens=usage.get("completion_tokens"),
            tool_calls=tuple(tool_calls),
        )


@dataclass
class ScriptEntry:
    text: str = ""
    prompt_tokens: int | None = None
    completion_tokens: int | None = None
    error: str | None = None  # "rate_limit" | "auth" | "connection"
    tool_calls: tuple[ToolCall, ...] = ()


def _coerce_entry(raw) -> ScriptEntry:
    if isinstance(raw, str):
        return ScriptEntry(text=raw)
    if isinstance(raw, dict):
        calls = tuple(
            ToolCall(name=c["name"], arguments=c.get("arguments", {}))
            for c in raw.get("tool_calls", [])
        )
        return ScriptEntry(
            text=raw.get("text", ""),
            prompt_tokens=raw.get("prompt_tokens"),
            completion_tokens=raw.get("completion_tokens"),
            error=raw.get("error"),
            tool_calls=calls,
        )
    raise TypeError(f"script entries must be strings or objects, got {type(raw)}")


class ScriptedTransport:
    """Serves canned responses from per-role queues; used by tests and the
    CLI's --script flag.  Raises :class:`ScriptExhausted` when a queue runs
    dry so scripts stay exactly sized."""

    ROLES = ("planner", "coder", "compiler", "debugger")

    def __init__(self, script: dict):
        self.queues: dict[str, deque[ScriptEntry]] = {}
        for role in self.ROLES:
            self.queues[role] = deque(_coerce_entry(e) for e in script.get(role, []))
        self.calls: list[tuple[str, str, str]] = []

    @classmethod
    def from_file(cls, path) -> "ScriptedTransport":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh))

    def skip(self, role: str, count: int) -> None:
        """Fast-forward a role's queue (checkpoint resume)."""
        for _ in range(count):
            if self.queues[role.lower()]:
                self.queues[role.lower()].popleft()

    def remaining(self) -> dict[str, int]:
        return {role: len(q) for role, q in self.queues.items()}

    def send(
        self,
        role: str,
        system_text: str,
        user_text: str,
        model: str,
        temperature: float,
    ) -> TransportResponse:
        role = role.lower()
        self.calls.append((role, system_text, user_text))
        queue = self.queues.get(role)
        if not queue:
            raise ScriptExhausted(role)
        entry = queue.popleft()
        if entry.error == "rate_limit":
            raise TransientTransportError("scripted rate limit")
        if entry.error == "connection":
            raise TransientTransportError("scripted connection failure")
        if entry.error == "auth":
            raise AuthError("scripted auth failure")
        return TransportResponse(
            text=entry.text,
            prompt_tokens=entry.prompt_tokens,
            completion_tokens=entry.completion_tokens,
            tool_calls=entry.tool_calls,
        )

"""LLM backends: an HTTP chat-completion client and a deterministic scripted
stand-in that makes the whole agent pipeline testable offline."""

from __future__ import annotations

import json
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .bus import ToolCall

ENV_BASE_URL = "LOADLOOP_LLM_BASE_URL"
ENV_MODEL = "LOADLOOP_LLM_MODEL"
ENV_API_KEY = "LOADLOOP_LLM_API_KEY"


class BackendError(RuntimeError):
    pass


@dataclass
class BackendResponse:
    text: str
    tool_calls: List[ToolCall] = field(default_factory=list)
    prompt_tokens: int = 0
    completion_tokens: int = 0


def estimate_tokens(text: str) -> int:
    """Word-count approximation used by the scripted backend (4/3 per word)."""
    words = len(text.split())
    return int(round(words * 4 / 3))


class HTTPChatBackend:
    """Chat-completion client over the prevailing wire format: messages with
    roles, function-style tools, and a usage block in the response."""

    def __init__(
        self,
        base_url: Optional[str] = None,
        model: Optional[str] = None,
        api_key: Optional[str] = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        backoff: float = 0.5,
    ) -> None:
        self.base_url = (base_url or os.environ.get(ENV_BASE_URL, "")).rstrip("/")
        self.model = model or os.environ.get(ENV_MODEL, "")
        self.api_key = api_key or os.environ.get(ENV_API_KEY, "")
        if not self.base_url or not self.model:
            raise BackendError(
                f"HTTP backend needs {ENV_BASE_URL} and {ENV_MODEL} (or explicit arguments)"
            )
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff

    def _request_once(self, payload: dict) -> dict:
        body = json.dumps(payload).encode()
        req = urllib.request.Request(
            f"{self.base_url}/chat/completions",
            data=body,
            headers={
                "Content-Type": "application/json",
                **({"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}),
            },
            method="POST",
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return json.loads(resp.read().decode())

    def complete(
        self,
        messages: List[dict],
        tools: Optional[Sequence[dict]] = None,
        agent_id: Optional[str] = None,
    ) -> BackendResponse:
        payload: dict = {"model": self.model, "messages": messages}
        if tools:
            payload["tools"] = [
                {"type": "function", "function": t} if "function" not in t else t
                for t in tools
            ]
        last_error: Optional[Exception] = None
        for attempt in range(self.max_retries):
            try:
                data = self._request_once(payload)
                return self._parse(data)
            except (urllib.error.URLError, urllib.error.HTTPError, TimeoutError, json.JSONDecodeError) as exc:
                last_error = exc
                if attempt < self.max_retries - 1:
                    time.sleep(self.backoff * (2**attempt))
        raise BackendError(f"backend failed after {self.max_retries} attempts: {last_error}")

    @staticmethod
    def _parse(data: dict) -> BackendResponse:
        try:
            message = data["choices"][0]["message"]
        except (KeyError, IndexError) as exc:
            raise BackendError(f"malformed completion response: {exc}")
        calls: List[ToolCall] = []
        for tc in message.get("tool_calls") or []:
            fn = tc.get("function", tc)
            args = fn.get("arguments", {})
            if isinstance(args, str):
                try:
                    args = json.loads(args) if args.strip() else {}
                except json.JSONDecodeError:
                    args = {"_raw": args}
            calls.append(ToolCall(name=fn["name"], arguments=args))
        usage = data.get("usage", {})
        return BackendResponse(
            text=message.get("content") or "",
            tool_calls=calls,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
        )


@dataclass
class ScriptRule:
    """One canned completion: fires when the agent matches and the trigger
    substring appears in the prompt. Consumable rules fire once."""

    agent_id: Optional[str]
    when: str
    text: str = ""
    tool_calls: Tuple[ToolCall, ...] = ()
    once: bool = True
    consumed: bool = False

    def matches(self, agent_id: Optional[str], prompt: str) -> bool:
        if self.once and self.consumed:
            return False
        if self.agent_id is not None and self.agent_id != agent_id:
            return False
        return self.when in prompt


class ScriptedBackend:
    """Deterministic completion table. Rules are evaluated in order; the first
    match wins. Token usage is the word-count approximation on both sides."""

    def __init__(self, rules: Optional[List[ScriptRule]] = None) -> None:
        self.rules: List[ScriptRule] = list(rules or [])

    def add_rule(self, rule: ScriptRule) -> None:
        self.rules.append(rule)

    def complete(
        self,
        messages: List[dict],
        tools: Optional[Sequence[dict]] = None,
        agent_id: Optional[str] = None,
    ) -> BackendResponse:
        prompt = "\n".join(m.get("content", "") for m in messages)
        # triggers match conversation turns only, never the system sections,
        # so profile/workflow wording cannot fire a rule
        matchable = "\n".join(
            m.get("content", "") for m in messages if m.get("role") != "system"
        )
        for rule in self.rules:
            if rule.matches(agent_id, matchable):
                if rule.once:
                    rule.consumed = True
                completion_text = rule.text
                calls = list(rule.tool_calls)
                break
        else:
            completion_text = ""
            calls = []
        rendered = completion_text + "".join(
            json.dumps(tc.to_dict(), sort_keys=True) for tc in calls
        )
        return BackendResponse(
            text=completion_text,
            tool_calls=calls,
            prompt_tokens=estimate_tokens(prompt),
            completion_tokens=estimate_tokens(rendered),
        )

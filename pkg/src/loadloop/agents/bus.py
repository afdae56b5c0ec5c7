"""Topic-based message pool with subscription routing.

Publishes are totally ordered; each subscriber receives a matching message
exactly once (even when several of its topics match) and in pool order. The
pool keeps the full transcript for replay.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, Dict, List, Optional, Sequence, Tuple

REGISTERED_TOPICS = (
    "task.prepare",
    "task.status",
    "model.optimize",
    "model.execute",
    "deploy.forecast",
    "user.io",
    "system.error",
)

ROLE_MARKERS = ("user", "agent", "tool", "system")


class BusError(ValueError):
    pass


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: Dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "arguments": dict(self.arguments)}

    @classmethod
    def from_dict(cls, d: dict) -> "ToolCall":
        args = d.get("arguments", {})
        if isinstance(args, str):
            args = json.loads(args) if args.strip() else {}
        return cls(name=d["name"], arguments=dict(args))


@dataclass
class AgentMessage:
    sender: str
    topics: Tuple[str, ...]
    role_marker: str
    content: str
    tool_calls: Tuple[ToolCall, ...] = ()
    reply_to: Optional[int] = None
    id: int = -1          # assigned by the pool on publish
    timestamp: str = ""   # isolated from replay comparisons

    def __post_init__(self) -> None:
        if not self.topics:
            raise BusError("message needs at least one topic")
        if self.role_marker not in ROLE_MARKERS:
            raise BusError(f"unknown role marker {self.role_marker!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "sender": self.sender,
            "topics": list(self.topics),
            "role_marker": self.role_marker,
            "content": self.content,
            "tool_calls": [tc.to_dict() for tc in self.tool_calls],
            "reply_to": self.reply_to,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AgentMessage":
        return cls(
            sender=d["sender"],
            topics=tuple(d["topics"]),
            role_marker=d["role_marker"],
            content=d.get("content", ""),
            tool_calls=tuple(ToolCall.from_dict(tc) for tc in d.get("tool_calls", [])),
            reply_to=d.get("reply_to"),
            id=int(d.get("id", -1)),
            timestamp=d.get("timestamp", ""),
        )


class MessagePool:
    """Serialized event pool: registration, publish fan-out, and transcript."""

    def __init__(
        self,
        topics: Sequence[str] = REGISTERED_TOPICS,
        event_sink: Optional[Callable[[str, dict], None]] = None,
    ) -> None:
        self.topics = tuple(topics)
        self.messages: List[AgentMessage] = []
        self.subscriptions: Dict[str, Tuple[str, ...]] = {}
        self.inboxes: Dict[str, Deque[AgentMessage]] = {}
        self._order: List[str] = []
        self.event_sink = event_sink

    def register(self, agent_id: str, subscriptions: Sequence[str]) -> str:
        if agent_id in self.subscriptions:
            raise BusError(f"agent id {agent_id!r} already registered")
        subs = tuple(subscriptions)
        if not subs:
            raise BusError("subscription set must be non-empty")
        for t in subs:
            if t not in self.topics:
                raise BusError(f"unknown topic {t!r}")
        self.subscriptions[agent_id] = subs
        self.inboxes[agent_id] = deque()
        self._order.append(agent_id)
        return agent_id

    def publish(self, msg: AgentMessage) -> int:
        """Append to the pool and deliver to every subscriber of any listed
        topic exactly once. Returns the delivery count."""
        if msg.sender not in self.subscriptions:
            raise BusError(f"sender {msg.sender!r} is not registered")
        for t in msg.topics:
            if t not in self.topics:
                raise BusError(f"unknown topic {t!r}")
        msg.id = len(self.messages)
        self.messages.append(msg)

        count = 0
        topic_set = set(msg.topics)
        for agent_id in self._order:
            if topic_set & set(self.subscriptions[agent_id]):
                self.inboxes[agent_id].append(msg)
                count += 1
        if count == 0 and self.event_sink:
            self.event_sink(
                "warning",
                {"no_subscriber": {"message_id": msg.id, "topics": list(msg.topics)}},
            )
        return count

    def drain(self, agent_id: str) -> List[AgentMessage]:
        """Pop all pending deliveries for the agent, in pool order."""
        inbox = self.inboxes[agent_id]
        out = list(inbox)
        inbox.clear()
        return out

    def has_pending(self, agent_id: str) -> bool:
        return bool(self.inboxes[agent_id])

    def pending_agents(self) -> List[str]:
        return [a for a in self._order if self.inboxes[a]]

    def transcript_jsonl(self) -> str:
        return "".join(json.dumps(m.to_dict(), sort_keys=True) + "\n" for m in self.messages)

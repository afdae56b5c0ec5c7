"""Agent construction from the four prompt sections, plus the step loop that
turns backend completions into tool dispatches and published messages."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Dict, List, Optional, Tuple

from .backend import BackendError, BackendResponse
from .bus import AgentMessage, MessagePool, ToolCall

MEMORY_CAP = 200
MAX_REPAIR_ROUNDS = 2

MEMORY_POLICY_TEXT = (
    "Every incoming message is appended to your message buffer in arrival "
    "order and tagged with a role marker: user, agent, tool, or system. "
    "Treat tool messages as ground-truth results of your own tool calls."
)


@dataclass(frozen=True)
class ToolParam:
    name: str
    type: str = "string"
    required: bool = True


@dataclass(frozen=True)
class ToolDescriptor:
    name: str
    description: str
    params: Tuple[ToolParam, ...] = ()

    def render(self) -> str:
        args = ", ".join(
            f"{p.name}: {p.type}{'' if p.required else '?'}" for p in self.params
        )
        return f"- {self.name}({args}): {self.description}"

    def wire_schema(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "parameters": {
                "type": "object",
                "properties": {p.name: {"type": p.type} for p in self.params},
                "required": [p.name for p in self.params if p.required],
            },
        }


@dataclass(frozen=True)
class AgentProfile:
    agent_id: str
    profile_text: str
    workflow_text: str
    action_schema: Tuple[ToolDescriptor, ...]
    subscriptions: Tuple[str, ...]
    home_topic: str          # where this agent's tool results land
    output_topic: str        # where free-text output goes

    def validate(self, handlers: Dict[str, Callable]) -> None:
        if not self.subscriptions:
            raise ValueError(f"agent {self.agent_id!r} needs subscriptions")
        names = [t.name for t in self.action_schema]
        if len(names) != len(set(names)):
            raise ValueError(f"agent {self.agent_id!r} has duplicate tool names")
        for t in self.action_schema:
            if t.name not in handlers:
                raise ValueError(f"tool {t.name!r} has no registered handler")


def assemble_prompt(profile: AgentProfile, memory: List[AgentMessage]) -> str:
    """Deterministic four-section prompt plus the role-tagged message history."""
    lines: List[str] = []
    lines.append("# Profile")
    lines.append(profile.profile_text)
    lines.append("")
    lines.append("# Memory")
    lines.append(MEMORY_POLICY_TEXT)
    lines.append("")
    lines.append("# Workflow")
    lines.append(profile.workflow_text)
    lines.append("")
    lines.append("# Actions")
    if profile.action_schema:
        for tool in profile.action_schema:
            lines.append(tool.render())
    else:
        lines.append("- (none)")
    lines.append("")
    lines.append("# Message history")
    if memory:
        for msg in memory:
            lines.append(f"[{msg.role_marker}|{msg.sender}] {msg.content}")
    else:
        lines.append("(empty)")
    return "\n".join(lines)


class Agent:
    """One runtime agent: profile, bounded memory, tool handlers."""

    def __init__(
        self,
        profile: AgentProfile,
        handlers: Optional[Dict[str, Callable[[dict], object]]] = None,
    ) -> None:
        self.profile = profile
        self.handlers = dict(handlers or {})
        profile.validate(self.handlers)
        self.memory: List[AgentMessage] = []

    @property
    def agent_id(self) -> str:
        return self.profile.agent_id

    def remember(self, messages: List[AgentMessage]) -> None:
        self.memory.extend(messages)
        if len(self.memory) > MEMORY_CAP:
            # preserve the first message (the task preamble), drop oldest rest
            overflow = len(self.memory) - MEMORY_CAP
            self.memory = [self.memory[0]] + self.memory[1 + overflow :]

    def chat_messages(self) -> List[dict]:
        """Prompt in wire form: one system turn, then role-tagged memory."""
        system = assemble_prompt(self.profile, [])
        turns: List[dict] = [{"role": "system", "content": system}]
        for msg in self.memory:
            role = {"user": "user", "agent": "assistant", "tool": "tool", "system": "system"}[
                msg.role_marker
            ]
            turns.append({"role": role, "content": f"[{msg.sender}] {msg.content}"})
        return turns


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def step(
    agent: Agent,
    backend,
    pool: MessagePool,
    token_ledger=None,
) -> List[AgentMessage]:
    """Drain the agent's inbox, complete against the backend, dispatch tool
    calls, and publish the results. Returns the messages this step published."""
    agent.remember(pool.drain(agent.agent_id))

    published: List[AgentMessage] = []
    tools = [t.wire_schema() for t in agent.profile.action_schema]

    def record_usage(resp: BackendResponse) -> None:
        if token_ledger is not None:
            token_ledger.record(agent.agent_id, resp.prompt_tokens, resp.completion_tokens)

    def publish(msg: AgentMessage) -> None:
        pool.publish(msg)
        published.append(msg)

    try:
        response = backend.complete(agent.chat_messages(), tools, agent_id=agent.agent_id)
    except BackendError as exc:
        publish(
            AgentMessage(
                sender=agent.agent_id,
                topics=("system.error",),
                role_marker="system",
                content=f"backend failure: {exc}",
                timestamp=_now(),
            )
        )
        return published
    record_usage(response)

    for round_index in range(MAX_REPAIR_ROUNDS + 1):
        if response.text.strip():
            publish(
                AgentMessage(
                    sender=agent.agent_id,
                    topics=(agent.profile.output_topic,),
                    role_marker="agent",
                    content=response.text.strip(),
                    timestamp=_now(),
                )
            )
        had_error = False
        for call in response.tool_calls:
            handler = agent.handlers.get(call.name)
            if handler is None:
                result: object = {"error": f"unknown tool {call.name!r}"}
                had_error = True
            else:
                try:
                    result = handler(call.arguments)
                except Exception as exc:
                    result = {"error": f"{type(exc).__name__}: {exc}"}
                    had_error = True
            content = result if isinstance(result, str) else json.dumps(result, sort_keys=True)
            tool_msg = AgentMessage(
                sender=agent.agent_id,
                topics=(agent.profile.home_topic,),
                role_marker="tool",
                content=f"{call.name} -> {content}",
                timestamp=_now(),
            )
            publish(tool_msg)
        if not had_error or round_index == MAX_REPAIR_ROUNDS:
            break
        # give the backend a chance to repair with the error results in memory
        agent.remember(pool.drain(agent.agent_id))
        try:
            response = backend.complete(agent.chat_messages(), tools, agent_id=agent.agent_id)
        except BackendError as exc:
            publish(
                AgentMessage(
                    sender=agent.agent_id,
                    topics=("system.error",),
                    role_marker="system",
                    content=f"backend failure during repair: {exc}",
                    timestamp=_now(),
                )
            )
            break
        record_usage(response)

    return published

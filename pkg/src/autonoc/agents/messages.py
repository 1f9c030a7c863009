from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

ROLES = ("system", "user", "assistant", "tool")
FINAL_MARKER = "FINAL:"


@dataclass(frozen=True)
class ToolCall:
    id: str
    name: str
    args: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"id": self.id, "name": self.name, "args": dict(self.args)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ToolCall":
        return cls(str(data.get("id") or ""), str(data["name"]), dict(data.get("args") or {}))


@dataclass(frozen=True)
class Message:
    role: str
    content: str = ""
    tool_calls: tuple[ToolCall, ...] = ()
    tool_call_id: str | None = None
    name: str | None = None  # authoring agent for assistant messages, tool name for tool messages

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")

    @property
    def is_final(self) -> bool:
        return self.role == "assistant" and not self.tool_calls and self.content.startswith(FINAL_MARKER)

    def json_payload(self) -> Any:
        """Decoded JSON content of a tool message, or None."""
        try:
            return json.loads(self.content)
        except (TypeError, ValueError):
            return None

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"role": self.role, "content": self.content}
        if self.tool_calls:
            out["tool_calls"] = [c.to_dict() for c in self.tool_calls]
        if self.tool_call_id is not None:
            out["tool_call_id"] = self.tool_call_id
        if self.name is not None:
            out["name"] = self.name
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "Message":
        return cls(
            role=data["role"],
            content=data.get("content") or "",
            tool_calls=tuple(ToolCall.from_dict(c) for c in data.get("tool_calls") or ()),
            tool_call_id=data.get("tool_call_id"),
            name=data.get("name"),
        )


def system(content: str) -> Message:
    return Message("system", content)


def user(content: str) -> Message:
    return Message("user", content)


def assistant(content: str = "", *calls: ToolCall, name: str | None = None) -> Message:
    return Message("assistant", content, tuple(calls), name=name)


def call(name: str, **args) -> ToolCall:
    """Tool call without an id; the runtime assigns one."""
    return ToolCall("", name, args)

"""ReAct loop: alternate backend turns and tool execution until FINAL."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Protocol, Sequence

from autonoc.agents.messages import Message, ToolCall
from autonoc.coi import ValidationResult, validate_declaration
from autonoc.errors import AutonocError, BackendError

log = logging.getLogger(__name__)

DEFAULT_MAX_STEPS = 40
TERMINATIONS = ("final_answer", "step_limit", "backend_error", "validation_abort")
NUDGE = "Reply with tool calls, or with a message whose first line starts with FINAL:."


@dataclass(frozen=True)
class AgentSpec:
    id: str
    identity_name: str
    core_responsibility: str
    category: str  # "planner" | "task"
    tool_names: tuple[str, ...]
    system_prompt: str = ""


@dataclass(frozen=True)
class Tool:
    name: str
    description: str
    fn: Callable[["ToolContext", dict], Any]
    parameters: Mapping[str, Any] = field(
        default_factory=lambda: {"type": "object", "properties": {}, "additionalProperties": True})

    def wire_spec(self) -> dict:
        return {"type": "function",
                "function": {"name": self.name, "description": self.description,
                             "parameters": dict(self.parameters)}}


class ToolFailure(AutonocError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class ToolRegistry:
    def __init__(self, tools: Iterable[Tool] = ()):
        self._tools: dict[str, Tool] = {}
        for t in tools:
            self.register(t)

    def register(self, tool: Tool) -> None:
        if tool.name in self._tools:
            raise ValueError(f"tool {tool.name!r} registered twice")
        self._tools[tool.name] = tool

    def get(self, name: str) -> Tool | None:
        return self._tools.get(name)

    def names(self) -> list[str]:
        return sorted(self._tools)

    def for_agent(self, agent: AgentSpec) -> list[Tool]:
        return [self._tools[n] for n in agent.tool_names if n in self._tools]


@dataclass
class ToolContext:
    agent: AgentSpec
    activation_id: str
    call: ToolCall
    message: Message  # the assistant message that issued the call
    system: Any = None


class Backend(Protocol):
    def decide(self, agent: AgentSpec, history: Sequence[Message], tools: Sequence[Tool]) -> Message:
        ...


@dataclass(frozen=True)
class Limits:
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class DeclarationCheck:
    identity: str
    sender: str
    strict: bool = True


@dataclass
class Transcript:
    activation_id: str
    agent_id: str
    messages: list[Message] = field(default_factory=list)
    step_count: int = 0
    termination: str | None = None
    caller: str | None = None
    parent: str | None = None
    declaration: ValidationResult | None = None
    error: str | None = None

    def terminate(self, reason: str) -> None:
        if self.termination is not None:
            raise RuntimeError(f"termination already set to {self.termination}")
        if reason not in TERMINATIONS:
            raise ValueError(reason)
        self.termination = reason

    @property
    def final_answer(self) -> str | None:
        if self.termination != "final_answer":
            return None
        return self.messages[-1].content

    def header(self) -> dict:
        return {"activation": self.activation_id, "agent": self.agent_id, "caller": self.caller,
                "parent": self.parent, "step_count": self.step_count, "termination": self.termination,
                "declaration": None if self.declaration is None else self.declaration.to_dict(),
                "error": self.error}

    @classmethod
    def from_parts(cls, header: Mapping, messages: Sequence[Message]) -> "Transcript":
        decl = header.get("declaration")
        return cls(header["activation"], header["agent"], list(messages), header["step_count"],
                   header["termination"], header.get("caller"), header.get("parent"),
                   None if decl is None else ValidationResult(decl["passed"], tuple(decl["reasons"])),
                   header.get("error"))


def run_agent_turn(agent: AgentSpec, history: Sequence[Message], backend: Backend,
                   tools: Sequence[Tool] = ()) -> Message:
    if not history or history[0].role != "system":
        raise ValueError("history must begin with the agent's system message")
    msg = backend.decide(agent, history, tools)
    if msg.role != "assistant":
        raise BackendError(f"backend returned a {msg.role!r} message")
    return Message("assistant", msg.content, msg.tool_calls, None, agent.id)


def _encode_result(payload: Any) -> str:
    if isinstance(payload, str):
        return payload
    return json.dumps(payload, sort_keys=True, default=str)


def execute_tool(registry: ToolRegistry, agent: AgentSpec, call: ToolCall, ctx: ToolContext) -> Message:
    """Run one tool call; failures come back as an ``error`` payload, never raised."""
    tool = registry.get(call.name)
    if tool is None or call.name not in agent.tool_names:
        payload: Any = {"error": {"code": "tool-not-available",
                                  "message": f"{call.name!r} is not in the toolset of {agent.id}"}}
    else:
        try:
            payload = tool.fn(ctx, dict(call.args))
        except ToolFailure as exc:
            payload = {"error": {"code": exc.code, "message": str(exc)}}
        except (AutonocError, KeyError, TypeError, ValueError) as exc:
            payload = {"error": {"code": type(exc).__name__, "message": str(exc)}}
    return Message("tool", _encode_result(payload), tool_call_id=call.id, name=call.name)


def run_react_loop(
    agent: AgentSpec,
    goal: Message | Sequence[Message],
    backend: Backend,
    limits: Limits = Limits(),
    *,
    registry: ToolRegistry,
    activation_id: str = "a0",
    declaration_check: DeclarationCheck | None = None,
    system: Any = None,
    caller: str | None = None,
    parent: str | None = None,
) -> Transcript:
    """Drive one agent activation.

    Stops on a FINAL message, the step budget, a backend failure, or (strict
    mode only) a first message without a valid identity declaration.  The
    declaration result is recorded either way.
    """
    initial = [goal] if isinstance(goal, Message) else list(goal)
    transcript = Transcript(activation_id, agent.id, list(initial), caller=caller, parent=parent)
    history = [Message("system", agent.system_prompt)] + initial
    tools = registry.for_agent(agent)
    while True:
        if transcript.step_count >= limits.max_steps:
            transcript.terminate("step_limit")
            break
        try:
            msg = run_agent_turn(agent, history, backend, tools)
        except BackendError as exc:
            transcript.error = str(exc)
            transcript.terminate("backend_error")
            break
        transcript.step_count += 1
        step = transcript.step_count
        calls = tuple(c if c.id else ToolCall(f"{activation_id}.{step}.{i}", c.name, c.args)
                      for i, c in enumerate(msg.tool_calls))
        msg = Message("assistant", msg.content, calls, None, agent.id)

        if declaration_check is not None and transcript.declaration is None:
            result = validate_declaration(msg, {"identity": declaration_check.identity,
                                                "sender": declaration_check.sender})
            transcript.declaration = result
            if not result.passed and declaration_check.strict:
                # the rejected turn is kept for the record, its calls are never executed
                rejected = Message("assistant", msg.content, (), None, agent.id)
                transcript.messages.append(rejected)
                transcript.error = f"declaration rejected: {', '.join(result.reasons)}"
                transcript.terminate("validation_abort")
                log.info("%s: %s", activation_id, transcript.error)
                break

        history.append(msg)
        transcript.messages.append(msg)
        if msg.tool_calls:
            for c in msg.tool_calls:
                ctx = ToolContext(agent, activation_id, c, msg, system)
                result_msg = execute_tool(registry, agent, c, ctx)
                history.append(result_msg)
                transcript.messages.append(result_msg)
            continue
        if msg.is_final:
            transcript.terminate("final_answer")
            break
        nudge = Message("user", NUDGE)
        history.append(nudge)
        transcript.messages.append(nudge)
    return transcript

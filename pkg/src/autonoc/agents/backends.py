"""Decision backends: table-driven scripted policies, replay, and a remote chat endpoint.

Remote wire contract (one POST per agent turn)::

    request  {"model": str, "messages": [...], "tools": [...]}
    response {"message": {"content": str|null, "tool_calls": [...]}}
             or the chat-completions shape {"choices": [{"message": {...}}]}

Messages use the chat-completions layout; tool call arguments travel as a
JSON-encoded string.  See docs/wire_contract.md for the field-by-field table.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import httpx

from autonoc.agents.messages import Message, ToolCall
from autonoc.agents.runtime import AgentSpec, Tool
from autonoc.coi import Handoff, parse_handoff, parse_pseudo_system
from autonoc.errors import BackendError, HandoffParseError, NotAHandoffError

log = logging.getLogger(__name__)

ENV_URL = "AUTONOC_LLM_URL"
ENV_KEY = "AUTONOC_LLM_KEY"
ENV_MODEL = "AUTONOC_LLM_MODEL"
_GREETING_SENDER = re.compile(r"this is (?P<sender>.+?)\.?$")


# -- scripted ----------------------------------------------------------------


class View:
    """Read-only helpers over an agent's visible history."""

    def __init__(self, agent: AgentSpec, history: Sequence[Message]):
        self.agent = agent
        self.history = list(history)

    @property
    def opening(self) -> Message | None:
        """The message that started the activation (goal or handoff delivery)."""
        for m in self.history[1:]:
            if m.role in ("user", "tool"):
                return m
        return None

    @property
    def delivered(self) -> bool:
        o = self.opening
        return o is not None and o.role == "tool" and o.name == "handoff"

    @property
    def handoff(self) -> Handoff | None:
        o = self.opening
        if o is None:
            return None
        try:
            return parse_handoff(o.content)
        except (NotAHandoffError, HandoffParseError):
            return None

    @property
    def pseudo(self):
        o = self.opening
        return parse_pseudo_system(o.content) if o is not None and o.role == "tool" else None

    @property
    def sender(self) -> str | None:
        """Sender identity as the agent can read it: pseudo-system header first, then greeting."""
        block = self.pseudo
        if block is not None:
            m = re.search(r"handoff from (.+?)\.$", block.instructions)
            if m:
                return m.group(1)
        h = self.handoff
        if h is not None:
            m = _GREETING_SENDER.search(h.greeting)
            if m:
                return m.group("sender")
        return None

    def param(self, key: str, default: str | None = None) -> str | None:
        h = self.handoff
        return h.params.get(key, default) if h is not None else default

    @property
    def own(self) -> list[Message]:
        start = 0
        for i, m in enumerate(self.history):
            if m is self.opening:
                start = i + 1
                break
        return self.history[start:]

    @property
    def turns(self) -> int:
        return sum(1 for m in self.own if m.role == "assistant")

    def results(self, name: str | None = None) -> list[Any]:
        """Decoded tool results of this activation, optionally for one tool."""
        return [m.json_payload() if m.json_payload() is not None else m.content
                for m in self.own if m.role == "tool" and (name is None or m.name == name)]

    def last(self, name: str | None = None) -> Any:
        found = self.results(name)
        return found[-1] if found else None

    def text(self) -> str:
        return "\n".join(m.content for m in self.history)


@dataclass(frozen=True)
class Rule:
    name: str
    when: Callable[[View], bool]
    then: Callable[[View], Message]


@dataclass(frozen=True)
class RulePolicy:
    """Ordered (pattern over history -> action) rules; the first match acts."""

    policy_id: str
    rules: tuple[Rule, ...]

    def decide(self, agent: AgentSpec, history: Sequence[Message]) -> Message:
        view = View(agent, history)
        for rule in self.rules:
            if rule.when(view):
                return rule.then(view)
        return Message("assistant", f"FINAL: FAILED no rule of policy {self.policy_id} applies")


class ScriptedBackend:
    """Per-agent rule policies; a pure function of the visible history."""

    kind = "scripted"

    def __init__(self, policies: Mapping[str, RulePolicy], default: RulePolicy | None = None):
        self.policies = dict(policies)
        self.default = default

    def decide(self, agent: AgentSpec, history: Sequence[Message], tools: Sequence[Tool] = ()) -> Message:
        policy = self.policies.get(agent.id, self.default)
        if policy is None:
            raise BackendError(f"no scripted policy for agent {agent.id}")
        return policy.decide(agent, history)


class ReplayBackend:
    """Replays recorded assistant messages per agent, in order."""

    kind = "replay"

    def __init__(self, recorded: Mapping[str, Sequence[Message]]):
        self._queues = {aid: list(msgs) for aid, msgs in recorded.items()}

    @classmethod
    def from_transcripts(cls, transcripts) -> "ReplayBackend":
        recorded: dict[str, list[Message]] = {}
        for t in transcripts:
            recorded.setdefault(t.agent_id, []).extend(
                m for m in t.messages if m.role == "assistant" and m.name == t.agent_id)
        return cls(recorded)

    def decide(self, agent: AgentSpec, history: Sequence[Message], tools: Sequence[Tool] = ()) -> Message:
        queue = self._queues.get(agent.id)
        if not queue:
            raise BackendError(f"replay exhausted for agent {agent.id}")
        return queue.pop(0)


# -- remote ------------------------------------------------------------------


def to_wire(history: Sequence[Message]) -> list[dict]:
    out = []
    for m in history:
        if m.role == "assistant":
            entry: dict[str, Any] = {"role": "assistant", "content": m.content or None}
            if m.tool_calls:
                entry["tool_calls"] = [
                    {"id": c.id, "type": "function",
                     "function": {"name": c.name, "arguments": json.dumps(dict(c.args), sort_keys=True)}}
                    for c in m.tool_calls]
            if m.name:
                entry["name"] = m.name
        elif m.role == "tool":
            entry = {"role": "tool", "tool_call_id": m.tool_call_id, "content": m.content}
        else:
            entry = {"role": m.role, "content": m.content}
        out.append(entry)
    return out


def from_wire(data: Mapping) -> Message:
    """Assistant message from either accepted response shape."""
    if "choices" in data:
        try:
            msg = data["choices"][0]["message"]
        except (IndexError, KeyError, TypeError):
            raise BackendError("response has no choices[0].message") from None
    elif "message" in data:
        msg = data["message"]
    else:
        raise BackendError("response has neither 'message' nor 'choices'")
    calls = []
    for i, raw in enumerate(msg.get("tool_calls") or ()):
        fn = raw.get("function", raw)
        args = fn.get("arguments") or {}
        if isinstance(args, str):
            try:
                args = json.loads(args) if args.strip() else {}
            except ValueError:
                raise BackendError(f"tool call {i} has non-JSON arguments") from None
        if not isinstance(args, dict):
            raise BackendError(f"tool call {i} arguments are not an object")
        calls.append(ToolCall(str(raw.get("id") or ""), str(fn["name"]), args))
    return Message("assistant", msg.get("content") or "", tuple(calls))


@dataclass
class RemoteBackend:
    endpoint: str
    model: str = "default"
    api_key: str | None = None
    retries: int = 2
    timeout_s: float = 120.0
    transport: httpx.BaseTransport | None = field(default=None, repr=False)

    kind = "remote"

    @classmethod
    def from_env(cls, model: str | None = None, **kwargs) -> "RemoteBackend":
        url = os.environ.get(ENV_URL)
        if not url:
            raise BackendError(f"{ENV_URL} is not set")
        return cls(url, model or os.environ.get(ENV_MODEL, "default"), os.environ.get(ENV_KEY), **kwargs)

    def decide(self, agent: AgentSpec, history: Sequence[Message], tools: Sequence[Tool] = ()) -> Message:
        body = {"model": self.model, "messages": to_wire(history), "tools": [t.wire_spec() for t in tools]}
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last: Exception | None = None
        with httpx.Client(timeout=self.timeout_s, transport=self.transport) as client:
            for attempt in range(self.retries + 1):
                try:
                    resp = client.post(self.endpoint, json=body, headers=headers)
                    resp.raise_for_status()
                    return from_wire(resp.json())
                except (httpx.HTTPError, ValueError) as exc:
                    last = exc
                    log.warning("remote backend attempt %d failed: %s", attempt + 1, exc)
        raise BackendError(f"remote backend failed after {self.retries + 1} attempt(s): {last}")

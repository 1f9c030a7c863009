"""Straight-line agent programs replayed against the visible history.

A program is ordinary Python that calls tools through an ``Env``.  On every
turn the program is re-run from the start: calls whose results are already
in the activation's history return those results, and the first call
without one becomes the next assistant message.  The emitted action is
therefore a pure function of the history.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any, Callable, Sequence

from autonoc.agents.backends import View
from autonoc.agents.messages import Message, ToolCall
from autonoc.agents.runtime import AgentSpec
from autonoc.agents.session import RESUME_TEXT
from autonoc.coi import declaration

Program = Callable[["Env"], str]


class Pending(Exception):
    def __init__(self, call: ToolCall):
        self.call = call


class Finish(Exception):
    """Stop the program with a final answer (text after the FINAL: marker)."""


class Env:
    def __init__(self, view: View):
        self.view = view
        self._results = [(m.name, m.json_payload() if m.json_payload() is not None else m.content)
                         for m in view.own if m.role == "tool"]
        self._cursor = 0

    def raw(self, name: str, **args) -> Any:
        if self._cursor < len(self._results):
            seen, payload = self._results[self._cursor]
            self._cursor += 1
            if seen != name:
                raise Finish(f"FAILED script diverged: expected {name}, history has {seen}")
            return payload
        raise Pending(ToolCall("", name, args))

    def call(self, name: str, **args) -> Any:
        payload = self.raw(name, **args)
        if isinstance(payload, dict) and "error" in payload:
            err = payload["error"]
            raise Finish(f"FAILED {name}: {err.get('code')}: {err.get('message')}")
        return payload

    def param(self, key: str, default: str | None = None) -> str | None:
        return self.view.param(key, default)

    def need(self, key: str) -> str:
        value = self.param(key)
        if value is None:
            raise Finish(f"FAILED missing parameter {key}")
        return value

    @property
    def resumed(self) -> bool:
        return any(m.role == "user" and m.content == RESUME_TEXT for m in self.view.history)


def kv(text: str | None) -> dict[str, str]:
    """Parse ``key=value`` words from the first line of a result summary."""
    if not text:
        return {}
    first = text.split("\n", 1)[0]
    return dict(w.split("=", 1) for w in first.split() if "=" in w)


def unit_hash(*parts: str) -> float:
    """Deterministic value in [0, 1) from text."""
    digest = hashlib.sha256("\x1f".join(parts).encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2 ** 64


@dataclass(frozen=True)
class ProgramPolicy:
    """Runs ``select(view)``'s program; declares identity first when reached by a handoff."""

    policy_id: str
    select: Callable[[View], Program]

    def decide(self, agent: AgentSpec, history: Sequence[Message]) -> Message:
        view = View(agent, history)
        first = view.turns == 0 and view.delivered
        prefix = declaration(agent.identity_name, view.sender or "unknown sender") if first else ""
        try:
            text = self.select(view)(Env(view))
        except Pending as p:
            content = f"{prefix} Proceeding: {p.call.name}." if prefix else f"Calling {p.call.name}."
            return Message("assistant", content, (p.call,))
        except Finish as f:
            text = str(f)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            text = f"FAILED {type(exc).__name__}: {exc}"
        if first:
            # the declaration must open the activation, so the answer waits one turn
            return Message("assistant", prefix)
        return Message("assistant", f"FINAL: {text}")

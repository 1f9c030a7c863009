"""Chain-of-Identity: formatted handoffs, pseudo-system injection, declarations.

Handoff block grammar (one item per line)::

    @handoff to=<agent-id>
    greeting: <text>
    query: <text>
    params:
      <key>=<value>
    @end

Text values escape backslash as ``\\\\`` and newline as ``\\n``.  Params are
emitted in lexicographic key order.

Declaration grammar (prefix of the first assistant message after a handoff)::

    I am <identity>. Handoff from <sender> received and verified.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

from autonoc.errors import EncodingError, HandoffParseError, NotAHandoffError, RoutingError

PSEUDO_SYSTEM_TAG = "[PSEUDO-SYSTEM]"
_ID_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")
_HEADER_RE = re.compile(r"^@handoff to=(\S*)$")
_PSEUDO_RE = re.compile(
    r"^\[PSEUDO-SYSTEM\] You are (?P<identity>.+?)\. Core responsibility: (?P<resp>.*?)\. "
    r"You have received a handoff from (?P<sender>.+?)\.$"
)


@dataclass(frozen=True)
class Handoff:
    to: str
    greeting: str
    query: str
    params: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class PseudoSystemBlock:
    target_identity: str
    core_responsibility: str
    instructions: str

    def render(self) -> str:
        return (f"{PSEUDO_SYSTEM_TAG} You are {self.target_identity}. "
                f"Core responsibility: {self.core_responsibility}. {self.instructions}")


@dataclass(frozen=True)
class ValidationResult:
    passed: bool
    reasons: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"passed": self.passed, "reasons": list(self.reasons)}


def escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\r", "\\r").replace("\n", "\\n")


def unescape(text: str) -> str:
    out = []
    chars = iter(text)
    for c in chars:
        if c != "\\":
            out.append(c)
            continue
        nxt = next(chars, "")
        out.append({"n": "\n", "r": "\r", "\\": "\\"}.get(nxt, "\\" + nxt))
    return "".join(out)


def check_handoff(h: Handoff, target_name: str | None = None) -> None:
    """Raise EncodingError if ``h`` breaks a handoff invariant.

    When ``target_name`` (the recipient's identity name) is given the
    greeting must contain it verbatim.
    """
    if not _ID_RE.match(h.to or ""):
        raise EncodingError("to", f"invalid agent id {h.to!r}")
    if not h.greeting.strip():
        raise EncodingError("greeting", "must not be empty")
    if target_name is not None and target_name not in h.greeting:
        raise EncodingError("greeting", f"does not name the target {target_name!r}")
    if not h.query.strip():
        raise EncodingError("query", "must not be empty")
    for key, value in h.params.items():
        if not isinstance(key, str) or not _ID_RE.match(key):
            raise EncodingError(f"params.{key}", "keys must match [A-Za-z0-9_.-]+")
        if not isinstance(value, str):
            raise EncodingError(f"params.{key}", "values must be strings")


def encode_handoff(h: Handoff, target_name: str | None = None) -> str:
    check_handoff(h, target_name)
    lines = [f"@handoff to={h.to}", f"greeting: {escape(h.greeting)}", f"query: {escape(h.query)}", "params:"]
    lines += [f"  {key}={escape(h.params[key])}" for key in sorted(h.params)]
    lines.append("@end")
    return "\n".join(lines)


def parse_handoff(text: str) -> Handoff:
    """Extract and decode the first ``@handoff ... @end`` block in ``text``."""
    lines = text.split("\n")
    start = next((i for i, line in enumerate(lines) if line.startswith("@handoff")), None)
    if start is None:
        raise NotAHandoffError("no @handoff block found")

    def fail(offset: int, message: str):
        raise HandoffParseError(start + offset + 1, message)

    header = _HEADER_RE.match(lines[start])
    if not header or not _ID_RE.match(header.group(1)):
        fail(0, "expected '@handoff to=<id>'")
    expected = ("greeting: ", "query: ")
    values = []
    for offset, prefix in enumerate(expected, start=1):
        if start + offset >= len(lines) or not lines[start + offset].startswith(prefix):
            fail(offset, f"expected '{prefix.strip()}' line")
        values.append(unescape(lines[start + offset][len(prefix):]))
    if start + 3 >= len(lines) or lines[start + 3] != "params:":
        fail(3, "expected 'params:' line")
    params: dict[str, str] = {}
    offset = 4
    while True:
        if start + offset >= len(lines):
            fail(offset, "unterminated block, expected '@end'")
        line = lines[start + offset]
        if line == "@end":
            break
        if not line.startswith("  ") or "=" not in line:
            fail(offset, "expected '  <key>=<value>' or '@end'")
        key, value = line[2:].split("=", 1)
        if not _ID_RE.match(key):
            fail(offset, f"invalid param key {key!r}")
        if key in params:
            fail(offset, f"duplicate param key {key!r}")
        params[key] = unescape(value)
        offset += 1
    return Handoff(header.group(1), values[0], values[1], params)


def pseudo_system_header(identity: str, responsibility: str, sender: str) -> str:
    block = PseudoSystemBlock(identity, responsibility, f"You have received a handoff from {sender}.")
    return block.render()


def parse_pseudo_system(content: str) -> PseudoSystemBlock | None:
    first = content.split("\n", 1)[0]
    m = _PSEUDO_RE.match(first)
    if not m:
        return None
    return PseudoSystemBlock(m.group("identity"), m.group("resp"),
                             f"You have received a handoff from {m.group('sender')}.")


def pseudo_system_sender(content: str) -> str | None:
    m = _PSEUDO_RE.match(content.split("\n", 1)[0])
    return m.group("sender") if m else None


def make_handoff_tool_result(h: Handoff, target, *, sender: str, tool_call_id: str | None = None):
    """Tool message delivering ``h`` to ``target`` (an AgentSpec).

    The content is the pseudo-system header carrying the target's identity
    and core responsibility, followed by the encoded handoff block.
    """
    from autonoc.agents.messages import Message

    if h.to != target.id:
        raise RoutingError(f"handoff addressed to {h.to!r} delivered to {target.id!r}")
    header = pseudo_system_header(target.identity_name, target.core_responsibility, sender)
    content = f"{header}\n{encode_handoff(h, target.identity_name)}"
    return Message(role="tool", content=content, tool_call_id=tool_call_id, name="handoff")


def declaration(identity: str, sender: str, plan: str = "") -> str:
    text = f"I am {identity}. Handoff from {sender} received and verified."
    return f"{text} Proceeding: {plan}" if plan else text


def validate_declaration(message, expected: Mapping[str, str]) -> ValidationResult:
    """Check the opening of ``message`` (a Message or plain text).

    ``expected`` carries ``identity`` and ``sender``.  Only the content is
    inspected; tool calls in the same message come after it.
    """
    content = message if isinstance(message, str) else (message.content or "")
    identity, sender = expected["identity"], expected["sender"]
    if not content.startswith("I am "):
        return ValidationResult(False, ("missing declaration",))
    reasons = []
    rest = content[len("I am "):]
    if rest.startswith(f"{identity}. "):
        rest = rest[len(identity) + 2:]
    else:
        reasons.append("identity mismatch")
        cut = rest.find(". ")
        rest = rest[cut + 2:] if cut >= 0 else ""
    ack = " received and verified."
    if not rest.startswith("Handoff from ") or ack not in rest:
        reasons.append("missing acknowledgement")
    elif rest[len("Handoff from "):rest.index(ack)] != sender:
        reasons.append("sender mismatch")
    return ValidationResult(not reasons, tuple(reasons))

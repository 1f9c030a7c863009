"""Agent runtime: messages, the ReAct loop, backends and multi-agent sessions."""

from autonoc.agents.backends import RemoteBackend, ReplayBackend, Rule, RulePolicy, ScriptedBackend, View
from autonoc.agents.messages import Message, ToolCall
from autonoc.agents.runtime import (
    AgentSpec,
    DeclarationCheck,
    Limits,
    Tool,
    ToolContext,
    ToolFailure,
    ToolRegistry,
    Transcript,
    execute_tool,
    run_agent_turn,
    run_react_loop,
)
from autonoc.agents.session import SESSION_TOOLS, AgentSystem

__all__ = [
    "AgentSpec", "AgentSystem", "DeclarationCheck", "Limits", "Message", "RemoteBackend", "ReplayBackend",
    "Rule", "RulePolicy", "SESSION_TOOLS", "ScriptedBackend", "Tool", "ToolCall", "ToolContext",
    "ToolFailure", "ToolRegistry", "Transcript", "View", "execute_tool", "run_agent_turn", "run_react_loop",
]

"""Pluggable backends: interfaces, routing, token ledger, tool services, scripted doubles."""
from .base import (
    AgentBackend,
    AgentRequest,
    BackendRegistry,
    PlannerBackend,
    ReplannerBackend,
    SynthesizerBackend,
    VerifierBackend,
    route_with_fallback,
)
from .ledger import Phase, TokenLedger, charge_tokens
from .llm import LLMBackends, llm_registry
from .tools import ToolResponse, ToolServer, ToolSession, list_tools, tool_service_call

__all__ = [
    "AgentBackend",
    "AgentRequest",
    "BackendRegistry",
    "LLMBackends",
    "Phase",
    "PlannerBackend",
    "ReplannerBackend",
    "SynthesizerBackend",
    "TokenLedger",
    "ToolResponse",
    "ToolServer",
    "ToolSession",
    "VerifierBackend",
    "charge_tokens",
    "list_tools",
    "llm_registry",
    "route_with_fallback",
    "tool_service_call",
]

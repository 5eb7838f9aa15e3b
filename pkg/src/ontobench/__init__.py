"""ontobench: knowledge-graph retrieval, agent orchestration, and force-field fitting."""

__version__ = "0.1.0"

from .gateway import (  # noqa: F401
    ChatMessage,
    ChatResponse,
    Gateway,
    GatewayError,
    SamplingParams,
    ScriptExhaustedError,
    ToolCall,
    ToolSpec,
    script_provider,
    scripted_gateway,
)

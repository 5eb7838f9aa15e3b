"""Multi-agent group chat engine, code-execution loop, and scenario presets."""

from .chat import (
    STATUS_HUMAN_ENDED,
    STATUS_MAX_ROUNDS,
    STATUS_TERMINATED,
    AgentProfile,
    ChatHooks,
    ConsoleHuman,
    HumanSource,
    ScriptedHuman,
    ToolRegistry,
    ToolResult,
    Transcript,
    Turn,
    detect_termination,
    dispatch_tool_call,
    run_group_chat,
    select_next_speaker,
    turn_from_dict,
    turn_to_dict,
)
from .codeexec import (
    TIMEOUT_EXIT_CODE,
    CodeBlock,
    ExecutionResult,
    SandboxConfig,
    combine_results,
    execute_code_block,
    extract_code_blocks,
    format_execution_feedback,
    run_code_loop,
)
from .scenarios import (
    DEMO_ENERGY_TABLE,
    ScenarioBundle,
    boss_demo,
    build_expert_registry,
    build_molecular_design_registry,
    code_demo,
    code_loop_agents,
    expert_team_agents,
    molecular_design_agents,
    molecular_design_demo,
    resolve_scenario,
    scenario_from_spec,
)

__all__ = [
    "AgentProfile",
    "ChatHooks",
    "CodeBlock",
    "ConsoleHuman",
    "DEMO_ENERGY_TABLE",
    "ExecutionResult",
    "HumanSource",
    "SandboxConfig",
    "ScenarioBundle",
    "ScriptedHuman",
    "boss_demo",
    "code_demo",
    "molecular_design_demo",
    "resolve_scenario",
    "scenario_from_spec",
    "STATUS_HUMAN_ENDED",
    "STATUS_MAX_ROUNDS",
    "STATUS_TERMINATED",
    "TIMEOUT_EXIT_CODE",
    "ToolRegistry",
    "ToolResult",
    "Transcript",
    "Turn",
    "build_expert_registry",
    "build_molecular_design_registry",
    "code_loop_agents",
    "combine_results",
    "detect_termination",
    "dispatch_tool_call",
    "execute_code_block",
    "expert_team_agents",
    "extract_code_blocks",
    "format_execution_feedback",
    "molecular_design_agents",
    "run_code_loop",
    "run_group_chat",
    "select_next_speaker",
    "turn_from_dict",
    "turn_to_dict",
]

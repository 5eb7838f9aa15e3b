"""Scenario presets wiring the published agent teams to their tools.

System messages and tool descriptions come from the versioned preset
config; handlers wrap the chemistry helpers and the retrieval answer calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

from .. import presets
from ..chemtools import (
    EnergyBackend,
    compute_energy,
    coords_from_smiles,
    format_coordinates,
)
from ..gateway import ChatResponse, Gateway, ToolCall, ToolSpec, scripted_gateway
from ..kgraph import KnowledgeGraph, answer_with_graph
from ..retrieval import IndexStore, answer_with_rag
from .chat import AgentProfile, ToolRegistry

# Scripted reference energies (Hartree) for the linear-chain demo molecules.
DEMO_ENERGY_TABLE = {
    "CCCCCCC": -274.4099422040276,
    "CCCCOCC": -310.22752228780735,
    "CCCCNCC": -290.39936318417176,
}

DEMO_DESIGN_QUESTION = (
    "Consider this molecule in SMILES representation: CCCCXCC, where X is one of "
    "(C, O, N). Which of these options leads to the lowest energy structure?"
)


def _tool_spec(name: str) -> ToolSpec:
    return ToolSpec(
        name=name,
        description=presets.tool_description(name),
        parameters_schema=presets.tool_parameters(name),
    )


def build_molecular_design_registry(energy_table: Mapping[str, float]) -> ToolRegistry:
    """coords_from_SMILES + query_DFT over a scripted energy table."""
    backend = EnergyBackend.scripted(energy_table)
    registry = ToolRegistry()

    def coords_handler(arguments: dict[str, Any]) -> str:
        smiles = arguments.get("SMILES") or arguments.get("smiles") or ""
        return format_coordinates(coords_from_smiles(smiles))

    def dft_handler(arguments: dict[str, Any]) -> float:
        coordinates = arguments.get("coordinates") or ""
        return compute_energy(coordinates, backend)

    registry.register(_tool_spec("coords_from_SMILES"), coords_handler)
    registry.register(_tool_spec("query_DFT"), dft_handler)
    return registry


def molecular_design_agents() -> list[AgentProfile]:
    return [
        AgentProfile(
            name="User",
            system_message=presets.system_message("user"),
            is_human_proxy=True,
        ),
        AgentProfile(name="Planner", system_message=presets.system_message("planner")),
        AgentProfile(
            name="Coordinate retriever",
            system_message=presets.system_message("coordinate_retriever"),
            tool_names=("coords_from_SMILES",),
        ),
        AgentProfile(
            name="Chatbot",
            system_message=presets.system_message("chatbot"),
            tool_names=("coords_from_SMILES", "query_DFT"),
        ),
    ]


def build_expert_registry(
    stores: Mapping[str, IndexStore],
    gateway: Gateway,
    k: int = 4,
    graphs: Mapping[str, "KnowledgeGraph"] | None = None,
) -> ToolRegistry:
    """retrieve_content_* tools answering from per-expert index stores.

    ``stores`` maps the suffixes protein / moly / book to their stores.
    Experts default to plain vector retrieval; listing a suffix in
    ``graphs`` switches that expert to graph-augmented answering.
    """
    graphs = graphs or {}
    registry = ToolRegistry()
    for suffix, store in stores.items():
        name = f"retrieve_content_{suffix}"
        graph = graphs.get(suffix)

        def handler(
            arguments: dict[str, Any],
            _store: IndexStore = store,
            _graph: "KnowledgeGraph | None" = graph,
        ) -> str:
            message = arguments.get("message") or ""
            if _graph is not None:
                return answer_with_graph(_graph, _store, message, gateway, k).answer
            return answer_with_rag(_store, message, gateway, k).answer

        registry.register(_tool_spec(name), handler)
    return registry


def expert_team_agents() -> list[AgentProfile]:
    expert_tools = (
        "retrieve_content_protein",
        "retrieve_content_moly",
        "retrieve_content_book",
    )
    return [
        AgentProfile(
            name="Boss",
            system_message=presets.system_message("boss"),
            is_human_proxy=True,
            human_input_mode="on_terminate",
        ),
        AgentProfile(
            name="Senior Engineer",
            system_message=presets.system_message("senior_engineer"),
            tool_names=expert_tools,
        ),
        AgentProfile(
            name="Modeling Expert",
            system_message=presets.system_message("modeling_expert"),
            tool_names=expert_tools,
        ),
        AgentProfile(
            name="Reviewer",
            system_message=presets.system_message("reviewer"),
        ),
    ]


def code_loop_agents() -> tuple[AgentProfile, AgentProfile]:
    assistant = AgentProfile(
        name="Assistant", system_message=presets.system_message("code_assistant")
    )
    executor = AgentProfile(
        name="User",
        system_message=presets.system_message("code_executor"),
        can_execute_code=True,
        is_human_proxy=True,
    )
    return assistant, executor


@dataclass
class ScenarioBundle:
    """Everything a runner needs to start a session.

    ``script`` (when set) backs a scripted gateway so the scenario replays
    offline; otherwise the caller supplies a live gateway.
    """

    name: str
    agents: list[AgentProfile]
    script: list[ChatResponse | ToolCall | str] | None = None
    registry: ToolRegistry | None = None
    max_rounds: int = 12
    policy: str = "round_robin"
    kind: str = "group_chat"  # group_chat | code_loop
    initial_message: str = ""

    def make_gateway(self, fallback: Gateway | None = None) -> Gateway:
        if self.script is not None:
            return scripted_gateway(self.script)
        if fallback is None:
            raise ValueError(f"scenario {self.name!r} needs a live gateway")
        return fallback


def molecular_design_demo(question: str = DEMO_DESIGN_QUESTION) -> ScenarioBundle:
    """Offline replay of the molecular-design team on the CCCCXCC task."""
    script: list[ChatResponse | ToolCall | str] = [
        "Plan: for each of C, O, N as X, replace X in the SMILES CCCCXCC, call "
        "coords_from_SMILES for the coordinates, call query_DFT for the energy, "
        "then compare the three energies.",
    ]
    for smiles in ("CCCCCCC", "CCCCOCC", "CCCCNCC"):
        coordinates = format_coordinates(coords_from_smiles(smiles))
        script.append(ToolCall("coords_from_SMILES", {"SMILES": smiles}))
        script.append(ToolCall("query_DFT", {"coordinates": coordinates}))
    script.append(
        "The energies of the molecules with C, O and N are -274.41, -310.23 and "
        "-290.40 respectively. Thus, the molecule with O (CCCCOCC) leads to the "
        "lowest energy structure."
    )
    script.append("The molecule CCCCOCC has the lowest energy structure. TERMINATE")
    return ScenarioBundle(
        name="molecular_design_demo",
        agents=molecular_design_agents(),
        script=script,
        registry=build_molecular_design_registry(DEMO_ENERGY_TABLE),
        max_rounds=12,
        initial_message=question,
    )


def boss_demo() -> ScenarioBundle:
    """Boss-approved plan scenario that parks at a TERMINATE checkpoint."""
    script: list[ChatResponse | ToolCall | str] = [
        "Here is the plan: the researcher gathers the relevant mechanisms, the "
        "modeling expert maps them onto the design, and the reviewer integrates "
        "the findings. Boss, do you approve?",
        "The three design principles are energy dissipation, self-healing, and "
        "flaw-tolerance. TERMINATE",
    ]
    return ScenarioBundle(
        name="boss_demo",
        agents=[
            AgentProfile(
                name="Boss",
                system_message=presets.system_message("boss"),
                is_human_proxy=True,
                human_input_mode="on_terminate",
            ),
            AgentProfile(
                name="Senior Engineer",
                system_message=presets.system_message("senior_engineer"),
            ),
            AgentProfile(
                name="Reviewer", system_message=presets.system_message("reviewer")
            ),
        ],
        script=script,
        max_rounds=8,
        initial_message=(
            "Design molybdenene 2D materials by using ideas of flaw-tolerance in "
            "alpha-helical protein meshes. Develop three design principles that "
            "incorporate important mechanisms."
        ),
    )


def code_demo() -> ScenarioBundle:
    """Offline code loop: one script proposal, one execution, one wrap-up."""
    assistant, executor = code_loop_agents()
    script: list[ChatResponse | ToolCall | str] = [
        "Let's verify the environment first:\n```python\nprint('hello from the sandbox')\n```",
        "The script ran successfully, so the environment is ready. TERMINATE",
    ]
    return ScenarioBundle(
        name="code_demo",
        agents=[assistant, executor],
        script=script,
        max_rounds=6,
        kind="code_loop",
        initial_message="Print a greeting from the sandbox to verify code execution works.",
    )


BUILTIN_SCENARIOS = {
    "molecular_design_demo": molecular_design_demo,
    "boss_demo": boss_demo,
    "code_demo": code_demo,
}


def _registry_from_spec(spec: Mapping[str, Any] | None) -> ToolRegistry | None:
    if not spec:
        return None
    kind = spec.get("kind", "none")
    if kind == "none":
        return None
    if kind == "molecular_design":
        return build_molecular_design_registry(spec.get("energy_table", DEMO_ENERGY_TABLE))
    raise ValueError(f"unknown registry kind {kind!r}")


def _agent_from_spec(spec: Mapping[str, Any]) -> AgentProfile:
    if "system_message" in spec:
        message = spec["system_message"]
    elif "preset" in spec:
        message = presets.system_message(spec["preset"])
    else:
        raise ValueError(f"agent spec needs system_message or preset: {spec}")
    return AgentProfile(
        name=spec["name"],
        system_message=message,
        tool_names=tuple(spec.get("tool_names", ())),
        can_execute_code=bool(spec.get("can_execute_code", False)),
        is_human_proxy=bool(spec.get("is_human_proxy", False)),
        human_input_mode=spec.get("human_input_mode", "never"),
    )


def _script_step(step: Any) -> ChatResponse | ToolCall | str:
    if isinstance(step, str):
        return step
    if isinstance(step, Mapping):
        if "tool_call" in step:
            tc = step["tool_call"]
            return ToolCall(tc["name"], tc.get("arguments", {}))
        if "text" in step:
            return str(step["text"])
    raise ValueError(f"bad script step: {step!r}")


def scenario_from_spec(name: str, spec: Mapping[str, Any]) -> ScenarioBundle:
    """Build a scenario from a config dictionary."""
    agents = [_agent_from_spec(a) for a in spec["agents"]]
    script = spec.get("script")
    return ScenarioBundle(
        name=name,
        agents=agents,
        script=[_script_step(s) for s in script] if script is not None else None,
        registry=_registry_from_spec(spec.get("registry")),
        max_rounds=int(spec.get("max_rounds", 12)),
        policy=spec.get("policy", "round_robin"),
        kind=spec.get("kind", "group_chat"),
        initial_message=spec.get("initial_message", ""),
    )


def resolve_scenario(name: str, configured: Mapping[str, Any] | None = None) -> ScenarioBundle:
    """Look up a scenario among config definitions, then built-ins."""
    if configured and name in configured:
        return scenario_from_spec(name, configured[name])
    if name in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[name]()
    raise KeyError(f"unknown scenario {name!r}")

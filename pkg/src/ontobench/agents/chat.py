"""Multi-agent group chat: profiles, speaker selection, tool dispatch,
TERMINATE protocol, and human checkpoints."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Protocol, Sequence

from ..gateway import (
    ChatMessage,
    Gateway,
    GatewayError,
    SamplingParams,
    ToolCall,
    ToolSpec,
)

TURN_KINDS = ("chat", "tool_call", "tool_result", "execution_feedback", "human_input", "status")
HUMAN_INPUT_MODES = ("never", "on_terminate", "always")

STATUS_TERMINATED = "terminated"
STATUS_MAX_ROUNDS = "max_rounds"
STATUS_HUMAN_ENDED = "human_ended"


@dataclass(frozen=True)
class AgentProfile:
    name: str
    system_message: str
    tool_names: tuple[str, ...] = ()
    can_execute_code: bool = False
    is_human_proxy: bool = False
    human_input_mode: str = "never"

    def __post_init__(self) -> None:
        if self.human_input_mode not in HUMAN_INPUT_MODES:
            raise ValueError(f"unknown human_input_mode {self.human_input_mode!r}")


@dataclass(frozen=True)
class ToolResult:
    call_seq: int
    name: str
    content: str


@dataclass(frozen=True)
class Turn:
    seq: int
    speaker: str
    content: str
    kind: str = "chat"
    tool_call: ToolCall | None = None
    tool_result: ToolResult | None = None

    def __post_init__(self) -> None:
        if self.kind not in TURN_KINDS:
            raise ValueError(f"unknown turn kind {self.kind!r}")


class Transcript:
    """Append-only turn log with dense, strictly increasing sequence numbers."""

    def __init__(self) -> None:
        self._turns: list[Turn] = []
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._turns)

    def __iter__(self):
        return iter(self.turns)

    @property
    def turns(self) -> list[Turn]:
        with self._lock:
            return list(self._turns)

    def add(
        self,
        speaker: str,
        content: str,
        kind: str = "chat",
        tool_call: ToolCall | None = None,
        tool_result: ToolResult | None = None,
    ) -> Turn:
        with self._lock:
            turn = Turn(
                seq=len(self._turns),
                speaker=speaker,
                content=content,
                kind=kind,
                tool_call=tool_call,
                tool_result=tool_result,
            )
            self._turns.append(turn)
            return turn

    def since(self, seq: int) -> list[Turn]:
        return [t for t in self.turns if t.seq > seq]

    @property
    def status(self) -> str | None:
        for turn in reversed(self.turns):
            if turn.kind == "status":
                return turn.content
        return None

    def save_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for turn in self.turns:
                fh.write(json.dumps(turn_to_dict(turn), ensure_ascii=False) + "\n")

    @classmethod
    def load_jsonl(cls, path: str | Path) -> "Transcript":
        transcript = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                turn = turn_from_dict(rec)
                transcript._turns.append(turn)
        return transcript


def turn_to_dict(turn: Turn) -> dict[str, Any]:
    rec: dict[str, Any] = {
        "seq": turn.seq,
        "speaker": turn.speaker,
        "content": turn.content,
        "kind": turn.kind,
    }
    if turn.tool_call is not None:
        rec["tool_call"] = {"name": turn.tool_call.name, "arguments": turn.tool_call.arguments}
    if turn.tool_result is not None:
        rec["tool_result"] = {
            "call_seq": turn.tool_result.call_seq,
            "name": turn.tool_result.name,
            "content": turn.tool_result.content,
        }
    return rec


def turn_from_dict(rec: dict[str, Any]) -> Turn:
    tool_call = None
    if rec.get("tool_call"):
        tool_call = ToolCall(rec["tool_call"]["name"], rec["tool_call"].get("arguments", {}))
    tool_result = None
    if rec.get("tool_result"):
        tr = rec["tool_result"]
        tool_result = ToolResult(tr["call_seq"], tr["name"], tr["content"])
    return Turn(
        seq=rec["seq"],
        speaker=rec["speaker"],
        content=rec["content"],
        kind=rec.get("kind", "chat"),
        tool_call=tool_call,
        tool_result=tool_result,
    )


ToolHandler = Callable[[dict[str, Any]], Any]


class ToolRegistry:
    """Named tools with their specs and executable handlers."""

    def __init__(self) -> None:
        self._tools: dict[str, tuple[ToolSpec, ToolHandler]] = {}

    def register(self, spec: ToolSpec, handler: ToolHandler) -> None:
        if spec.name in self._tools:
            raise ValueError(f"tool {spec.name!r} already registered")
        self._tools[spec.name] = (spec, handler)

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    def get(self, name: str) -> tuple[ToolSpec, ToolHandler] | None:
        return self._tools.get(name)

    def specs(self, names: Sequence[str] | None = None) -> list[ToolSpec]:
        if names is None:
            return [spec for spec, _ in self._tools.values()]
        return [self._tools[n][0] for n in names if n in self._tools]


class HumanSource(Protocol):
    def request(self, transcript: Transcript) -> str | None: ...


class ScriptedHuman:
    """Returns queued inputs in order; None once drained."""

    def __init__(self, inputs: Sequence[str | None]):
        self._inputs = list(inputs)
        self._cursor = 0

    def request(self, transcript: Transcript) -> str | None:
        if self._cursor >= len(self._inputs):
            return None
        value = self._inputs[self._cursor]
        self._cursor += 1
        return value


class ConsoleHuman:
    """Prompts on the terminal; empty input ends the conversation."""

    def request(self, transcript: Transcript) -> str | None:
        try:
            return input("human input (empty to finish): ")
        except EOFError:
            return None


def detect_termination(content: str) -> bool:
    """True iff the trimmed content ends with the literal token TERMINATE."""
    trimmed = content.strip()
    if not trimmed.endswith("TERMINATE"):
        return False
    if len(trimmed) == len("TERMINATE"):
        return True
    return not trimmed[-len("TERMINATE") - 1].isalnum()


def select_next_speaker(
    policy: str,
    transcript: Transcript,
    agents: Sequence[AgentProfile],
    gateway: Gateway | None = None,
) -> str:
    """Pick who speaks next.

    round_robin cycles non-human agents in declaration order, skipping the
    previous speaker; llm_moderated asks the gateway to choose a listed name
    and falls back to round_robin on an unrecognized reply.
    """
    if not agents:
        raise ValueError("agents must be non-empty")
    candidates = [a for a in agents if not a.is_human_proxy] or list(agents)
    names = [a.name for a in candidates]
    if policy == "llm_moderated" and gateway is not None:
        reply = _moderated_pick(transcript, names, gateway)
        if reply is not None:
            return reply
    previous = None
    for turn in reversed(transcript.turns):
        if turn.speaker in names:
            previous = turn.speaker
            break
    if previous is None:
        return names[0]
    return names[(names.index(previous) + 1) % len(names)]


def _moderated_pick(
    transcript: Transcript, names: list[str], gateway: Gateway
) -> str | None:
    tail = "\n".join(
        f"{t.speaker}: {t.content}" for t in transcript.turns[-6:] if t.kind != "status"
    )
    messages = [
        ChatMessage(
            role="system",
            content=(
                "You moderate a group chat. Reply with exactly one name from: "
                + ", ".join(names)
            ),
        ),
        ChatMessage(role="user", content=tail or "(no messages yet)"),
    ]
    try:
        reply = gateway.complete_chat(messages).text.strip()
    except GatewayError:
        return None
    for name in names:
        if reply == name or name in reply:
            return name
    return None


def _serialize_result(value: Any) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, float):
        return repr(value)
    try:
        return json.dumps(value, ensure_ascii=False, default=str)
    except TypeError:
        return str(value)


def dispatch_tool_call(call: ToolCall, registry: ToolRegistry) -> str:
    """Run a tool call; failures become content, never exceptions."""
    entry = registry.get(call.name)
    if entry is None:
        return f"Error: tool '{call.name}' is not registered"
    _, handler = entry
    try:
        return _serialize_result(handler(dict(call.arguments)))
    except Exception as exc:  # noqa: BLE001 - tool errors must not abort the chat
        return f"Error: tool '{call.name}' failed: {exc}"


def _render_messages(transcript: Transcript, speaker: AgentProfile) -> list[ChatMessage]:
    messages = [ChatMessage(role="system", content=speaker.system_message)]
    for turn in transcript.turns:
        if turn.kind == "status":
            continue
        if turn.kind == "tool_result":
            content = f"Result of {turn.tool_result.name}: {turn.content}"  # type: ignore[union-attr]
        elif turn.kind == "tool_call" and turn.tool_call is not None:
            args = json.dumps(turn.tool_call.arguments, ensure_ascii=False)
            content = f"{turn.content}\n[calling {turn.tool_call.name} with {args}]".strip()
        else:
            content = turn.content
        role = "assistant" if turn.speaker == speaker.name else "user"
        prefix = "" if role == "assistant" else f"{turn.speaker}: "
        messages.append(ChatMessage(role=role, content=f"{prefix}{content}"))
    return messages


def _human_checkpoint_agent(agents: Sequence[AgentProfile]) -> AgentProfile | None:
    for agent in agents:
        if agent.is_human_proxy and agent.human_input_mode in ("on_terminate", "always"):
            return agent
    return None


def _is_follow_up(text: str) -> bool:
    # A question keeps the conversation going; plain approval ends it.
    return "?" in text


@dataclass
class ChatHooks:
    """Optional observation points for a running chat (used by the service)."""

    on_awaiting_human: Callable[[], None] | None = None
    on_human_input: Callable[[], None] | None = None


def run_group_chat(
    agents: Sequence[AgentProfile],
    initial_message: str,
    gateway: Gateway,
    registry: ToolRegistry | None = None,
    human_source: HumanSource | None = None,
    max_rounds: int = 10,
    *,
    policy: str = "round_robin",
    params: SamplingParams | None = None,
    transcript: Transcript | None = None,
    hooks: ChatHooks | None = None,
) -> Transcript:
    """Run speaker selection, completion, tool dispatch, and termination.

    Gateway and tool failures become error-content turns and the chat keeps
    going until TERMINATE (with its human checkpoint) or max_rounds. The
    final turn is always a status turn.
    """
    if len(agents) < 2:
        raise ValueError("group chat needs at least 2 agents")
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    registry = registry or ToolRegistry()
    transcript = transcript if transcript is not None else Transcript()
    hooks = hooks or ChatHooks()

    initiator = next((a.name for a in agents if a.is_human_proxy), agents[0].name)
    transcript.add(initiator, initial_message, kind="chat")

    checkpoint_agent = _human_checkpoint_agent(agents)
    status = STATUS_MAX_ROUNDS
    for _ in range(max_rounds):
        speaker_name = select_next_speaker(policy, transcript, agents, gateway)
        speaker = next(a for a in agents if a.name == speaker_name)
        tools = registry.specs(speaker.tool_names) or None
        try:
            response = gateway.complete_chat(
                _render_messages(transcript, speaker), params, tools
            )
        except GatewayError as exc:
            transcript.add(speaker_name, f"[gateway error] {exc}", kind="chat")
            continue

        if response.tool_call is not None:
            call_turn = transcript.add(
                speaker_name, response.text, kind="tool_call", tool_call=response.tool_call
            )
            result_content = dispatch_tool_call(response.tool_call, registry)
            transcript.add(
                speaker_name,
                result_content,
                kind="tool_result",
                tool_result=ToolResult(
                    call_seq=call_turn.seq,
                    name=response.tool_call.name,
                    content=result_content,
                ),
            )
            continue

        transcript.add(speaker_name, response.text, kind="chat")

        if detect_termination(response.text):
            if checkpoint_agent is None or human_source is None:
                status = STATUS_TERMINATED
                break
            decision = _run_checkpoint(
                transcript, checkpoint_agent, human_source, hooks
            )
            if decision is not None:
                status = decision
                break
            continue

        if (
            checkpoint_agent is not None
            and checkpoint_agent.human_input_mode == "always"
            and human_source is not None
        ):
            if hooks.on_awaiting_human:
                hooks.on_awaiting_human()
            text = human_source.request(transcript)
            if hooks.on_human_input:
                hooks.on_human_input()
            if text:
                transcript.add(checkpoint_agent.name, text, kind="human_input")

    transcript.add("system", status, kind="status")
    return transcript


def _run_checkpoint(
    transcript: Transcript,
    proxy: AgentProfile,
    human_source: HumanSource,
    hooks: ChatHooks,
) -> str | None:
    """Consult the human at a TERMINATE checkpoint.

    Returns a final status, or None when the conversation continues. No
    available input lets the TERMINATE stand; empty input is an explicit
    human ending; a follow-up question continues; any other reply is
    approval and the chat terminates with it on record.
    """
    if hooks.on_awaiting_human:
        hooks.on_awaiting_human()
    text = human_source.request(transcript)
    if hooks.on_human_input:
        hooks.on_human_input()
    if text is None:
        return STATUS_TERMINATED
    if not text.strip():
        return STATUS_HUMAN_ENDED
    transcript.add(proxy.name, text, kind="human_input")
    if _is_follow_up(text):
        return None
    return STATUS_TERMINATED

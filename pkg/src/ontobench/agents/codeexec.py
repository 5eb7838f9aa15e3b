"""Fenced-code extraction, sandboxed execution, and the self-correction loop."""

from __future__ import annotations

import hashlib
import logging
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path

from ..gateway import ChatMessage, Gateway, GatewayError, SamplingParams
from .chat import (
    STATUS_MAX_ROUNDS,
    STATUS_TERMINATED,
    AgentProfile,
    Transcript,
)

logger = logging.getLogger(__name__)

TIMEOUT_EXIT_CODE = -1

DEFAULT_INTERPRETERS: dict[str, list[str]] = {
    "python": [sys.executable, "{file}"],
    "sh": ["bash", "{file}"],
    "bash": ["bash", "{file}"],
}

_EXTENSIONS = {"python": "py", "sh": "sh", "bash": "sh"}


@dataclass(frozen=True)
class CodeBlock:
    tag: str
    code: str


@dataclass(frozen=True)
class ExecutionResult:
    exit_code: int
    output: str
    timed_out: bool = False

    def __post_init__(self) -> None:
        if self.timed_out and self.exit_code != TIMEOUT_EXIT_CODE:
            raise ValueError("timed_out results must carry the timeout sentinel exit code")


@dataclass
class SandboxConfig:
    workdir: str | Path
    timeout: float = 120.0
    interpreters: dict[str, list[str]] = field(
        default_factory=lambda: dict(DEFAULT_INTERPRETERS)
    )


def _infer_tag(code: str) -> str:
    for line in code.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#!"):
            return "python" if "python" in stripped else "sh"
        if stripped.startswith(("import ", "from ")) or stripped.startswith(
            ("def ", "class ", "print(")
        ):
            return "python"
        if stripped.startswith(("pip install", "pip3 install", "apt", "echo ", "cd ", "ls")):
            return "sh"
        return "unknown"
    return "unknown"


def extract_code_blocks(content: str) -> list[CodeBlock]:
    """Fenced blocks in document order, with declared or inferred tags.

    An unclosed trailing fence is dropped with a counted warning.
    """
    blocks: list[CodeBlock] = []
    tag: str | None = None
    lines: list[str] = []
    inside = False
    for line in content.splitlines():
        stripped = line.strip()
        if stripped.startswith("```"):
            if inside:
                code = "\n".join(lines)
                blocks.append(CodeBlock(tag=tag or _infer_tag(code), code=code))
                inside = False
                tag = None
                lines = []
            else:
                inside = True
                tag = stripped[3:].strip() or None
        elif inside:
            lines.append(line)
    if inside:
        logger.warning("dropping unclosed code fence (1 block ignored)")
    return blocks


def execute_code_block(
    block: CodeBlock,
    workdir: str | Path,
    timeout: float = 120.0,
    interpreters: dict[str, list[str]] | None = None,
) -> ExecutionResult:
    """Write the block to a file in workdir and run its interpreter.

    Standard output and error are interleaved into one stream; an unmapped
    language tag yields a nonzero result rather than an exception, and a
    timeout yields the sentinel exit code with timed_out set.
    """
    workdir = Path(workdir)
    if not workdir.is_dir():
        raise ValueError(f"workdir {workdir} does not exist")
    interpreters = interpreters if interpreters is not None else DEFAULT_INTERPRETERS
    command_template = interpreters.get(block.tag)
    if command_template is None:
        return ExecutionResult(
            exit_code=2,
            output=f"unsupported language tag: {block.tag}",
        )
    digest = hashlib.sha1(block.code.encode("utf-8")).hexdigest()[:10]
    ext = _EXTENSIONS.get(block.tag, "txt")
    path = workdir / f"code_{digest}.{ext}"
    path.write_text(block.code, encoding="utf-8")
    command = [part.replace("{file}", str(path)) for part in command_template]
    try:
        proc = subprocess.run(
            command,
            cwd=workdir,
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            text=True,
            timeout=timeout,
        )
    except subprocess.TimeoutExpired as exc:
        partial = exc.stdout or ""
        if isinstance(partial, bytes):
            partial = partial.decode("utf-8", errors="replace")
        return ExecutionResult(
            exit_code=TIMEOUT_EXIT_CODE,
            output=partial + f"\n[timed out after {timeout:g}s]",
            timed_out=True,
        )
    return ExecutionResult(exit_code=proc.returncode, output=proc.stdout or "")


def format_execution_feedback(result: ExecutionResult) -> str:
    """The two-line feedback contract: exitcode status, then captured output."""
    status = "execution succeeded" if result.exit_code == 0 else "execution failed"
    return f"exitcode: {result.exit_code} ({status})\nCode output: {result.output}"


def combine_results(results: list[ExecutionResult]) -> ExecutionResult:
    """Aggregate per-block results: first nonzero exit wins, outputs concatenate."""
    exit_code = 0
    timed_out = False
    for r in results:
        if r.timed_out:
            timed_out = True
        if exit_code == 0 and r.exit_code != 0:
            exit_code = r.exit_code
    if timed_out:
        exit_code = TIMEOUT_EXIT_CODE
    return ExecutionResult(
        exit_code=exit_code,
        output="\n".join(r.output for r in results),
        timed_out=timed_out,
    )


def run_code_loop(
    task: str,
    assistant: AgentProfile,
    executor: AgentProfile,
    gateway: Gateway,
    sandbox: SandboxConfig,
    max_iters: int = 10,
    *,
    params: SamplingParams | None = None,
    transcript: Transcript | None = None,
) -> Transcript:
    """Propose / execute / feed back until a code-free reply or max_iters.

    Every fenced block in an assistant message is executed; the aggregated
    feedback turn is appended and the loop continues. An assistant message
    without code ends the loop as terminated.
    """
    if not executor.can_execute_code:
        raise ValueError("executor must have can_execute_code")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    transcript = transcript if transcript is not None else Transcript()
    transcript.add(executor.name, task, kind="chat")

    workdir = Path(sandbox.workdir)
    workdir.mkdir(parents=True, exist_ok=True)

    status = STATUS_MAX_ROUNDS
    for _ in range(max_iters):
        messages = [ChatMessage(role="system", content=assistant.system_message)]
        for turn in transcript.turns:
            if turn.kind == "status":
                continue
            role = "assistant" if turn.speaker == assistant.name else "user"
            messages.append(ChatMessage(role=role, content=turn.content))
        try:
            response = gateway.complete_chat(messages, params)
        except GatewayError as exc:
            transcript.add(assistant.name, f"[gateway error] {exc}", kind="chat")
            continue

        transcript.add(assistant.name, response.text, kind="chat")
        blocks = extract_code_blocks(response.text)
        if not blocks:
            status = STATUS_TERMINATED
            break
        results = [
            execute_code_block(block, workdir, sandbox.timeout, sandbox.interpreters)
            for block in blocks
        ]
        feedback = format_execution_feedback(combine_results(results))
        transcript.add(executor.name, feedback, kind="execution_feedback")

    transcript.add("system", status, kind="status")
    return transcript

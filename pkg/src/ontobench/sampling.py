"""Linear single-shot answering and the three-step tree sampler.

The tree protocol issues exactly three completions: brainstorm thoughts at
an elevated temperature, distill the important concepts, then answer with
the concepts in context. Prompt templates are frozen strings pinned by
golden tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .gateway import Gateway, GatewayError, SamplingParams, user

THOUGHTS_TEMPLATE = (
    "Generate a list of initial thoughts that are relevant for answering this "
    "question: '{question}'. Do not answer the question."
)
CONCEPTS_TEMPLATE = (
    "Read this: '{thoughts}'. List the most important concepts to answer the "
    "question '{question}'."
)
ANSWER_TEMPLATE = (
    "Considering '{concepts}', answer this question with a detailed response: {question}"
)

DEFAULT_THOUGHT_TEMPERATURE = 0.7


@dataclass
class TreeConfig:
    """Knobs for the tree sampler.

    ``thought_temperature`` drives step 1 only; steps 2-3 run at the base
    params. Steps 1-2 may be repeated with outputs concatenated. When
    ``context`` is set (e.g. retrieved chunks), every step's prompt is
    prefixed with it; the default leaves the frozen templates untouched.
    """

    params: SamplingParams = field(default_factory=SamplingParams)
    thought_temperature: float = DEFAULT_THOUGHT_TEMPERATURE
    thought_repeats: int = 1
    concept_repeats: int = 1
    context: str | None = None


@dataclass
class TreeTrace:
    question: str
    thoughts: str
    concepts: str
    answer: str
    temperatures: tuple[float, float, float]


class TreeSampleError(GatewayError):
    """A tree step failed; the partial trace collected so far is attached."""

    def __init__(self, message: str, partial: TreeTrace):
        super().__init__(message)
        self.partial = partial


def sample_linear(
    question: str, gateway: Gateway, params: SamplingParams | None = None
) -> str:
    """One completion of the bare question."""
    if not question.strip():
        raise ValueError("question must be non-empty")
    return gateway.complete_chat([user(question)], params or SamplingParams()).text


def _sample_repeated(
    gateway: Gateway, prompt: str, params: SamplingParams, repeats: int
) -> str:
    outputs = [gateway.complete_chat([user(prompt)], params).text for _ in range(repeats)]
    return "\n".join(outputs)


def sample_tree(
    question: str, gateway: Gateway, config: TreeConfig | None = None
) -> TreeTrace:
    """Run the thoughts / concepts / answer protocol and record the trace."""
    if not question.strip():
        raise ValueError("question must be non-empty")
    config = config or TreeConfig()
    base = config.params
    hot = SamplingParams(
        temperature=config.thought_temperature,
        max_tokens=base.max_tokens,
        model_name=base.model_name,
    )
    temperatures = (hot.temperature, base.temperature, base.temperature)
    trace = TreeTrace(
        question=question, thoughts="", concepts="", answer="", temperatures=temperatures
    )

    def prompt(template_text: str) -> str:
        if config.context:
            return f"Considering {config.context} , {template_text}"
        return template_text

    try:
        trace.thoughts = _sample_repeated(
            gateway,
            prompt(THOUGHTS_TEMPLATE.format(question=question)),
            hot,
            config.thought_repeats,
        )
        trace.concepts = _sample_repeated(
            gateway,
            prompt(CONCEPTS_TEMPLATE.format(thoughts=trace.thoughts, question=question)),
            base,
            config.concept_repeats,
        )
        trace.answer = gateway.complete_chat(
            [user(prompt(ANSWER_TEMPLATE.format(concepts=trace.concepts, question=question)))],
            base,
        ).text
    except GatewayError as exc:
        raise TreeSampleError(str(exc), partial=trace) from exc
    return trace

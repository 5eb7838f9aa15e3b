"""Ontological knowledge graph construction, retrieval, and export.

Triples extracted from text chunks form a directed labeled graph; queries
seed a breadth-first walk of up to two hops whose paths are serialized as a
knowledge sequence and prepended to the retrieval context.
"""

from __future__ import annotations

import json
import re
import threading
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import presets
from .gateway import Gateway, GatewayError, SamplingParams, user
from .retrieval import (
    Chunk,
    Embedder,
    IndexStore,
    _render_prompt,
    chunk_document,
    get_embedder,
    query_top_k,
    retained_for_budget,
)

__all__ = [
    "Triple",
    "KnowledgeGraph",
    "SubgraphContext",
    "PathStep",
    "parse_triple_line",
    "format_triple_line",
    "extract_triples",
    "TripleExtraction",
    "upsert_triples",
    "extract_keywords",
    "retrieve_subgraph",
    "format_knowledge_sequence",
    "answer_with_graph",
    "GraphAnswer",
    "export_graph",
    "import_graph_jsonl",
    "graph_from_sampled_corpus",
    "SampledCorpusError",
    "STOPWORDS",
    "KNOWLEDGE_SEQUENCE_HEADER",
]

# Fixed stopword list; sized so the published keyword fixtures reproduce.
STOPWORDS = frozenset(
    "a about an and are by for from how in is it me more of on tell that the this to what which with".split()
)

KNOWLEDGE_SEQUENCE_HEADER = (
    "The following are knowledge sequence in max depth 2 in the form of directed "
    "graph like: `subject -[predicate]->, object, <-[predicate_next_hop]-, "
    "object_next_hop ...`"
)

_QUOTES = ("'", '"')


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: str
    object: str
    source_chunk_id: str = ""

    def __post_init__(self) -> None:
        for name in ("subject", "predicate", "object"):
            if not getattr(self, name).strip():
                raise ValueError(f"triple {name} must be non-empty")

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.subject, self.predicate, self.object)


@dataclass(frozen=True)
class Edge:
    subject: str
    predicate: str
    object: str
    provenance: tuple[str, ...]

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.subject, self.predicate, self.object)


class KnowledgeGraph:
    """Directed labeled multigraph keyed by (subject, predicate, object).

    Duplicate triples merge into one edge with appended provenance. Writes
    are serialized; read paths operate on snapshots.
    """

    def __init__(self) -> None:
        self._provenance: dict[tuple[str, str, str], list[str]] = {}
        self._out: dict[str, list[tuple[str, str, str]]] = {}
        self._in: dict[str, list[tuple[str, str, str]]] = {}
        self._lock = threading.RLock()

    @property
    def nodes(self) -> set[str]:
        return set(self._out)

    @property
    def edges(self) -> list[Edge]:
        return [
            Edge(subject=s, predicate=p, object=o, provenance=tuple(prov))
            for (s, p, o), prov in self._provenance.items()
        ]

    def edge_count(self) -> int:
        return len(self._provenance)

    def provenance_for(self, key: tuple[str, str, str]) -> tuple[str, ...]:
        return tuple(self._provenance.get(key, ()))

    def out_edges(self, node: str) -> list[tuple[str, str, str]]:
        return list(self._out.get(node, ()))

    def in_edges(self, node: str) -> list[tuple[str, str, str]]:
        return list(self._in.get(node, ()))

    def _ensure_node(self, name: str) -> None:
        self._out.setdefault(name, [])
        self._in.setdefault(name, [])

    def add_triple(self, triple: Triple) -> None:
        key = triple.key
        with self._lock:
            if key in self._provenance:
                self._provenance[key].append(triple.source_chunk_id)
                return
            self._provenance[key] = [triple.source_chunk_id]
            self._ensure_node(triple.subject)
            self._ensure_node(triple.object)
            self._out[triple.subject].append(key)
            self._in[triple.object].append(key)


def upsert_triples(graph: KnowledgeGraph, triples: Iterable[Triple]) -> KnowledgeGraph:
    """Merge triples into the graph; nodes auto-created, duplicates merged."""
    for triple in triples:
        graph.add_triple(triple)
    return graph


def _scan_quoted_elements(inner: str) -> list[str] | None:
    """Parse comma-separated quoted elements, tolerating embedded quotes.

    An element's closing quote is the matching quote character whose next
    non-space character is a comma or the end of input, so apostrophes inside
    single-quoted text survive as long as the other quote style encloses them.
    """
    elements: list[str] = []
    i = 0
    n = len(inner)
    while True:
        while i < n and inner[i].isspace():
            i += 1
        if i >= n:
            return None
        quote = inner[i]
        if quote not in _QUOTES:
            return None
        i += 1
        start = i
        end = -1
        j = i
        while j < n:
            if inner[j] == quote:
                k = j + 1
                while k < n and inner[k].isspace():
                    k += 1
                if k >= n or inner[k] == ",":
                    end = j
                    break
            j += 1
        if end < 0:
            return None
        elements.append(inner[start:end])
        i = end + 1
        while i < n and inner[i].isspace():
            i += 1
        if i >= n:
            return elements
        if inner[i] != ",":
            return None
        i += 1


def parse_triple_line(line: str) -> tuple[str, str, str] | None:
    """Parse one ``('s', 'p', 'o')`` or ``['s', 'p', 'o']`` line.

    Returns None unless exactly three quoted elements are present with
    balanced quotes. Surrounding whitespace is trimmed; quote characters
    inside elements are preserved.
    """
    stripped = line.strip()
    if len(stripped) < 2:
        return None
    pairs = {"(": ")", "[": "]"}
    closer = pairs.get(stripped[0])
    if closer is None or stripped[-1] != closer:
        return None
    elements = _scan_quoted_elements(stripped[1:-1])
    if elements is None or len(elements) != 3:
        return None
    trimmed = tuple(e.strip() for e in elements)
    if any(not e for e in trimmed):
        return None
    return trimmed  # type: ignore[return-value]


def _quote_element(element: str) -> str:
    if "'" in element:
        return f'"{element}"'
    return f"'{element}'"


def format_triple_line(
    subject: str, predicate: str, object_: str, brackets: str = "()"
) -> str:
    """Render a triple in the parsable one-line form."""
    open_b, close_b = brackets[0], brackets[1]
    parts = ", ".join(_quote_element(e) for e in (subject, predicate, object_))
    return f"{open_b}{parts}{close_b}"


@dataclass
class TripleExtraction:
    triples: list[Triple]
    skipped: int


def extract_triples(chunk: Chunk, gateway: Gateway) -> TripleExtraction:
    """Ask the gateway for one triple per line and parse what comes back.

    Unparseable non-blank lines are skipped and counted, never fatal.
    """
    if not chunk.text.strip():
        raise ValueError("chunk text must be non-empty")
    prompt = presets.prompt("triple_extraction").format(chunk=chunk.text)
    response = gateway.complete_chat([user(prompt)])
    triples: list[Triple] = []
    skipped = 0
    for line in response.text.splitlines():
        if not line.strip():
            continue
        fields = parse_triple_line(line)
        if fields is None:
            skipped += 1
            continue
        triples.append(Triple(*fields, source_chunk_id=chunk.id))
    return TripleExtraction(triples=triples, skipped=skipped)


def _strip_edge_punctuation(token: str) -> tuple[str, bool, bool]:
    """Strip non-alphanumeric edges, keeping internal hyphens.

    Returns (core, had_leading, had_trailing) so bigram adjacency can treat
    stripped punctuation as a phrase boundary.
    """
    start = 0
    end = len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end], start > 0, end < len(token)


def _fallback_keywords(question: str) -> list[str]:
    raw = question.lower().split()
    survivors: list[tuple[int, str, bool, bool]] = []
    for pos, token in enumerate(raw):
        core, lead, trail = _strip_edge_punctuation(token)
        if not core or core in STOPWORDS:
            continue
        survivors.append((pos, core, lead, trail))

    keywords: list[str] = []

    def emit(term: str) -> None:
        if term and term not in keywords:
            keywords.append(term)

    for _, core, _, _ in survivors:
        emit(core)
        if "-" in core:
            for half in core.split("-"):
                if half and half not in STOPWORDS:
                    emit(half)
    for (pos_a, a, _, trail_a), (pos_b, b, lead_b, _) in zip(survivors, survivors[1:]):
        if pos_b == pos_a + 1 and not trail_a and not lead_b:
            emit(f"{a} {b}")
    return keywords


def _parse_keyword_reply(text: str) -> list[str]:
    cleaned = text.strip()
    if ":" in cleaned.split("\n", 1)[0] and cleaned.lower().startswith("extracted keywords"):
        cleaned = cleaned.split(":", 1)[1]
    cleaned = cleaned.strip().strip("[](){}")
    keywords: list[str] = []
    for part in re.split(r"[,\n]", cleaned):
        term = part.strip().strip("'\"").strip()
        if term and term.lower() not in (k.lower() for k in keywords):
            keywords.append(term)
    return keywords


def extract_keywords(question: str, gateway: Gateway | None = None) -> list[str]:
    """Keywords for graph seeding, via the gateway or the lexical fallback.

    The fallback lowercases, strips edge punctuation (internal hyphens kept),
    drops stopwords, then emits each surviving unigram, both halves of any
    hyphenated token, and bigrams of tokens that were adjacent in the
    original text; first occurrence wins on duplicates.
    """
    if not question.strip():
        raise ValueError("question must be non-empty")
    if gateway is None:
        return _fallback_keywords(question)
    prompt = presets.prompt("keyword_extraction").format(question=question)
    response = gateway.complete_chat([user(prompt)])
    keywords = _parse_keyword_reply(response.text)
    return keywords if keywords else _fallback_keywords(question)


@dataclass(frozen=True)
class PathStep:
    edge: tuple[str, str, str]
    forward: bool

    @property
    def start(self) -> str:
        return self.edge[0] if self.forward else self.edge[2]

    @property
    def end(self) -> str:
        return self.edge[2] if self.forward else self.edge[0]


@dataclass
class SubgraphContext:
    seed_nodes: list[str]
    paths: list[tuple[PathStep, ...]]
    keywords: list[str]


def _keyword_matches(node_lower: str, keyword: str) -> bool:
    if node_lower == keyword:
        return True
    pattern = r"(?<![0-9a-z])" + re.escape(keyword) + r"(?![0-9a-z])"
    return re.search(pattern, node_lower) is not None


def seed_nodes_for_keywords(graph: KnowledgeGraph, keywords: Sequence[str]) -> list[str]:
    """Nodes equal to a keyword or containing one as a word-boundary substring."""
    lowered = [k.lower() for k in keywords if k.strip()]
    seeds = []
    for node in graph.nodes:
        node_lower = node.lower()
        if any(_keyword_matches(node_lower, kw) for kw in lowered):
            seeds.append(node)
    return sorted(seeds)


def _incident_steps(graph: KnowledgeGraph, node: str) -> list[PathStep]:
    steps = [PathStep(edge=key, forward=True) for key in graph.out_edges(node)]
    steps += [PathStep(edge=key, forward=False) for key in graph.in_edges(node)]
    return steps


def _path_sort_key(path: tuple[PathStep, ...]):
    parts: list = [len(path)]
    for step in path:
        parts.extend([step.edge[0], step.edge[1], step.edge[2], not step.forward])
    return tuple(parts)


def retrieve_subgraph(
    graph: KnowledgeGraph,
    keywords: Sequence[str],
    max_depth: int = 2,
) -> SubgraphContext:
    """Collect all 1- and 2-hop paths out of the keyword-seeded nodes.

    Edges are walked in both directions; the second hop may not reuse the
    first hop's edge. Paths come back in deterministic order: depth first,
    then lexicographic on each hop's (subject, predicate, object).
    """
    if max_depth not in (1, 2):
        raise ValueError("max_depth must be 1 or 2")
    seeds = seed_nodes_for_keywords(graph, keywords)
    paths: set[tuple[PathStep, ...]] = set()
    for seed in seeds:
        for step in _incident_steps(graph, seed):
            paths.add((step,))
            if max_depth == 2:
                for step2 in _incident_steps(graph, step.end):
                    if step2.edge == step.edge:
                        continue
                    paths.add((step, step2))
    return SubgraphContext(
        seed_nodes=seeds,
        paths=sorted(paths, key=_path_sort_key),
        keywords=list(keywords),
    )


def _format_path(path: tuple[PathStep, ...]) -> str:
    if len(path) == 1:
        s, p, o = path[0].edge
        return format_triple_line(s, p, o, brackets="[]")
    pieces = [path[0].start]
    for step in path:
        s, p, o = step.edge
        if step.forward:
            pieces.append(f" -[{p}]-> {o}")
        else:
            pieces.append(f" <-[{p}]- {s}")
    return "".join(pieces)


def format_knowledge_sequence(ctx: SubgraphContext) -> str:
    """Serialize retrieved paths under the fixed header, one path per line."""
    lines = [KNOWLEDGE_SEQUENCE_HEADER]
    seen: set[str] = set()
    for path in ctx.paths:
        line = _format_path(path)
        if line not in seen:
            seen.add(line)
            lines.append(line)
    return "\n".join(lines)


@dataclass(frozen=True)
class GraphAnswer:
    answer: str
    keywords: list[str]
    sequence_text: str
    provenance: list[str]
    edge_provenance: list[str]
    prompt: str


def answer_with_graph(
    graph: KnowledgeGraph,
    index: IndexStore,
    question: str,
    gateway: Gateway,
    k: int = 4,
    *,
    embedder: Embedder | None = None,
    budget_units: int = 2000,
    use_llm_keywords: bool = False,
) -> GraphAnswer:
    """Answer with the knowledge sequence prepended to the top-k chunk context."""
    keywords = extract_keywords(question, gateway if use_llm_keywords else None)
    ctx = retrieve_subgraph(graph, keywords)
    sequence_text = format_knowledge_sequence(ctx)

    embedder = embedder or get_embedder(index.embedder_name)
    ranked = query_top_k(index, embedder.embed(question), k) if len(index) else []
    retained = retained_for_budget([c for c, _ in ranked], budget_units)

    edge_provenance: list[str] = []
    for path in ctx.paths:
        for step in path:
            for chunk_id in graph.provenance_for(step.edge):
                if chunk_id and chunk_id not in edge_provenance:
                    edge_provenance.append(chunk_id)

    context_parts = [sequence_text] + [c.text for c in retained]
    prompt = _render_prompt("\n".join(context_parts), question)
    try:
        response = gateway.complete_chat([user(prompt)])
    except GatewayError as exc:
        exc.assembled_prompt = prompt  # type: ignore[attr-defined]
        raise
    return GraphAnswer(
        answer=response.text,
        keywords=keywords,
        sequence_text=sequence_text,
        provenance=[c.id for c in retained],
        edge_provenance=edge_provenance,
        prompt=prompt,
    )


def _sorted_edges(graph: KnowledgeGraph) -> list[Edge]:
    return sorted(graph.edges, key=lambda e: e.key)


def export_graph(graph: KnowledgeGraph, format: str) -> str:
    """Serialize the graph as jsonl, dot, or graphml text."""
    if format == "jsonl":
        lines = [
            json.dumps(
                {
                    "subject": e.subject,
                    "predicate": e.predicate,
                    "object": e.object,
                    "provenance": list(e.provenance),
                },
                ensure_ascii=False,
            )
            for e in _sorted_edges(graph)
        ]
        return "\n".join(lines) + ("\n" if lines else "")
    if format == "dot":
        out = ["digraph knowledge {"]
        for node in sorted(graph.nodes):
            out.append(f'  "{_dot_escape(node)}";')
        for e in _sorted_edges(graph):
            out.append(
                f'  "{_dot_escape(e.subject)}" -> "{_dot_escape(e.object)}" '
                f'[label="{_dot_escape(e.predicate)}"];'
            )
        out.append("}")
        return "\n".join(out) + "\n"
    if format == "graphml":
        root = ET.Element("graphml", xmlns="http://graphml.graphdrawing.org/xmlns")
        key = ET.SubElement(root, "key", id="label")
        key.set("for", "edge")
        key.set("attr.name", "label")
        key.set("attr.type", "string")
        gml = ET.SubElement(root, "graph", id="knowledge", edgedefault="directed")
        for node in sorted(graph.nodes):
            ET.SubElement(gml, "node", id=node)
        for e in _sorted_edges(graph):
            edge_el = ET.SubElement(gml, "edge", source=e.subject, target=e.object)
            data = ET.SubElement(edge_el, "data", key="label")
            data.text = e.predicate
        return ET.tostring(root, encoding="unicode", xml_declaration=True)
    raise ValueError(f"unknown export format {format!r}")


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def import_graph_jsonl(text: str) -> KnowledgeGraph:
    """Rebuild a graph from its jsonl export; inverse of export_graph."""
    graph = KnowledgeGraph()
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        provenance = rec.get("provenance") or [""]
        for chunk_id in provenance:
            graph.add_triple(
                Triple(
                    subject=rec["subject"],
                    predicate=rec["predicate"],
                    object=rec["object"],
                    source_chunk_id=chunk_id,
                )
            )
    return graph


def save_graph(graph: KnowledgeGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(export_graph(graph, "jsonl"))


def load_graph(path) -> KnowledgeGraph:
    with open(path, encoding="utf-8") as fh:
        return import_graph_jsonl(fh.read())


class SampledCorpusError(GatewayError):
    """A sampling or extraction step failed; carries partial progress."""

    def __init__(self, message: str, *, samples: list[str], graph: KnowledgeGraph):
        super().__init__(message)
        self.samples = samples
        self.partial_graph = graph


def graph_from_sampled_corpus(
    question: str,
    system_prompt: str,
    gateway: Gateway,
    n: int = 25,
    high_temp: float = 0.7,
    *,
    max_units: int = 300,
    overlap: int = 50,
) -> KnowledgeGraph:
    """Sample the model n times at high temperature and graph the responses.

    Responses are concatenated into one corpus, chunked, and every chunk run
    through triple extraction; the merged graph is returned. A gateway
    failure aborts with the partial progress attached.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    from .gateway import system as system_msg

    samples: list[str] = []
    graph = KnowledgeGraph()
    params = SamplingParams(temperature=high_temp)
    try:
        for _ in range(n):
            response = gateway.complete_chat(
                [system_msg(system_prompt), user(question)], params
            )
            samples.append(response.text)
        corpus = "\n\n".join(samples)
        chunks = chunk_document(corpus, max_units, overlap, source_doc="sampled_corpus")
        for chunk in chunks:
            extraction = extract_triples(chunk, gateway)
            upsert_triples(graph, extraction.triples)
    except GatewayError as exc:
        raise SampledCorpusError(
            f"aborted after {len(samples)} of {n} samples: {exc}",
            samples=samples,
            graph=graph,
        ) from exc
    return graph

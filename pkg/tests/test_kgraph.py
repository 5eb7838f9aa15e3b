from __future__ import annotations

import random
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixtures import PROTEIN_NETWORK_TRIPLES
from oracles import bfs_subgraph_oracle
from ontobench.gateway import ScriptExhaustedError, scripted_gateway
from ontobench.kgraph import (
    KNOWLEDGE_SEQUENCE_HEADER,
    KnowledgeGraph,
    SampledCorpusError,
    Triple,
    answer_with_graph,
    export_graph,
    extract_keywords,
    extract_triples,
    format_knowledge_sequence,
    format_triple_line,
    graph_from_sampled_corpus,
    import_graph_jsonl,
    parse_triple_line,
    retrieve_subgraph,
    upsert_triples,
)
from ontobench.retrieval import Chunk, build_index


def _chunk(cid: str, text: str) -> Chunk:
    return Chunk(id=cid, text=text, source_doc="doc", span=(0, len(text)))


def _graph(triples=PROTEIN_NETWORK_TRIPLES) -> KnowledgeGraph:
    graph = KnowledgeGraph()
    upsert_triples(
        graph, [Triple(s, p, o, source_chunk_id=f"c{i}") for i, (s, p, o) in enumerate(triples)]
    )
    return graph


# -- parse / format ------------------------------------------------------------


def test_parse_square_bracket_form():
    assert parse_triple_line("['networks', 'break at', 'low strains']") == (
        "networks",
        "break at",
        "low strains",
    )


def test_parse_parenthesized_form():
    line = "('silk nanofibrils', 'possess', 'unparalleled mechanical properties')"
    assert parse_triple_line(line) == (
        "silk nanofibrils",
        "possess",
        "unparalleled mechanical properties",
    )


def test_parse_two_elements_rejected():
    assert parse_triple_line("('a','b')") is None


def test_parse_trims_outer_whitespace():
    assert parse_triple_line("  ('x', 'y', 'z')  ") == ("x", "y", "z")


def test_parse_preserves_inner_quotes():
    line = (
        "['stress concentration', 'can be seen by', "
        "\"red color indicating stretching of the protein filament's covalent backbone\"]"
    )
    parsed = parse_triple_line(line)
    assert parsed is not None
    assert "filament's" in parsed[2]


def test_parse_rejects_garbage():
    assert parse_triple_line("no brackets at all") is None
    assert parse_triple_line("('unbalanced, 'b', 'c')") is None
    assert parse_triple_line("('a', 'b', 'c', 'd')") is None
    assert parse_triple_line("()") is None
    assert parse_triple_line("") is None


_element = st.text(
    alphabet=st.characters(
        blacklist_characters="'\"",
        blacklist_categories=("Cs", "Cc"),
    ),
    min_size=1,
    max_size=30,
).filter(lambda s: s.strip())


@settings(max_examples=120, deadline=None)
@given(_element, _element, _element)
def test_parse_format_round_trip(s, p, o):
    line = format_triple_line(s, p, o)
    assert parse_triple_line(line) == (s.strip(), p.strip(), o.strip())


def test_round_trip_with_apostrophes():
    s, p, o = "filament's core", "is part of", "the network's mesh"
    assert parse_triple_line(format_triple_line(s, p, o, brackets="[]")) == (s, p, o)


# -- extraction ----------------------------------------------------------------


def test_extract_triples_single_line():
    gateway = scripted_gateway(
        ["('silk nanofibrils', 'possess', 'unparalleled mechanical properties')"]
    )
    result = extract_triples(_chunk("c1", "silk text"), gateway)
    assert len(result.triples) == 1
    triple = result.triples[0]
    assert triple.subject == "silk nanofibrils"
    assert triple.predicate == "possess"
    assert triple.object == "unparalleled mechanical properties"
    assert triple.source_chunk_id == "c1"


def test_extract_triples_empty_response():
    result = extract_triples(_chunk("c1", "text"), scripted_gateway([""]))
    assert result.triples == []
    assert result.skipped == 0


def test_extract_triples_counts_malformed_lines():
    reply = "\n".join(
        [
            "('a', 'b', 'c')",
            "this line is not a triple",
            "['d', 'e', 'f']",
        ]
    )
    result = extract_triples(_chunk("c9", "text"), scripted_gateway([reply]))
    assert len(result.triples) == 2
    assert result.skipped == 1


# -- graph upserts ---------------------------------------------------------------


def test_upsert_creates_nodes_and_edges():
    graph = KnowledgeGraph()
    upsert_triples(graph, [Triple("a", "rel", "b", "c1")])
    assert graph.nodes == {"a", "b"}
    assert graph.edge_count() == 1


def test_upsert_merges_duplicate_provenance():
    graph = KnowledgeGraph()
    upsert_triples(
        graph,
        [Triple("a", "rel", "b", "c1"), Triple("a", "rel", "b", "c2")],
    )
    assert graph.edge_count() == 1
    assert graph.provenance_for(("a", "rel", "b")) == ("c1", "c2")


def test_protein_network_fixture_out_degree():
    graph = _graph()
    out_degree = len(graph.out_edges("protein networks"))
    assert out_degree >= 3


def test_edge_endpoints_always_nodes():
    graph = _graph()
    for edge in graph.edges:
        assert edge.subject in graph.nodes
        assert edge.object in graph.nodes


# -- keywords --------------------------------------------------------------------


def test_keywords_flaw_tolerance_fixture():
    keywords = extract_keywords("Tell me more about flaw-tolerance in protein networks.")
    assert set(keywords) == {
        "flaw-tolerance",
        "flaw",
        "tolerance",
        "protein",
        "networks",
        "protein networks",
    }


def test_keywords_filament_fixture():
    keywords = extract_keywords("What is the mechanism by which filaments ultimately fail?")
    assert {"filaments", "fail", "mechanism"} <= set(keywords)


def test_keywords_all_stopwords():
    assert extract_keywords("the of in") == []


def test_keywords_whitespace_only_errors():
    with pytest.raises(ValueError):
        extract_keywords("   ")


def test_keywords_idempotent_on_joined_output():
    for question in (
        "Tell me more about flaw-tolerance in protein networks.",
        "What is the mechanism by which filaments ultimately fail?",
        "How do silk-metal hybrid composites fail under tensile load?",
    ):
        first = extract_keywords(question)
        second = extract_keywords(", ".join(first))
        assert set(second) <= set(first)


def test_keywords_from_llm_reply():
    gateway = scripted_gateway(["Extracted keywords: ['nanofibrils', 'silk']"])
    assert extract_keywords("Tell me about silk nanofibrils.", gateway) == [
        "nanofibrils",
        "silk",
    ]


# -- subgraph retrieval ------------------------------------------------------------


def test_subgraph_depth1_edge_present():
    ctx = retrieve_subgraph(_graph(), ["networks"])
    depth1 = [p for p in ctx.paths if len(p) == 1]
    keys = {p[0].edge for p in depth1}
    assert ("networks", "break at", "low strains") in keys


def test_subgraph_no_seeds_empty():
    ctx = retrieve_subgraph(_graph(), ["zirconium"])
    assert ctx.paths == []
    assert ctx.seed_nodes == []


def test_subgraph_paths_start_at_seeds_and_bounded():
    ctx = retrieve_subgraph(_graph(), ["protein networks", "networks"])
    seeds = set(ctx.seed_nodes)
    for path in ctx.paths:
        assert path[0].start in seeds
        assert len(path) <= 2


def test_subgraph_reverse_first_hop():
    ctx = retrieve_subgraph(_graph(), ["protein networks"])
    reverse_first = [p for p in ctx.paths if len(p) == 1 and not p[0].forward]
    keys = {p[0].edge for p in reverse_first}
    assert (
        "alpha-helical protein motif",
        "under mechanical deformation",
        "protein networks",
    ) in keys


def _paths_as_tuples(ctx):
    return {tuple((step.edge, step.forward) for step in path) for path in ctx.paths}


def _random_graph(rng: random.Random, n_nodes: int, n_edges: int) -> KnowledgeGraph:
    nodes = [f"node {i}" for i in range(n_nodes)]
    predicates = ["links", "feeds", "breaks", "supports"]
    triples = []
    for i in range(n_edges):
        s = rng.choice(nodes)
        o = rng.choice(nodes)
        p = rng.choice(predicates)
        triples.append(Triple(s, p, o, source_chunk_id=f"c{i}"))
    graph = KnowledgeGraph()
    upsert_triples(graph, triples)
    return graph


@pytest.mark.parametrize("depth", [1, 2])
def test_subgraph_matches_bfs_oracle_random(depth):
    rng = random.Random(42)
    for _ in range(25):
        graph = _random_graph(rng, rng.randint(2, 20), rng.randint(1, 60))
        keywords = [f"node {rng.randint(0, 20)}" for _ in range(2)]
        ctx = retrieve_subgraph(graph, keywords, max_depth=depth)
        assert _paths_as_tuples(ctx) == bfs_subgraph_oracle(graph, keywords, depth)


def test_subgraph_deterministic_order():
    graph = _graph()
    first = retrieve_subgraph(graph, ["networks", "protein networks"])
    second = retrieve_subgraph(graph, ["networks", "protein networks"])
    assert first.paths == second.paths
    depths = [len(p) for p in first.paths]
    assert depths == sorted(depths)


def test_subgraph_invalid_depth():
    with pytest.raises(ValueError):
        retrieve_subgraph(_graph(), ["networks"], max_depth=3)


# -- knowledge sequence -------------------------------------------------------------


def test_sequence_single_forward_edge_line():
    graph = KnowledgeGraph()
    upsert_triples(graph, [Triple("networks", "break at", "low strains", "c1")])
    text = format_knowledge_sequence(retrieve_subgraph(graph, ["networks"]))
    assert "['networks', 'break at', 'low strains']" in text.splitlines()


def test_sequence_empty_context_is_header_only():
    graph = KnowledgeGraph()
    text = format_knowledge_sequence(retrieve_subgraph(graph, ["nothing"]))
    assert text == KNOWLEDGE_SEQUENCE_HEADER


def test_sequence_two_hop_direction_markers():
    graph = KnowledgeGraph()
    upsert_triples(
        graph,
        [
            Triple("protein networks", "can sustain", "large deformation", "c1"),
            Triple("cells", "undergo", "large deformation", "c2"),
        ],
    )
    text = format_knowledge_sequence(retrieve_subgraph(graph, ["protein networks"]))
    chained = [
        line
        for line in text.splitlines()
        if "-[can sustain]->" in line and "<-[undergo]-" in line
    ]
    assert chained
    line = chained[0]
    assert line.index("-[") < line.index("<-[")
    assert line == "protein networks -[can sustain]-> large deformation <-[undergo]- cells"


# -- graph-augmented answering --------------------------------------------------------


def test_answer_with_graph_prompt_contains_sequence_and_chunks():
    graph = _graph()
    store = build_index(
        [
            _chunk("c1", "flaw-tolerance lets protein networks sustain deformation"),
            _chunk("c2", "steel beams corrode near seawater spray"),
        ]
    )
    result = answer_with_graph(
        graph, store, "Tell me more about flaw-tolerance in protein networks.",
        scripted_gateway(["graph answer"]), 1,
    )
    assert result.answer == "graph answer"
    assert KNOWLEDGE_SEQUENCE_HEADER.splitlines()[0] in result.prompt
    assert "['networks', 'break at', 'low strains']" in result.sequence_text
    assert "flaw-tolerance lets protein networks sustain deformation" in result.prompt
    assert result.provenance == ["c1"]
    assert result.edge_provenance


def test_answer_with_graph_empty_graph_degrades_to_rag():
    store = build_index([_chunk("c1", "alpha beta gamma")])
    result = answer_with_graph(
        KnowledgeGraph(), store, "alpha?", scripted_gateway(["plain"]), 1
    )
    assert result.answer == "plain"
    assert result.sequence_text == KNOWLEDGE_SEQUENCE_HEADER
    assert result.provenance == ["c1"]


# -- export / import --------------------------------------------------------------------


def test_export_jsonl_empty_graph():
    graph = KnowledgeGraph()
    assert export_graph(graph, "jsonl") == ""
    assert import_graph_jsonl("").nodes == set()


def test_export_dot_single_edge():
    graph = KnowledgeGraph()
    upsert_triples(graph, [Triple("a", "rel", "b", "c1")])
    dot = export_graph(graph, "dot")
    assert dot.count("->") == 1
    assert '[label="rel"]' in dot


def test_export_graphml_well_formed():
    graph = _graph()
    doc = export_graph(graph, "graphml")
    root = ET.fromstring(doc)
    ns = "{http://graphml.graphdrawing.org/xmlns}"
    nodes = root.findall(f"{ns}graph/{ns}node")
    edges = root.findall(f"{ns}graph/{ns}edge")
    assert len(nodes) == len(graph.nodes)
    assert len(edges) == graph.edge_count()


def test_export_unknown_format():
    with pytest.raises(ValueError):
        export_graph(KnowledgeGraph(), "csv")


def test_jsonl_round_trip_random_graphs():
    rng = random.Random(99)
    for _ in range(10):
        graph = _random_graph(rng, rng.randint(2, 12), rng.randint(1, 40))
        clone = import_graph_jsonl(export_graph(graph, "jsonl"))
        assert clone.nodes == graph.nodes
        assert {e.key for e in clone.edges} == {e.key for e in graph.edges}
        for edge in graph.edges:
            assert clone.provenance_for(edge.key) == edge.provenance


# -- sampled-corpus graphs -----------------------------------------------------------------


def test_sampled_corpus_single_sample():
    steps = [
        "materials science knowledge",  # sample 1
        "('music', 'is organized like', 'proteins')",  # extraction for its one chunk
    ]
    graph = graph_from_sampled_corpus("q?", "be creative", scripted_gateway(steps), n=1)
    assert graph.edge_count() == 1
    assert "music" in graph.nodes


def test_sampled_corpus_merges_duplicates():
    samples = [
        "sample one text",
        "sample two text",
        "sample three text",
    ]
    extractions = [
        "('a', 'p', 'b')\n('c', 'p', 'd')",
    ]
    # 3 samples concatenate into one small corpus -> one chunk -> one extraction
    steps = samples + extractions
    graph = graph_from_sampled_corpus("q?", "sys", scripted_gateway(steps), n=3)
    assert graph.edge_count() == 2


def test_sampled_corpus_distinct_edge_count_fixture():
    # 3 samples, big corpus split into 3 chunks, with one duplicate triple across chunks
    samples = [" ".join(f"alpha{i}" for i in range(30))] * 3
    extractions = [
        "('a', 'p', 'b')\n('c', 'p', 'd')",
        "('a', 'p', 'b')\n('e', 'p', 'f')",
        "('g', 'p', 'h')\n('i', 'p', 'j')",
    ]
    graph = graph_from_sampled_corpus(
        "q?", "sys", scripted_gateway(samples + extractions), n=3,
        max_units=30, overlap=0,
    )
    assert graph.edge_count() == 5


def test_sampled_corpus_default_sample_count():
    steps = ["text"] * 25 + ["('x', 'y', 'z')"]
    graph = graph_from_sampled_corpus("q?", "sys", scripted_gateway(steps))
    assert graph.edge_count() == 1


def test_sampled_corpus_partial_progress_on_error():
    gateway = scripted_gateway(["first sample"])
    with pytest.raises(SampledCorpusError) as err:
        graph_from_sampled_corpus("q?", "sys", gateway, n=3)
    assert err.value.samples == ["first sample"]
    assert isinstance(err.value.__cause__, ScriptExhaustedError)

from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_top_k

from ontobench.gateway import ScriptExhaustedError, scripted_gateway
from ontobench.retrieval import (
    EMBED_DIM,
    Chunk,
    HashEmbedder,
    IndexStore,
    StoreNotFoundError,
    answer_with_rag,
    assemble_rag_prompt,
    build_index,
    chunk_document,
    embed_fallback,
    query_top_k,
)


def _words(n: int) -> str:
    return " ".join(f"w{i}" for i in range(n))


def _chunk(cid: str, text: str) -> Chunk:
    return Chunk(id=cid, text=text, source_doc="doc", span=(0, len(text)))


# -- chunking ----------------------------------------------------------------


def test_chunk_empty_text():
    assert chunk_document("", 300, 50) == []


def test_chunk_fits_in_one():
    text = _words(100)
    chunks = chunk_document(text, 300, 50)
    assert len(chunks) == 1
    assert chunks[0].text == text


def test_chunk_count_and_overlap():
    text = _words(1000)
    chunks = chunk_document(text, 300, 50)
    assert len(chunks) == math.ceil((1000 - 300) / 250) + 1 == 4
    for a, b in zip(chunks, chunks[1:]):
        assert a.text.split()[-50:] == b.text.split()[:50]


def test_chunk_reconstruction():
    text = "the quick   brown fox\njumps over the lazy dog " * 40
    chunks = chunk_document(text, 37, 9)
    rebuilt = chunks[0].text.split()
    for chunk in chunks[1:]:
        rebuilt.extend(chunk.text.split()[9:])
    assert rebuilt == text.split()


def test_chunk_spans_match_source():
    text = "alpha beta gamma delta epsilon zeta"
    for chunk in chunk_document(text, 2, 1):
        assert text[chunk.span[0] : chunk.span[1]] == chunk.text


def test_chunk_rejects_bad_overlap():
    with pytest.raises(ValueError):
        chunk_document("a b c", 5, 5)
    with pytest.raises(ValueError):
        chunk_document("a b c", 5, -1)


@settings(max_examples=60, deadline=None)
@given(
    n_words=st.integers(min_value=0, max_value=400),
    max_units=st.integers(min_value=1, max_value=60),
    data=st.data(),
)
def test_chunk_properties(n_words, max_units, data):
    overlap = data.draw(st.integers(min_value=0, max_value=max_units - 1))
    text = _words(n_words)
    chunks = chunk_document(text, max_units, overlap)
    if n_words == 0:
        assert chunks == []
        return
    assert all(len(c.text.split()) <= max_units for c in chunks)
    rebuilt = chunks[0].text.split()
    for chunk in chunks[1:]:
        rebuilt.extend(chunk.text.split()[overlap:])
    assert rebuilt == text.split()
    for a, b in zip(chunks[:-1], chunks[1:-1] or []):
        assert a.text.split()[-overlap:] == b.text.split()[:overlap] or overlap == 0


# -- embedding ---------------------------------------------------------------


def test_embed_dimension_and_norm():
    vec = embed_fallback("silk nanofibrils possess mechanical properties")
    assert vec.shape == (EMBED_DIM,)
    assert abs(np.linalg.norm(vec) - 1.0) < 1e-9


def test_embed_deterministic():
    assert np.array_equal(embed_fallback("same text"), embed_fallback("same text"))


def test_embed_bag_of_words_order_invariance():
    assert np.array_equal(embed_fallback("aaa bbb"), embed_fallback("bbb aaa"))


def test_embed_empty_is_zero_vector():
    vec = embed_fallback("  \t  !!! ")
    assert np.linalg.norm(vec) == 0.0
    assert vec.shape == (EMBED_DIM,)


@settings(max_examples=80, deadline=None)
@given(st.text(max_size=120))
def test_embed_properties(text):
    vec = embed_fallback(text)
    assert vec.shape == (EMBED_DIM,)
    norm = np.linalg.norm(vec)
    assert norm == 0.0 or abs(norm - 1.0) < 1e-9


# -- top-k -------------------------------------------------------------------




def test_top_k_single_chunk():
    store = build_index([_chunk("c1", "hello world")])
    results = query_top_k(store, embed_fallback("anything at all"), 1)
    assert [c.id for c, _ in results] == ["c1"]


def test_top_k_exact_match_first():
    store = build_index([_chunk("a", "protein networks"), _chunk("b", "metal lattice")])
    results = query_top_k(store, embed_fallback("protein networks"), 2)
    assert results[0][0].id == "a"
    assert abs(results[0][1] - 1.0) < 1e-9


def test_top_k_matches_brute_force_oracle():
    rng = np.random.default_rng(7)
    store = IndexStore()
    for i in range(1000):
        vec = rng.normal(size=EMBED_DIM)
        vec /= np.linalg.norm(vec)
        store.add(_chunk(f"c{i:05d}", f"text {i}"), vec)
    query = rng.normal(size=EMBED_DIM)
    query /= np.linalg.norm(query)
    got = query_top_k(store, query, 10)
    expected = brute_force_top_k(store.entries, query, 10)
    assert [(c.id, round(s, 12)) for c, s in got] == [
        (c.id, round(s, 12)) for c, s in expected
    ]


def test_top_k_tie_break_by_id():
    vec = embed_fallback("identical")
    store = IndexStore()
    for cid in ("zz", "aa", "mm"):
        store.add(_chunk(cid, "identical"), vec)
    results = query_top_k(store, vec, 3)
    assert [c.id for c, _ in results] == ["aa", "mm", "zz"]


def test_top_k_empty_index():
    assert query_top_k(IndexStore(), embed_fallback("x"), 3) == []


def test_top_k_invalid_k():
    with pytest.raises(ValueError):
        query_top_k(IndexStore(), embed_fallback("x"), 0)


# -- prompt assembly ----------------------------------------------------------


def test_prompt_zero_chunks_is_plain_template():
    prompt = assemble_rag_prompt([], "What is molybdenene?")
    assert prompt == "Answer the question What is molybdenene?"


def test_prompt_contains_chunks_in_rank_order():
    chunks = [_chunk("a", "first passage"), _chunk("b", "second passage")]
    prompt = assemble_rag_prompt(chunks, "why?")
    assert "first passage" in prompt and "second passage" in prompt
    assert prompt.index("first passage") < prompt.index("second passage")
    assert prompt.endswith("answer the question why?")


def test_prompt_budget_drops_lowest_ranked_first():
    chunks = [
        _chunk("a", " ".join(f"alpha{i}" for i in range(10))),
        _chunk("b", " ".join(f"beta{i}" for i in range(8))),
        _chunk("c", " ".join(f"gamma{i}" for i in range(5))),
    ]
    prompt = assemble_rag_prompt(chunks, "q?", budget_units=19)
    # word-count oracle: 10 + 8 fit a budget of 19, the third chunk does not
    assert chunks[0].text in prompt
    assert chunks[1].text in prompt
    assert chunks[2].text not in prompt


def test_prompt_budget_monotonicity():
    chunks = [
        _chunk(f"c{i}", " ".join(f"term{i}x{j}" for j in range(7))) for i in range(6)
    ]
    previously_kept: set[str] = set()
    for budget in range(1, 60, 3):
        prompt = assemble_rag_prompt(chunks, "q?", budget_units=budget)
        kept = {c.id for c in chunks if c.text in prompt}
        assert previously_kept <= kept
        previously_kept = kept


# -- answer_with_rag -----------------------------------------------------------


def test_answer_with_rag_scripted():
    store = build_index([_chunk("a", "alpha content"), _chunk("b", "beta content")])
    result = answer_with_rag(store, "alpha content?", scripted_gateway(["X"]), 2)
    assert result.answer == "X"
    ranked = query_top_k(store, embed_fallback("alpha content?"), 2)
    assert result.provenance == [c.id for c, _ in ranked]


def test_answer_with_rag_empty_index():
    result = answer_with_rag(IndexStore(), "anything?", scripted_gateway(["Y"]), 3)
    assert result.answer == "Y"
    assert result.provenance == []
    assert result.prompt == "Answer the question anything?"


def test_answer_with_rag_provenance_matches_oracle():
    store = build_index(
        [_chunk("a", "protein networks sustain deformation"),
         _chunk("b", "metal alloys corrode"),
         _chunk("c", "protein filaments unfold")]
    )
    question = "how do protein networks deform?"
    result = answer_with_rag(store, question, scripted_gateway(["ok"]), 2)
    oracle = brute_force_top_k(store.entries, embed_fallback(question), 2)
    assert result.provenance == [c.id for c, _ in oracle]


def test_answer_with_rag_attaches_prompt_on_gateway_error():
    store = build_index([_chunk("a", "alpha")])
    gateway = scripted_gateway(["only one"])
    gateway.complete_chat([__import__("ontobench.gateway", fromlist=["user"]).user("use it up")])
    with pytest.raises(ScriptExhaustedError) as err:
        answer_with_rag(store, "q?", gateway, 1)
    assert "alpha" in err.value.assembled_prompt


# -- persistence ---------------------------------------------------------------


def test_store_round_trip_bit_exact(tmp_path):
    text = " ".join(f"token{i} value{i}" for i in range(300))
    store = build_index(chunk_document(text, 40, 10, source_doc="sample.txt"))
    store.save(tmp_path / "store")
    loaded = IndexStore.load(tmp_path / "store")
    assert loaded.embedder_name == store.embedder_name
    assert loaded.created_at == store.created_at
    assert len(loaded) == len(store)
    for (c1, v1), (c2, v2) in zip(store.entries, loaded.entries):
        assert c1 == c2
        assert np.array_equal(v1, v2)


def test_store_files_have_expected_shape(tmp_path):
    store = build_index([_chunk("only", "single chunk")])
    store.save(tmp_path / "s")
    lines = (tmp_path / "s" / "vectors.jsonl").read_text().splitlines()
    record = json.loads(lines[0])
    assert record["id"] == "only"
    assert len(record["values"]) == EMBED_DIM
    meta = json.loads((tmp_path / "s" / "metadata.json").read_text())
    assert meta["embedder"] == HashEmbedder.name


def test_store_load_missing_dir(tmp_path):
    with pytest.raises(StoreNotFoundError):
        IndexStore.load(tmp_path / "missing")


def test_store_rejects_duplicate_ids():
    store = IndexStore()
    store.add(_chunk("dup", "one"), embed_fallback("one"))
    with pytest.raises(ValueError):
        store.add(_chunk("dup", "two"), embed_fallback("two"))


# -- remote embedding provider ---------------------------------------------------


def test_remote_embedder_round_trip():
    import json as _json
    import threading
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

    from ontobench.retrieval import RemoteEmbedder

    dims = {"n": EMBED_DIM}

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):  # noqa: N802
            length = int(self.headers["Content-Length"])
            _ = self.rfile.read(length)
            body = _json.dumps(
                {"data": [{"embedding": [0.1] * dims["n"]}]}
            ).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    try:
        base = f"http://127.0.0.1:{server.server_address[1]}/v1"
        embedder = RemoteEmbedder(base, "mini")
        vec = embedder.embed("some text")
        assert vec.shape == (EMBED_DIM,)
        assert embedder.name == "remote:mini"

        dims["n"] = 7  # wrong dimensionality must be rejected
        with pytest.raises(ValueError):
            embedder.embed("other text")
    finally:
        server.shutdown()
        server.server_close()

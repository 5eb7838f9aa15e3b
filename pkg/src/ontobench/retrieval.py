"""Chunking, embedding, cosine-similarity indexing, and RAG prompt assembly."""

from __future__ import annotations

import datetime as _dt
import json
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .gateway import Gateway, GatewayError, user

EMBED_DIM = 384

_WORD_RE = re.compile(r"\S+")
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_FNV_MASK = 0xFFFFFFFFFFFFFFFF


class StoreNotFoundError(FileNotFoundError):
    """The index directory does not exist or is not a saved store."""


@dataclass(frozen=True)
class Chunk:
    """A text span with provenance back to its source document."""

    id: str
    text: str
    source_doc: str
    span: tuple[int, int]

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("chunk text must be non-empty")


def chunk_document(
    text: str,
    max_units: int = 300,
    overlap: int = 50,
    source_doc: str = "doc",
) -> list[Chunk]:
    """Split a document into word-window chunks with a fixed overlap.

    Units are whitespace-delimited words; chunk text is the original
    character span, so concatenating chunks minus overlaps reconstructs the
    document's word sequence.
    """
    if max_units < 1:
        raise ValueError("max_units must be >= 1")
    if overlap < 0 or overlap >= max_units:
        raise ValueError("overlap must satisfy 0 <= overlap < max_units")
    words = list(_WORD_RE.finditer(text))
    if not words:
        return []
    stride = max_units - overlap
    chunks: list[Chunk] = []
    start = 0
    index = 0
    while start < len(words):
        window = words[start : start + max_units]
        span = (window[0].start(), window[-1].end())
        chunks.append(
            Chunk(
                id=f"{source_doc}#{index:05d}",
                text=text[span[0] : span[1]],
                source_doc=source_doc,
                span=span,
            )
        )
        if start + max_units >= len(words):
            break
        start += stride
        index += 1
    return chunks


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _FNV_MASK
    return h


def embed_fallback(text: str) -> np.ndarray:
    """Deterministic bag-of-words embedding into the 384-dimensional space.

    Tokens are lowercased alphanumeric runs; each token's FNV-1a 64-bit hash
    selects a bucket that accumulates one count per occurrence, and the
    vector is L2-normalized. Text with no tokens embeds to the zero vector.
    """
    vec = np.zeros(EMBED_DIM, dtype=np.float64)
    for token in _TOKEN_RE.findall(text.lower()):
        vec[_fnv1a64(token.encode("utf-8")) % EMBED_DIM] += 1.0
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


class Embedder(Protocol):
    name: str

    def embed(self, text: str) -> np.ndarray: ...


class HashEmbedder:
    """Offline embedder backed by ``embed_fallback``."""

    name = "fnv1a-bow-384"

    def embed(self, text: str) -> np.ndarray:
        return embed_fallback(text)


class RemoteEmbedder:
    """Embedding provider speaking the OpenAI-style /embeddings endpoint."""

    def __init__(self, base_url: str, model_name: str, *, timeout_seconds: float = 60.0,
                 api_key_env: str = "OPENAI_API_KEY", session=None):
        import requests

        self.base_url = base_url.rstrip("/")
        self.model_name = model_name
        self.name = f"remote:{model_name}"
        self.timeout_seconds = timeout_seconds
        self.api_key_env = api_key_env
        self._session = session or requests.Session()

    def embed(self, text: str) -> np.ndarray:
        import os

        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        resp = self._session.post(
            f"{self.base_url}/embeddings",
            json={"model": self.model_name, "input": text},
            headers=headers,
            timeout=self.timeout_seconds,
        )
        resp.raise_for_status()
        values = resp.json()["data"][0]["embedding"]
        vec = np.asarray(values, dtype=np.float64)
        if vec.shape != (EMBED_DIM,):
            raise ValueError(f"remote embedder returned {vec.shape[0]} dims, expected {EMBED_DIM}")
        return vec


def get_embedder(name: str) -> Embedder:
    if name == HashEmbedder.name:
        return HashEmbedder()
    raise KeyError(f"no builtin embedder named {name!r}; construct and pass one explicitly")


class IndexStore:
    """In-memory vector index with single-writer/multi-reader semantics."""

    def __init__(self, embedder_name: str = HashEmbedder.name, created_at: str | None = None):
        self.embedder_name = embedder_name
        self.created_at = created_at or _dt.datetime.now(_dt.timezone.utc).isoformat()
        self._entries: list[tuple[Chunk, np.ndarray]] = []
        self._ids: set[str] = set()
        self._lock = threading.RLock()

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> list[tuple[Chunk, np.ndarray]]:
        return list(self._entries)

    def add(self, chunk: Chunk, vector: np.ndarray) -> None:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (EMBED_DIM,):
            raise ValueError(f"vector must have length {EMBED_DIM}")
        with self._lock:
            if chunk.id in self._ids:
                raise ValueError(f"duplicate chunk id {chunk.id!r}")
            self._ids.add(chunk.id)
            self._entries.append((chunk, vector))

    def add_chunks(self, chunks: Iterable[Chunk], embedder: Embedder) -> None:
        for chunk in chunks:
            self.add(chunk, embedder.embed(chunk.text))

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with self._lock:
            with open(directory / "chunks.jsonl", "w", encoding="utf-8") as fh:
                for chunk, _ in self._entries:
                    fh.write(json.dumps({
                        "id": chunk.id,
                        "text": chunk.text,
                        "source_doc": chunk.source_doc,
                        "span": list(chunk.span),
                    }, ensure_ascii=False) + "\n")
            with open(directory / "vectors.jsonl", "w", encoding="utf-8") as fh:
                for chunk, vec in self._entries:
                    fh.write(json.dumps({"id": chunk.id, "values": vec.tolist()}) + "\n")
            with open(directory / "metadata.json", "w", encoding="utf-8") as fh:
                json.dump({"embedder": self.embedder_name, "created_at": self.created_at}, fh)

    @classmethod
    def load(cls, directory: str | Path) -> "IndexStore":
        directory = Path(directory)
        meta_path = directory / "metadata.json"
        if not meta_path.exists():
            raise StoreNotFoundError(f"no index store at {directory}")
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
        store = cls(embedder_name=meta["embedder"], created_at=meta.get("created_at"))
        chunks: dict[str, Chunk] = {}
        with open(directory / "chunks.jsonl", encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                chunks[rec["id"]] = Chunk(
                    id=rec["id"],
                    text=rec["text"],
                    source_doc=rec["source_doc"],
                    span=tuple(rec["span"]),
                )
        with open(directory / "vectors.jsonl", encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                store.add(chunks[rec["id"]], np.asarray(rec["values"], dtype=np.float64))
        return store


def build_index(
    chunks: Iterable[Chunk],
    embedder: Embedder | None = None,
) -> IndexStore:
    embedder = embedder or HashEmbedder()
    store = IndexStore(embedder_name=embedder.name)
    store.add_chunks(chunks, embedder)
    return store


def query_top_k(
    index: IndexStore,
    query: np.ndarray,
    k: int,
) -> list[tuple[Chunk, float]]:
    """Rank chunks by cosine similarity, ties broken by chunk id ascending."""
    if k < 1:
        raise ValueError("k must be >= 1")
    entries = index.entries
    if not entries:
        return []
    query = np.asarray(query, dtype=np.float64)
    matrix = np.stack([vec for _, vec in entries])
    qnorm = float(np.linalg.norm(query))
    vnorms = np.linalg.norm(matrix, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = matrix @ query / (vnorms * qnorm)
    sims = np.where(np.isfinite(sims), sims, 0.0)
    order = sorted(range(len(entries)), key=lambda i: (-sims[i], entries[i][0].id))
    return [(entries[i][0], float(sims[i])) for i in order[: min(k, len(entries))]]


def _word_count(text: str) -> int:
    return len(_WORD_RE.findall(text))


def _render_prompt(context: str, question: str) -> str:
    if context:
        return f"Considering {context} , answer the question {question}"
    return f"Answer the question {question}"


def assemble_rag_prompt(
    chunks: Sequence[Chunk],
    question: str,
    budget_units: int = 2000,
) -> str:
    """Build the context-augmented prompt, dropping lowest-ranked chunks first.

    Retained chunks are the longest ranked prefix whose combined word count
    fits the budget; their text appears verbatim, in rank order, ahead of the
    question. With no chunks the plain-question prompt is returned.
    """
    if not question.strip():
        raise ValueError("question must be non-empty")
    if budget_units < 1:
        raise ValueError("budget_units must be >= 1")
    retained = retained_for_budget(chunks, budget_units)
    context = "\n".join(c.text for c in retained)
    return _render_prompt(context, question)


def retained_for_budget(chunks: Sequence[Chunk], budget_units: int) -> list[Chunk]:
    """Longest ranked prefix of chunks whose word counts sum within budget."""
    retained: list[Chunk] = []
    used = 0
    for chunk in chunks:
        cost = _word_count(chunk.text)
        if used + cost > budget_units:
            break
        retained.append(chunk)
        used += cost
    return retained


@dataclass(frozen=True)
class RagAnswer:
    answer: str
    provenance: list[str]
    prompt: str


def answer_with_rag(
    index: IndexStore,
    question: str,
    gateway: Gateway,
    k: int = 4,
    *,
    embedder: Embedder | None = None,
    budget_units: int = 2000,
) -> RagAnswer:
    """Answer a question from the top-k retrieved chunks.

    Provenance lists exactly the retained chunk ids in rank order. Gateway
    failures propagate with the assembled prompt attached for diagnosis.
    """
    embedder = embedder or get_embedder(index.embedder_name)
    ranked = query_top_k(index, embedder.embed(question), k) if len(index) else []
    retained = retained_for_budget([c for c, _ in ranked], budget_units)
    prompt = assemble_rag_prompt(retained, question, budget_units)
    try:
        response = gateway.complete_chat([user(prompt)])
    except GatewayError as exc:
        exc.assembled_prompt = prompt  # type: ignore[attr-defined]
        raise
    return RagAnswer(
        answer=response.text,
        provenance=[c.id for c in retained],
        prompt=prompt,
    )

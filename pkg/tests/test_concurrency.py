"""Concurrency contracts: atomic script cursors, single-writer index reads."""

from __future__ import annotations

import threading

import numpy as np

from ontobench.gateway import ScriptExhaustedError, scripted_gateway, user
from ontobench.retrieval import Chunk, IndexStore, embed_fallback, query_top_k


def test_scripted_cursor_advances_atomically():
    steps = [f"step {i}" for i in range(64)]
    gateway = scripted_gateway(steps)
    seen: list[str] = []
    lock = threading.Lock()
    errors: list[Exception] = []

    def worker():
        while True:
            try:
                response = gateway.complete_chat([user("go")])
            except ScriptExhaustedError:
                return
            except Exception as exc:  # pragma: no cover - fail loudly
                errors.append(exc)
                return
            with lock:
                seen.append(response.text)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    # every step delivered exactly once, none skipped or repeated
    assert sorted(seen) == sorted(steps)
    assert gateway.provider.calls == len(steps)


def test_index_supports_readers_during_writes():
    store = IndexStore()
    stop = threading.Event()
    errors: list[Exception] = []

    def writer():
        for i in range(300):
            store.add(
                Chunk(id=f"w{i:04d}", text=f"text {i}", source_doc="d", span=(0, 1)),
                embed_fallback(f"text {i}"),
            )
        stop.set()

    def reader():
        query = embed_fallback("text 5")
        while not stop.is_set():
            try:
                results = query_top_k(store, query, 3) if len(store) else []
            except Exception as exc:  # pragma: no cover - fail loudly
                errors.append(exc)
                return
            sims = [s for _, s in results]
            assert sims == sorted(sims, reverse=True)

    threads = [threading.Thread(target=reader) for _ in range(4)]
    write_thread = threading.Thread(target=writer)
    for t in threads:
        t.start()
    write_thread.start()
    write_thread.join()
    for t in threads:
        t.join()
    assert not errors
    assert len(store) == 300


def test_independent_scans_run_concurrently():
    from ontobench.chemtools import EnergyBackend
    from ontobench.ffit import run_bond_scan

    backend = EnergyBackend.morse()
    results: dict[int, list[float]] = {}
    lock = threading.Lock()

    def worker(idx: int):
        scan = run_bond_scan(("O", "O"), 0.7, 1.8, 0.1, backend)
        with lock:
            results[idx] = scan.energies

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    baseline = results[0]
    assert all(energies == baseline for energies in results.values())
    assert len(baseline) == 12

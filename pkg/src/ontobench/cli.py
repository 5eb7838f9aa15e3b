"""Command-line entry points for ingestion, answering, agents, fitting, serving.

Exit codes: 0 success, 2 usage error (argparse), 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .agents.chat import ConsoleHuman, ScriptedHuman, run_group_chat
from .agents.codeexec import SandboxConfig, run_code_loop
from .agents.scenarios import resolve_scenario
from .chemtools import EnergyBackend
from .config import WorkbenchConfig, build_gateway, load_config
from .ffit import (
    InsufficientDataError,
    find_minimum,
    fit_cubic_spline,
    render_scan_plot_svg,
    run_bond_scan,
    write_scan_results,
    write_spline_params,
)
from .kgraph import (
    KnowledgeGraph,
    answer_with_graph,
    export_graph,
    extract_triples,
    load_graph,
    save_graph,
    upsert_triples,
)
from .retrieval import HashEmbedder, IndexStore, answer_with_rag, chunk_document
from .sampling import TreeConfig, sample_linear, sample_tree
from .service import serve_http


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ontobench",
        description="Knowledge-graph retrieval, agent orchestration, and force-field fitting",
    )
    parser.add_argument("--config", help="path to a JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="chunk, embed, and index documents")
    ingest.add_argument("files", nargs="+")
    ingest.add_argument("--store", required=True, help="store directory")
    ingest.add_argument("--graph", action="store_true", help="also extract a knowledge graph")
    ingest.add_argument("--max-units", type=int, default=None)
    ingest.add_argument("--overlap", type=int, default=None)

    ask = sub.add_parser("ask", help="answer a question")
    ask.add_argument("question")
    ask.add_argument("--store", help="store directory (rag/graph modes)")
    ask.add_argument("--mode", choices=["plain", "rag", "graph", "tree"], default="rag")
    ask.add_argument("--k", type=int, default=None)

    graph = sub.add_parser("graph", help="graph utilities")
    graph_sub = graph.add_subparsers(dest="graph_command", required=True)
    graph_export = graph_sub.add_parser("export", help="export the stored graph")
    graph_export.add_argument("--store", required=True)
    graph_export.add_argument("--format", choices=["dot", "graphml", "jsonl"], required=True)
    graph_export.add_argument("--out", help="output file (default: stdout)")

    agents = sub.add_parser("agents", help="agent sessions")
    agents_sub = agents.add_subparsers(dest="agents_command", required=True)
    agents_run = agents_sub.add_parser("run", help="run a scenario")
    agents_run.add_argument("--scenario", required=True)
    agents_run.add_argument("--human", action="store_true", help="prompt for human input")
    agents_run.add_argument("--max-rounds", type=int, default=None)
    agents_run.add_argument("--message", default=None, help="override the initial message")
    agents_run.add_argument("--session-dir", default="sessions", help="transcript/code directory")

    ffit = sub.add_parser("ffit", help="force-field fitting")
    ffit_sub = ffit.add_subparsers(dest="ffit_command", required=True)
    scan = ffit_sub.add_parser("scan", help="bond scan, spline fit, and artifacts")
    scan.add_argument("--pair", default="O,O", help="element pair, e.g. O,O")
    scan.add_argument("--start", type=float, default=0.7)
    scan.add_argument("--end", type=float, default=1.8)
    scan.add_argument("--step", type=float, default=0.1)
    scan.add_argument(
        "--backend",
        default="morse",
        help="table:FILE, morse, or cmd:\"...\"",
    )
    scan.add_argument("--out", required=True, help="output directory")

    serve = sub.add_parser("serve", help="run the HTTP JSON service")
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--store", help="store directory")
    serve.add_argument("--session-dir", default="sessions")

    return parser


def _load_store(path: str) -> IndexStore:
    return IndexStore.load(Path(path))


def _cmd_ingest(args: argparse.Namespace, config: WorkbenchConfig) -> int:
    max_units = args.max_units or config.max_units
    overlap = args.overlap if args.overlap is not None else config.overlap
    embedder = HashEmbedder()
    store = IndexStore(embedder_name=embedder.name)
    all_chunks = []
    for name in args.files:
        path = Path(name)
        text = path.read_text(encoding="utf-8")
        chunks = chunk_document(text, max_units, overlap, source_doc=path.name)
        store.add_chunks(chunks, embedder)
        all_chunks.extend(chunks)
    store_dir = Path(args.store)
    store.save(store_dir)
    print(f"indexed {len(all_chunks)} chunks from {len(args.files)} files into {store_dir}")
    if args.graph:
        gateway = build_gateway(config.gateway)
        graph = KnowledgeGraph()
        skipped = 0
        for chunk in all_chunks:
            extraction = extract_triples(chunk, gateway)
            upsert_triples(graph, extraction.triples)
            skipped += extraction.skipped
        save_graph(graph, store_dir / "graph.jsonl")
        print(
            f"graph: {len(graph.nodes)} nodes, {graph.edge_count()} edges"
            f" ({skipped} unparseable lines skipped)"
        )
    return 0


def _cmd_ask(args: argparse.Namespace, config: WorkbenchConfig) -> int:
    gateway = build_gateway(config.gateway)
    k = args.k or config.k
    if args.mode == "plain":
        print(sample_linear(args.question, gateway, config.gateway.sampling_params()))
        return 0
    if args.mode == "tree":
        trace = sample_tree(
            args.question,
            gateway,
            TreeConfig(
                params=config.gateway.sampling_params(),
                thought_temperature=config.thought_temperature,
            ),
        )
        print(trace.answer)
        return 0
    if not args.store:
        print("error: --store is required for rag/graph modes", file=sys.stderr)
        return 1
    store = _load_store(args.store)
    if args.mode == "rag":
        result = answer_with_rag(store, args.question, gateway, k, budget_units=config.budget_units)
        print(result.answer)
        if result.provenance:
            print("provenance:", ", ".join(result.provenance))
        return 0
    graph_path = Path(args.store) / "graph.jsonl"
    graph = load_graph(graph_path) if graph_path.exists() else KnowledgeGraph()
    result = answer_with_graph(
        graph, store, args.question, gateway, k, budget_units=config.budget_units
    )
    print(result.answer)
    print("keywords:", ", ".join(result.keywords))
    if result.provenance:
        print("provenance:", ", ".join(result.provenance))
    return 0


def _cmd_graph_export(args: argparse.Namespace) -> int:
    graph_path = Path(args.store) / "graph.jsonl"
    if not graph_path.exists():
        print(f"error: no graph at {graph_path}", file=sys.stderr)
        return 1
    text = export_graph(load_graph(graph_path), args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_agents_run(args: argparse.Namespace, config: WorkbenchConfig) -> int:
    bundle = resolve_scenario(args.scenario, config.scenarios)
    if args.max_rounds:
        bundle.max_rounds = args.max_rounds
    gateway = bundle.make_gateway(
        None if bundle.script is not None else build_gateway(config.gateway)
    )
    session_dir = Path(args.session_dir)
    session_dir.mkdir(parents=True, exist_ok=True)
    message = args.message or bundle.initial_message
    if bundle.kind == "code_loop":
        assistant, executor = bundle.agents[0], bundle.agents[1]
        transcript = run_code_loop(
            message,
            assistant,
            executor,
            gateway,
            SandboxConfig(workdir=session_dir / "code", timeout=config.sandbox_timeout,
                          interpreters=config.interpreters),
            max_iters=bundle.max_rounds,
        )
    else:
        human = ConsoleHuman() if args.human else ScriptedHuman([])
        transcript = run_group_chat(
            bundle.agents,
            message,
            gateway,
            bundle.registry,
            human,
            bundle.max_rounds,
            policy=bundle.policy,
        )
    for turn in transcript.turns:
        print(f"[{turn.seq:03d}] {turn.speaker} ({turn.kind}): {turn.content}")
    transcript.save_jsonl(session_dir / "session.jsonl")
    print(f"transcript saved to {session_dir / 'session.jsonl'}")
    return 0


def _parse_backend(spec: str) -> EnergyBackend:
    if spec == "morse":
        return EnergyBackend.morse()
    if spec.startswith("table:"):
        with open(spec[len("table:"):], encoding="utf-8") as fh:
            return EnergyBackend.scripted(json.load(fh))
    if spec.startswith("cmd:"):
        return EnergyBackend.external(spec[len("cmd:"):])
    raise ValueError(f"unknown backend spec {spec!r}")


def _cmd_ffit_scan(args: argparse.Namespace, config: WorkbenchConfig) -> int:
    elements = tuple(p.strip() for p in args.pair.split(","))
    if len(elements) != 2:
        print("error: --pair must name two elements, e.g. O,O", file=sys.stderr)
        return 1
    backend = _parse_backend(args.backend)
    scan = run_bond_scan(elements, args.start, args.end, args.step, backend)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_scan_results(scan, out_dir / config.results_name)
    r_min, e_min = find_minimum(scan)
    try:
        model = fit_cubic_spline(scan.bond_lengths, scan.energies)
    except InsufficientDataError:
        print(f"warning: {len(scan.bond_lengths)} samples; skipping spline fit", file=sys.stderr)
        model = None
    if model is not None:
        write_spline_params(model, out_dir / config.spline_name)
        render_scan_plot_svg(scan, model, out_dir / config.plot_name)
    print(
        f"The lowest energy configuration is at a bond length of {r_min} Å "
        f"with an energy of {e_min} Hartree."
    )
    print(f"artifacts written to {out_dir}")
    return 0


def _cmd_serve(args: argparse.Namespace, config: WorkbenchConfig) -> int:
    service = serve_http(
        config,
        port=args.port,
        store_dir=args.store,
        session_root=args.session_dir,
    )
    print(f"serving on http://127.0.0.1:{service.port}")
    try:
        import time

        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        service.shutdown()
    return 0


def run_cli(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = load_config(args.config)
        if args.command == "ingest":
            return _cmd_ingest(args, config)
        if args.command == "ask":
            return _cmd_ask(args, config)
        if args.command == "graph":
            return _cmd_graph_export(args)
        if args.command == "agents":
            return _cmd_agents_run(args, config)
        if args.command == "ffit":
            return _cmd_ffit_scan(args, config)
        if args.command == "serve":
            return _cmd_serve(args, config)
        parser.error(f"unknown command {args.command!r}")
        return 2
    except BrokenPipeError:
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()

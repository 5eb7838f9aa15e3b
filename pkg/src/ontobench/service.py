"""HTTP JSON service exposing answers, graph exports, and live agent sessions.

Sessions run group chats on worker threads; a TERMINATE checkpoint parks the
session in awaiting_human until input arrives on the input endpoint or the
wait times out. Event delivery is cursor-based polling.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import queue
import threading
import uuid
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any
from urllib.parse import parse_qs, urlparse

from .agents.chat import ChatHooks, Transcript, run_group_chat, turn_to_dict
from .agents.codeexec import SandboxConfig, run_code_loop
from .agents.scenarios import ScenarioBundle, resolve_scenario
from .config import WorkbenchConfig, build_gateway
from .gateway import Gateway
from .kgraph import KnowledgeGraph, answer_with_graph, export_graph, load_graph
from .retrieval import IndexStore, answer_with_rag
from .sampling import TreeConfig, sample_linear, sample_tree

logger = logging.getLogger(__name__)

SESSION_STATES = ("running", "awaiting_human", "terminated", "max_rounds", "failed")


@dataclass
class SessionRecord:
    id: str
    scenario: str
    transcript_path: str
    state: str
    created_at: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "scenario": self.scenario,
            "transcript_path": self.transcript_path,
            "state": self.state,
            "created_at": self.created_at,
        }


class _QueueHuman:
    """Blocking request/response channel between a session and the API."""

    def __init__(self, session: "Session", timeout: float):
        self._session = session
        self._timeout = timeout

    def request(self, transcript: Transcript) -> str | None:
        try:
            return self._session._input_queue.get(timeout=self._timeout)
        except queue.Empty:
            return None


class Session:
    """One running scenario with its transcript and state machine."""

    def __init__(
        self,
        session_id: str,
        bundle: ScenarioBundle,
        initial_message: str,
        *,
        fallback_gateway: Gateway | None,
        session_dir: Path,
        input_timeout: float,
        sandbox_timeout: float = 120.0,
    ):
        self.id = session_id
        self.bundle = bundle
        self.initial_message = initial_message or bundle.initial_message
        self.transcript = Transcript()
        self.created_at = _dt.datetime.now(_dt.timezone.utc).isoformat()
        self.session_dir = session_dir
        self.transcript_path = session_dir / "session.jsonl"
        self._fallback_gateway = fallback_gateway
        self._input_timeout = input_timeout
        self._sandbox_timeout = sandbox_timeout
        self._state = "running"
        self._state_lock = threading.Lock()
        self._input_queue: queue.Queue[str] = queue.Queue()
        self._thread: threading.Thread | None = None

    @property
    def state(self) -> str:
        with self._state_lock:
            return self._state

    def _set_state(self, state: str) -> None:
        with self._state_lock:
            self._state = state

    def record(self) -> SessionRecord:
        return SessionRecord(
            id=self.id,
            scenario=self.bundle.name,
            transcript_path=str(self.transcript_path),
            state=self.state,
            created_at=self.created_at,
        )

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def join(self, timeout: float | None = None) -> None:
        if self._thread is not None:
            self._thread.join(timeout)

    def submit_input(self, text: str) -> bool:
        """Deliver human input; False when the session is not awaiting it."""
        with self._state_lock:
            if self._state != "awaiting_human":
                return False
        self._input_queue.put(text)
        return True

    def _run(self) -> None:
        hooks = ChatHooks(
            on_awaiting_human=lambda: self._set_state("awaiting_human"),
            on_human_input=lambda: self._set_state("running"),
        )
        try:
            gateway = self.bundle.make_gateway(self._fallback_gateway)
            if self.bundle.kind == "code_loop":
                assistant, executor = self.bundle.agents[0], self.bundle.agents[1]
                run_code_loop(
                    self.initial_message,
                    assistant,
                    executor,
                    gateway,
                    SandboxConfig(
                        workdir=self.session_dir / "code", timeout=self._sandbox_timeout
                    ),
                    max_iters=self.bundle.max_rounds,
                    transcript=self.transcript,
                )
            else:
                run_group_chat(
                    self.bundle.agents,
                    self.initial_message,
                    gateway,
                    self.bundle.registry,
                    _QueueHuman(self, self._input_timeout),
                    self.bundle.max_rounds,
                    policy=self.bundle.policy,
                    transcript=self.transcript,
                    hooks=hooks,
                )
            self._set_state(self.transcript.status or "terminated")
        except Exception:
            logger.exception("session %s failed", self.id)
            self._set_state("failed")
        try:
            self.session_dir.mkdir(parents=True, exist_ok=True)
            self.transcript.save_jsonl(self.transcript_path)
        except OSError:
            logger.exception("could not persist transcript for session %s", self.id)


class WorkbenchService:
    """Shared state behind the HTTP endpoints."""

    def __init__(
        self,
        config: WorkbenchConfig | None = None,
        *,
        store: IndexStore | None = None,
        graph: KnowledgeGraph | None = None,
        store_dir: str | Path | None = None,
        session_root: str | Path | None = None,
        gateway: Gateway | None = None,
    ):
        self.config = config or WorkbenchConfig()
        self.store = store
        self.graph = graph
        if store_dir is not None:
            store_dir = Path(store_dir)
            self.store = IndexStore.load(store_dir)
            graph_path = store_dir / "graph.jsonl"
            if graph_path.exists():
                self.graph = load_graph(graph_path)
        self.session_root = Path(session_root) if session_root else Path("sessions")
        self.gateway = gateway if gateway is not None else build_gateway(self.config.gateway)
        self.sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._server: ThreadingHTTPServer | None = None

    # -- session management -------------------------------------------------

    def create_session(self, scenario: str, initial_message: str) -> Session:
        bundle = resolve_scenario(scenario, self.config.scenarios)
        session_id = uuid.uuid4().hex[:12]
        session = Session(
            session_id,
            bundle,
            initial_message,
            fallback_gateway=self.gateway,
            session_dir=self.session_root / session_id,
            input_timeout=self.config.human_input_timeout,
            sandbox_timeout=self.config.sandbox_timeout,
        )
        with self._lock:
            self.sessions[session_id] = session
        session.start()
        return session

    def get_session(self, session_id: str) -> Session | None:
        with self._lock:
            return self.sessions.get(session_id)

    # -- answering ----------------------------------------------------------

    def ask(self, question: str, mode: str) -> dict[str, Any]:
        cfg = self.config
        if mode == "plain":
            answer = sample_linear(question, self.gateway, cfg.gateway.sampling_params())
            return {"answer": answer, "provenance": []}
        if mode == "tree":
            trace = sample_tree(
                question,
                self.gateway,
                TreeConfig(
                    params=cfg.gateway.sampling_params(),
                    thought_temperature=cfg.thought_temperature,
                ),
            )
            return {
                "answer": trace.answer,
                "provenance": [],
                "thoughts": trace.thoughts,
                "concepts": trace.concepts,
            }
        if self.store is None:
            raise ValueError(f"mode {mode!r} needs an index store")
        if mode == "rag":
            result = answer_with_rag(
                self.store, question, self.gateway, cfg.k, budget_units=cfg.budget_units
            )
            return {"answer": result.answer, "provenance": result.provenance}
        if mode == "graph":
            graph = self.graph if self.graph is not None else KnowledgeGraph()
            result = answer_with_graph(
                graph, self.store, question, self.gateway, cfg.k,
                budget_units=cfg.budget_units,
            )
            return {
                "answer": result.answer,
                "keywords": result.keywords,
                "provenance": result.provenance,
                "sequence_text": result.sequence_text,
            }
        raise ValueError(f"unknown ask mode {mode!r}")

    # -- http ---------------------------------------------------------------

    def start(self, port: int = 0, host: str = "127.0.0.1") -> int:
        handler = _make_handler(self)
        self._server = ThreadingHTTPServer((host, port), handler)
        thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        thread.start()
        return self._server.server_address[1]

    @property
    def port(self) -> int:
        if self._server is None:
            raise RuntimeError("service is not running")
        return self._server.server_address[1]

    def shutdown(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None


def _make_handler(service: WorkbenchService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt: str, *args: Any) -> None:
            logger.debug("http: " + fmt, *args)

        def _send_json(self, status: int, payload: Any) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_text(self, status: int, text: str, content_type: str) -> None:
            body = text.encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_empty(self, status: int) -> None:
            self.send_response(status)
            self.send_header("Content-Length", "0")
            self.end_headers()

        def _read_json(self) -> dict[str, Any]:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b"{}"
            try:
                return json.loads(raw or b"{}")
            except json.JSONDecodeError:
                return {}

        def do_GET(self) -> None:  # noqa: N802 - http.server API
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            try:
                if parts == ["api", "sessions"]:
                    records = [s.record().to_dict() for s in service.sessions.values()]
                    self._send_json(200, sorted(records, key=lambda r: r["created_at"]))
                elif len(parts) == 4 and parts[:2] == ["api", "sessions"] and parts[3] == "events":
                    session = service.get_session(parts[2])
                    if session is None:
                        self._send_json(404, {"error": "unknown session"})
                        return
                    since = int(parse_qs(url.query).get("since", ["-1"])[0])
                    events = [
                        {"seq": t.seq, "session_id": session.id, "turn": turn_to_dict(t)}
                        for t in session.transcript.since(since)
                    ]
                    self._send_json(200, events)
                elif parts == ["api", "graph"]:
                    fmt = parse_qs(url.query).get("format", ["jsonl"])[0]
                    graph = service.graph if service.graph is not None else KnowledgeGraph()
                    text = export_graph(graph, fmt)
                    content_type = "application/xml" if fmt == "graphml" else "text/plain"
                    self._send_text(200, text, content_type)
                else:
                    self._send_json(404, {"error": "not found"})
            except ValueError as exc:
                self._send_json(400, {"error": str(exc)})
            except Exception as exc:  # noqa: BLE001 - surface as 500, keep serving
                logger.exception("GET %s failed", self.path)
                self._send_json(500, {"error": str(exc)})

        def do_POST(self) -> None:  # noqa: N802 - http.server API
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            try:
                if parts == ["api", "ask"]:
                    payload = self._read_json()
                    question = payload.get("question", "")
                    mode = payload.get("mode", "rag")
                    if not question.strip():
                        self._send_json(400, {"error": "question must be non-empty"})
                        return
                    self._send_json(200, service.ask(question, mode))
                elif parts == ["api", "sessions"]:
                    payload = self._read_json()
                    scenario = payload.get("scenario", "")
                    try:
                        session = service.create_session(
                            scenario, payload.get("initial_message", "")
                        )
                    except KeyError as exc:
                        self._send_json(404, {"error": str(exc)})
                        return
                    self._send_json(201, {"id": session.id})
                elif len(parts) == 4 and parts[:2] == ["api", "sessions"] and parts[3] == "input":
                    session = service.get_session(parts[2])
                    if session is None:
                        self._send_json(404, {"error": "unknown session"})
                        return
                    payload = self._read_json()
                    if session.submit_input(payload.get("text", "")):
                        self._send_empty(204)
                    else:
                        self._send_json(
                            409, {"error": "session is not awaiting human input"}
                        )
                else:
                    self._send_json(404, {"error": "not found"})
            except ValueError as exc:
                self._send_json(400, {"error": str(exc)})
            except Exception as exc:  # noqa: BLE001 - surface as 500, keep serving
                logger.exception("POST %s failed", self.path)
                self._send_json(500, {"error": str(exc)})

    return Handler


def serve_http(
    config: WorkbenchConfig | None = None,
    *,
    port: int = 0,
    store_dir: str | Path | None = None,
    session_root: str | Path | None = None,
    gateway: Gateway | None = None,
) -> WorkbenchService:
    """Start the service on the given port (0 picks a free one)."""
    service = WorkbenchService(
        config, store_dir=store_dir, session_root=session_root, gateway=gateway
    )
    service.start(port)
    return service

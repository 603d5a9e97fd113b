"""HTTP front door: session lifecycle, live events, approvals, evaluation.

Each session owns one plant and one orchestrator loop driven by a background
thread; event reads go through the log's own lock so polling never blocks on
an in-flight inference.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import plant as plant_mod
from .agents import BackendDescriptor, parse_backend_arg
from .errors import AlreadyResolved, SchemaError, TwincellError, UnknownApproval
from .evalharness import format_report, load_suite, run_suite
from .orchestrator import RunConfig, Session
from .scenarios import resolve_scenario
from .services import OPERATOR_SERVICES, default_registry


@dataclass
class GatewayConfig:
    scenario_dir: str = ""
    backend: BackendDescriptor = field(
        default_factory=lambda: BackendDescriptor(kind="rule_oracle",
                                                  profile="sop_fallback"))
    approval_mode: str = "auto"
    pace_ms: int = 0                       # wall-clock sleep per sub-step
    console_dir: str = ""                  # built web console, mounted at /console


class SessionHandle:
    """One live scenario run plus the thread stepping it."""

    def __init__(self, session_id: str, session: Session, pace_ms: int):
        self.id = session_id
        self.session = session
        self.pace_ms = pace_ms
        self.lock = threading.Lock()
        self.thread: threading.Thread | None = None

    @property
    def status(self) -> str:
        return self.session.status

    def start(self) -> None:
        self.thread = threading.Thread(target=self._loop, daemon=True)
        self.thread.start()

    def _loop(self) -> None:
        while True:
            with self.lock:
                status = self.session.status
                if status == "running":
                    self.session.step()
                    status = self.session.status
            if status == "awaiting_approval":
                time.sleep(0.01)
                continue
            if status != "running":
                return
            if self.pace_ms:
                time.sleep(self.pace_ms / 1000.0)

    def join(self, timeout: float = 10.0) -> None:
        if self.thread:
            self.thread.join(timeout)


class StartSessionRequest(BaseModel):
    scenario: str
    backend: str | None = None
    approval_mode: str | None = None
    pace_ms: int | None = None


class TaskRequest(BaseModel):
    text: str


class ApprovalRequest(BaseModel):
    verdict: str
    actor: str = "supervisor"


class EvalRequest(BaseModel):
    suite: str
    backend: str = "rule_oracle:fallback"


def _error(status_code: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status_code,
                         detail={"code": code, "message": message})


def create_app(config: GatewayConfig | None = None) -> FastAPI:
    config = config or GatewayConfig()
    app = FastAPI(title="twincell gateway")
    # The console may be served from another origin during development.
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    sessions: dict[str, SessionHandle] = {}
    approvals_index: dict[str, str] = {}     # approval id -> session id
    registry = default_registry()

    def _get_handle(session_id: str) -> SessionHandle:
        handle = sessions.get(session_id)
        if handle is None:
            raise _error(404, "unknown_session", session_id)
        return handle

    @app.post("/sessions", status_code=201)
    def start_session(request: StartSessionRequest):
        try:
            scenario = resolve_scenario(request.scenario, config.scenario_dir or None)
        except (SchemaError, FileNotFoundError) as exc:
            raise _error(404, "unknown_scenario", str(exc))
        backend = (parse_backend_arg(request.backend) if request.backend
                   else config.backend)
        run_config = RunConfig(
            approval_mode=request.approval_mode or config.approval_mode)
        session = Session(scenario, backend, run_config)
        session_id = uuid.uuid4().hex[:12]
        pace = config.pace_ms if request.pace_ms is None else request.pace_ms
        handle = SessionHandle(session_id, session, pace)
        sessions[session_id] = handle
        handle.start()
        return {"id": session_id, "scenario": scenario.id,
                "status": handle.status}

    @app.get("/sessions/{session_id}")
    def session_status(session_id: str):
        handle = _get_handle(session_id)
        return {"id": handle.id, "scenario": handle.session.scenario.id,
                "status": handle.status,
                "clock_ms": handle.session.plant.clock.now,
                "decisions": handle.session.decisions}

    @app.get("/sessions/{session_id}/events")
    def session_events(session_id: str, since: int = 0, wait_ms: int = 0):
        handle = _get_handle(session_id)
        deadline = time.monotonic() + min(wait_ms, 2000) / 1000.0
        while True:
            records = handle.session.log.records(since)
            if records or time.monotonic() >= deadline:
                break
            time.sleep(0.02)
        return {
            "events": [r.to_dict() | {"timestamp": r.timestamp_text}
                       for r in records],
            "last_seq": records[-1].seq if records else since,
            "status": handle.status,
        }

    @app.get("/sessions/{session_id}/state")
    def session_state(session_id: str):
        handle = _get_handle(session_id)
        with handle.lock:
            session = handle.session
            signals = plant_mod.read_signals(session.plant)
            workpieces = [
                {"id": w.id, "station": w.station, "offset": round(w.offset, 3),
                 "on_agv": w.on_agv, "buffer": w.buffer, "held": w.held,
                 "stuck": w.stuck}
                for w in sorted(session.plant.workpieces.values(),
                                key=lambda w: w.id)]
            plan = None
            if session.plan:
                plan = {"goal": session.plan.goal,
                        "steps": [{"id": s.id, "assignee": s.assignee,
                                   "instruction": s.instruction}
                                  for s in session.plan.steps]}
        return {"clock_ms": session.plant.clock.now, "signals": signals,
                "workpieces": workpieces, "plan": plan,
                "status": handle.status}

    @app.get("/sessions/{session_id}/approvals")
    def session_approvals(session_id: str):
        handle = _get_handle(session_id)
        with handle.lock:
            entries = [
                {"id": a.id, "agent": a.agent_id, "status": a.status,
                 "command": a.decision.command, "reason": a.decision.reason,
                 "created_at": a.created_at}
                for a in handle.session.approvals.values()]
            for entry in entries:
                approvals_index[entry["id"]] = session_id
        return {"approvals": entries}

    @app.post("/sessions/{session_id}/task")
    def submit_task(session_id: str, request: TaskRequest):
        handle = _get_handle(session_id)
        if not request.text.strip():
            raise _error(422, "empty_task", "task text must be non-empty")
        with handle.lock:
            plan = handle.session.handle_user_task(request.text)
        if plan is None:
            return {"accepted": True, "plan": None,
                    "message": "plan could not be parsed; see event log"}
        return {"accepted": True,
                "plan": {"goal": plan.goal,
                         "steps": [{"id": s.id, "assignee": s.assignee,
                                    "instruction": s.instruction}
                                   for s in plan.steps]}}

    @app.post("/approvals/{approval_id}")
    def resolve(approval_id: str, request: ApprovalRequest):
        session_id = approvals_index.get(approval_id)
        if session_id is None:
            for handle in sessions.values():
                if approval_id in handle.session.approvals:
                    session_id = handle.id
                    break
        if session_id is None:
            raise _error(404, "unknown_approval", approval_id)
        handle = _get_handle(session_id)
        try:
            with handle.lock:
                result = handle.session.resolve_approval(
                    approval_id, request.verdict, request.actor)
        except UnknownApproval as exc:
            raise _error(404, "unknown_approval", str(exc))
        except AlreadyResolved as exc:
            raise _error(409, "already_resolved", str(exc))
        except ValueError as exc:
            raise _error(422, "bad_verdict", str(exc))
        body = {"id": approval_id, "verdict": request.verdict}
        if result is not None:
            body["execution"] = {"status": result.status, "detail": result.detail}
        return body

    @app.get("/services")
    def services_catalog():
        return {"catalog": registry.render_catalog(OPERATOR_SERVICES),
                "services": [
                    {"name": d.name, "description": d.description,
                     "params": [{"name": p.name, "kind": p.kind,
                                 "required": p.required}
                                for p in d.params],
                     "effect": d.effect}
                    for d in registry.services.values()],
                "aliases": dict(registry.aliases)}

    @app.post("/eval/run")
    def eval_run(request: EvalRequest):
        try:
            scenarios = load_suite(request.suite)
            backend = parse_backend_arg(request.backend)
        except (SchemaError, ValueError) as exc:
            raise _error(422, "bad_request", str(exc))
        try:
            report = run_suite(scenarios, backend)
        except TwincellError as exc:
            raise _error(500, "eval_failed", str(exc))
        return {"report": report.to_dict(), "table": format_report([report])}

    if config.console_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/console",
                  StaticFiles(directory=config.console_dir, html=True),
                  name="console")

    app.state.sessions = sessions
    app.state.config = config
    return app


def serve(config: GatewayConfig, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=host, port=port, log_level="warning")

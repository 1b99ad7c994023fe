"""Local HTTP facade over the engine: start runs, watch events, answer approvals.

Designed for a developer-local deployment: binds loopback by default, and when
the AGENTFLOW_API_TOKEN environment variable is set every API request must
carry it as a bearer token. Runs execute on background threads; clients follow
progress by long-polling GET /runs/{id}/events and answer approval gates via
POST /runs/{id}/approvals. Code-execution postprocessors stay disabled unless
the run was created with unsafe_allow_code_execution = true.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, RedirectResponse
from fastapi.staticfiles import StaticFiles

from .config import EngineConfig, build_registry
from .engine import ApprovalDecision, Phase, RunConfig, RunState, run_workflow
from .errors import UnknownPostprocessorError, WorkflowInvalid
from .interactions import InteractionLog, TeeLog, format_timestamp, log_path, utcnow
from .llm import LlmClient, MockLlm
from .model import (
    LENIENT,
    STRICT,
    WorkflowDefinition,
    parse_workflow,
    validate_chain,
    validate_document,
)
from .postprocessors import ExecutionPolicy

MAX_VALIDATE_BYTES = 1_000_000
PACKAGED_WORKFLOWS = Path(__file__).parent / "workflows"


@dataclass
class PendingApproval:
    agent_name: str
    attempt: int
    raw_output: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "agent_name": self.agent_name,
            "attempt": self.attempt,
            "raw_output": self.raw_output,
        }


@dataclass
class ManagedRun:
    run_id: str
    workflow_stem: str
    created_at: str
    cond: threading.Condition = field(default_factory=threading.Condition)
    events: list[dict[str, Any]] = field(default_factory=list)
    state: RunState = field(default_factory=lambda: RunState(Phase.LOADING))
    pending: PendingApproval | None = None
    decision: dict[str, str] | None = None
    decided: dict[tuple[str, int], dict[str, str]] = field(default_factory=dict)
    final_output: str | None = None
    error: str | None = None
    terminal: bool = False

    def push_event(self, kind: str, payload: dict[str, Any]) -> None:
        with self.cond:
            self.events.append({"seq": len(self.events) + 1, "kind": kind, "payload": payload})
            self.cond.notify_all()

    def handle(self) -> dict[str, Any]:
        with self.cond:
            return {
                "run_id": self.run_id,
                "workflow_stem": self.workflow_stem,
                "created_at": self.created_at,
                "state": {
                    "phase": self.state.phase.value,
                    "current_agent": self.state.current_agent,
                    "attempt": self.state.attempt,
                },
                "terminal": self.terminal,
                "final_output": self.final_output,
                "error": self.error,
            }


class _EventSink:
    """Log-sink adapter that mirrors each interaction record as a run event."""

    def __init__(self, run: ManagedRun):
        self._run = run

    def append(self, record) -> None:
        self._run.push_event(record.kind, record.to_dict())

    def close(self) -> None:
        pass


class RunManager:
    def __init__(
        self,
        workflows_dir: Path,
        interactions_dir: Path,
        config: EngineConfig,
        llm_factory=None,
    ):
        self.workflows_dir = workflows_dir
        self.interactions_dir = interactions_dir
        self.config = config
        self.registry = build_registry(config)
        self.llm_factory = llm_factory
        self._runs: dict[str, ManagedRun] = {}
        self._lock = threading.Lock()

    def get(self, run_id: str) -> ManagedRun | None:
        with self._lock:
            return self._runs.get(run_id)

    def _approver(self, run: ManagedRun):
        def respond(agent, raw_output: str, attempt: int) -> ApprovalDecision:
            with run.cond:
                run.pending = PendingApproval(agent.name_of_agent, attempt, raw_output)
                run.decision = None
                run.cond.notify_all()
                while run.decision is None:
                    run.cond.wait()
                payload = run.decision
                run.pending = None
                run.decision = None
            return ApprovalDecision(
                action=payload["action"], edited_output=payload.get("edited_output", "")
            )

        return respond

    def start(
        self,
        definition: WorkflowDefinition,
        config: RunConfig,
        *,
        unsafe_allow_code_execution: bool = False,
        mock_script: list[str] | None = None,
    ) -> ManagedRun:
        run = ManagedRun(
            run_id=uuid.uuid4().hex,
            workflow_stem=definition.source_stem,
            created_at=format_timestamp(utcnow()),
        )
        with self._lock:
            self._runs[run.run_id] = run

        policy = ExecutionPolicy(
            allow_code_execution=unsafe_allow_code_execution,
            interpreter_cmd=self.config.policy.interpreter_cmd,
            timeout_s=self.config.policy.timeout_s,
            probe_timeout_s=self.config.policy.probe_timeout_s,
            allow_network=self.config.policy.allow_network,
        )
        if mock_script is not None:
            llm = MockLlm.sequence(mock_script)
        elif self.llm_factory is not None:
            llm = self.llm_factory()
        elif config.model.startswith("mock/"):
            llm = MockLlm.echo()
        else:
            llm = LlmClient(
                custom_endpoints=self.config.custom_endpoints,
                default_provider=self.config.default_provider,
            )

        def on_state_change(state: RunState) -> None:
            with run.cond:
                run.state = state
            run.push_event(
                "state_change",
                {
                    "phase": state.phase.value,
                    "current_agent": state.current_agent,
                    "attempt": state.attempt,
                },
            )

        def on_step_output(produced) -> None:
            run.push_event(
                "step_output",
                {
                    "agent_name": produced.agent_name,
                    "raw_output": produced.raw_output,
                    "post_output": produced.post_output,
                },
            )

        def execute() -> None:
            sink = TeeLog(
                InteractionLog(log_path(self.interactions_dir, definition.source_stem)),
                _EventSink(run),
            )
            try:
                result = run_workflow(
                    definition,
                    config,
                    llm,
                    registry=self.registry,
                    approver=self._approver(run),
                    log=sink,
                    policy=policy,
                    run_id=run.run_id,
                    on_state_change=on_state_change,
                    on_step_output=on_step_output,
                )
                with run.cond:
                    run.final_output = result.final_output
            except Exception as exc:
                with run.cond:
                    run.error = str(exc)
            finally:
                sink.close()
                with run.cond:
                    run.terminal = True
                    run.cond.notify_all()

        threading.Thread(target=execute, name=f"run-{run.run_id[:8]}", daemon=True).start()
        return run


def _load_stored_workflow(workflows_dir: Path, stem: str) -> str | None:
    path = workflows_dir / f"{stem}.json"
    if not path.is_file():
        return None
    return path.read_text(encoding="utf-8")


def create_app(
    workflows_dir: str | Path | None = None,
    interactions_dir: str | Path = "Interactions",
    config: EngineConfig | None = None,
    poll_timeout_s: float = 25.0,
    ui_dir: str | Path | None = None,
    token: str | None = None,
    llm_factory=None,
) -> FastAPI:
    """Build the service app; token defaults to AGENTFLOW_API_TOKEN when set."""
    workflows_path = Path(workflows_dir) if workflows_dir is not None else PACKAGED_WORKFLOWS
    config = config or EngineConfig()
    manager = RunManager(workflows_path, Path(interactions_dir), config, llm_factory=llm_factory)
    api_token = token if token is not None else os.environ.get("AGENTFLOW_API_TOKEN", "")

    app = FastAPI(title="agentflow service", docs_url=None, redoc_url=None)
    app.state.manager = manager

    @app.middleware("http")
    async def check_token(request: Request, call_next):
        path = request.url.path
        if api_token and not path.startswith("/ui"):
            expected = f"Bearer {api_token}"
            if request.headers.get("authorization", "") != expected:
                return JSONResponse({"detail": "missing or wrong bearer token"}, status_code=401)
        return await call_next(request)

    @app.post("/workflows/validate")
    async def validate_workflow(request: Request, mode: str = STRICT) -> Response:
        if mode not in (STRICT, LENIENT):
            return JSONResponse({"detail": f"unknown mode {mode!r}"}, status_code=400)
        body = await request.body()
        if len(body) > MAX_VALIDATE_BYTES:
            return JSONResponse({"detail": "document too large"}, status_code=413)
        try:
            text = body.decode("utf-8")
            json.loads(text)
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return JSONResponse({"detail": f"malformed JSON: {exc}"}, status_code=400)
        report = validate_document(text, mode=mode)
        return JSONResponse(report.to_dict(), status_code=200 if report.ok else 422)

    @app.get("/workflows")
    def list_workflows() -> JSONResponse:
        entries = []
        for path in sorted(workflows_path.glob("*.json")):
            entry: dict[str, Any] = {"stem": path.stem}
            try:
                definition = parse_workflow(
                    path.read_text(encoding="utf-8"), mode=LENIENT, source_stem=path.stem
                )
                entry["flow_description"] = definition.flow_description
                entry["agents"] = len(definition.agents)
            except WorkflowInvalid:
                entry["flow_description"] = None
                entry["agents"] = None
            entries.append(entry)
        return JSONResponse({"workflows": entries})

    @app.post("/runs")
    async def create_run(request: Request) -> JSONResponse:
        try:
            body = await request.json()
        except json.JSONDecodeError as exc:
            return JSONResponse({"detail": f"malformed JSON: {exc}"}, status_code=400)
        workflow = body.get("workflow")
        if isinstance(workflow, str):
            text = _load_stored_workflow(workflows_path, workflow)
            if text is None:
                return JSONResponse(
                    {"detail": f"no stored workflow named {workflow!r}"}, status_code=404
                )
            stem = workflow
        elif isinstance(workflow, dict):
            text = json.dumps(workflow)
            stem = body.get("stem") or "adhoc"
        else:
            return JSONResponse(
                {"detail": "workflow must be an inline object or a stored stem"}, status_code=400
            )
        try:
            definition = parse_workflow(text, mode=LENIENT, source_stem=stem)
        except WorkflowInvalid as exc:
            return JSONResponse(exc.report.to_dict(), status_code=422)
        chain_report = validate_chain(definition)
        if not chain_report.ok:
            return JSONResponse(chain_report.to_dict(), status_code=422)

        raw_config = body.get("config") or {}
        try:
            run_config = RunConfig(
                model=raw_config.get("model", "mock/echo"),
                creativity=float(raw_config.get("creativity", 0.7)),
                diversity=float(raw_config.get("diversity", 1.0)),
                max_tokens=int(raw_config.get("max_tokens", 1024)),
                dynamic_input=str(raw_config.get("dynamic_input", "")),
            )
        except (ValueError, TypeError) as exc:
            return JSONResponse({"detail": str(exc)}, status_code=400)

        for agent in definition.agents:
            if not manager.registry.resolves(agent.postprocessor_function):
                return JSONResponse(
                    {
                        "detail": f"agent {agent.name_of_agent!r} names unregistered "
                        f"postprocessor {agent.postprocessor_function!r}"
                    },
                    status_code=409,
                )

        mock_script = body.get("mock_script")
        if mock_script is not None and (
            not isinstance(mock_script, list) or not all(isinstance(s, str) for s in mock_script)
        ):
            return JSONResponse({"detail": "mock_script must be a list of strings"}, status_code=400)
        run = manager.start(
            definition,
            run_config,
            unsafe_allow_code_execution=bool(body.get("unsafe_allow_code_execution", False)),
            mock_script=mock_script,
        )
        return JSONResponse(run.handle(), status_code=201)

    @app.get("/runs/{run_id}")
    def get_run(run_id: str) -> JSONResponse:
        run = manager.get(run_id)
        if run is None:
            return JSONResponse({"detail": "unknown run"}, status_code=404)
        return JSONResponse(run.handle())

    @app.get("/runs/{run_id}/events")
    def get_events(run_id: str, after: int = 0) -> JSONResponse:
        run = manager.get(run_id)
        if run is None:
            return JSONResponse({"detail": "unknown run"}, status_code=404)
        deadline = poll_timeout_s
        with run.cond:
            if len(run.events) <= after and not run.terminal:
                run.cond.wait(timeout=deadline)
            events = run.events[after:]
            terminal = run.terminal
        return JSONResponse({"events": events, "terminal": terminal})

    @app.get("/runs/{run_id}/approvals/pending")
    def pending_approval(run_id: str) -> JSONResponse:
        run = manager.get(run_id)
        if run is None:
            return JSONResponse({"detail": "unknown run"}, status_code=404)
        with run.cond:
            pending = run.pending.to_dict() if run.pending is not None else None
        return JSONResponse({"pending": pending})

    @app.post("/runs/{run_id}/approvals")
    async def post_approval(run_id: str, request: Request) -> Response:
        run = manager.get(run_id)
        if run is None:
            return JSONResponse({"detail": "unknown run"}, status_code=404)
        try:
            body = await request.json()
        except json.JSONDecodeError as exc:
            return JSONResponse({"detail": f"malformed JSON: {exc}"}, status_code=400)
        action = body.get("action", "")
        edited = body.get("edited_output", "")
        try:
            ApprovalDecision(action=action, edited_output=edited)
        except ValueError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=400)
        payload = {"action": action}
        if action == "edit":
            payload["edited_output"] = edited
        claimed_agent = body.get("agent_name")
        claimed_attempt = body.get("attempt")
        with run.cond:
            pending = run.pending
            if pending is not None and run.decision is None:
                if claimed_agent is not None and claimed_agent != pending.agent_name:
                    return JSONResponse(
                        {"detail": f"pending approval is for {pending.agent_name!r}"},
                        status_code=409,
                    )
                if claimed_attempt is not None and int(claimed_attempt) != pending.attempt:
                    return JSONResponse(
                        {"detail": f"pending approval is attempt {pending.attempt}"},
                        status_code=409,
                    )
                run.decided[(pending.agent_name, pending.attempt)] = dict(payload)
                run.decision = payload
                run.cond.notify_all()
                return Response(status_code=204)
            # no live gate: a replay of an already-applied decision is a no-op
            if claimed_agent is not None and claimed_attempt is not None:
                key = (claimed_agent, int(claimed_attempt))
                if run.decided.get(key) == payload:
                    return Response(status_code=204)
                if key in run.decided:
                    return JSONResponse(
                        {"detail": "a different decision was already applied"}, status_code=409
                    )
            return JSONResponse({"detail": "no pending approval"}, status_code=409)

    @app.get("/")
    def root():
        if ui_dir is not None and Path(ui_dir).is_dir():
            return RedirectResponse("/ui/")
        return {"service": "agentflow", "workflows_dir": str(workflows_path)}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app

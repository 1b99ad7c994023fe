"""Terminal entry point: validate and run workflows, answer approvals inline.

Exit codes: 0 success, 1 validation failure, 2 runtime failure. Approval
prompts attach to the terminal only when stdin is a TTY; non-interactive
sessions must pass --yes or --approval-script.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .config import build_registry, load_config
from .engine import (
    ApprovalDecision,
    RunConfig,
    auto_approve,
    run_workflow,
    script_approver,
)
from .errors import AgentflowError, WorkflowInvalid
from .interactions import InteractionLog, load_interactions, log_path, runs_in
from .llm import LlmClient, MockLlm
from .model import LENIENT, STRICT, load_workflow, validate_document
from .postprocessors import ExecutionPolicy
from .service import PACKAGED_WORKFLOWS

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_mock(path: str) -> MockLlm:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, list):
        return MockLlm.sequence([str(s) for s in data])
    if isinstance(data, dict) and "sequence" in data:
        return MockLlm.sequence([str(s) for s in data["sequence"]])
    if isinstance(data, dict) and "keyed" in data:
        return MockLlm.keyed({str(k): str(v) for k, v in data["keyed"].items()})
    raise ValueError(f"mock script {path} must be a JSON list or {{sequence|keyed: ...}}")


def _load_approval_script(path: str):
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    decisions = []
    for item in data:
        if isinstance(item, str):
            decisions.append(ApprovalDecision(item))
        else:
            decisions.append(
                ApprovalDecision(item["action"], edited_output=item.get("edited_output", ""))
            )
    return script_approver(decisions)


def _prompt_approver(agent, raw_output: str, attempt: int) -> ApprovalDecision:
    click.echo()
    click.echo(f"--- approval required: {agent.name_of_agent} (attempt {attempt}) ---")
    click.echo(raw_output)
    click.echo("--- end of proposed output ---")
    while True:
        choice = click.prompt("[a]pprove / [e]dit / [r]eject", type=str).strip().lower()
        if choice in ("a", "approve"):
            return ApprovalDecision("approve")
        if choice in ("r", "reject"):
            return ApprovalDecision("reject")
        if choice in ("e", "edit"):
            click.echo("enter replacement text; finish with a single '.' on its own line")
            lines: list[str] = []
            while True:
                line = input()
                if line == ".":
                    break
                lines.append(line)
            text = "\n".join(lines)
            if not text:
                click.echo("empty replacement; choose again")
                continue
            return ApprovalDecision("edit", edited_output=text)
        click.echo(f"unrecognized choice {choice!r}")


@click.group()
@click.version_option(version=__version__, prog_name="agentflow")
def main() -> None:
    """Declarative orchestration of linear LLM agent chains."""


@main.command("run")
@click.argument("workflow", type=click.Path(dir_okay=False))
@click.option("--model", default="mock/echo", show_default=True, help="provider/model identifier")
@click.option("--creativity", default=0.7, show_default=True, type=float)
@click.option("--diversity", default=1.0, show_default=True, type=float)
@click.option("--max-tokens", default=1024, show_default=True, type=int)
@click.option("--input", "dynamic_input", default="", help="dynamic input for the head agent")
@click.option(
    "--input-file",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="read dynamic input from a file",
)
@click.option(
    "--interactions-dir", default="Interactions", show_default=True, help="log directory"
)
@click.option("--strict", is_flag=True, help="reject the lenient-mode alias key")
@click.option("--yes", is_flag=True, help="approve every gate without prompting")
@click.option(
    "--unsafe-allow-code-execution",
    is_flag=True,
    help="let execute postprocessors run generated code",
)
@click.option(
    "--mock-script",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON file of scripted mock responses",
)
@click.option(
    "--approval-script",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON file of scripted approval decisions",
)
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="engine config file",
)
def cmd_run(
    workflow: str,
    model: str,
    creativity: float,
    diversity: float,
    max_tokens: int,
    dynamic_input: str,
    input_file: str | None,
    interactions_dir: str,
    strict: bool,
    yes: bool,
    unsafe_allow_code_execution: bool,
    mock_script: str | None,
    approval_script: str | None,
    config_path: str | None,
) -> None:
    """Execute a workflow file, printing each step's output as it lands."""
    workflow_path = Path(workflow)
    if not workflow_path.is_file():
        candidate = PACKAGED_WORKFLOWS / f"{workflow}.json"
        if candidate.is_file():
            workflow_path = candidate
        else:
            _fail(f"workflow file not found: {workflow}", EXIT_RUNTIME)
    if input_file is not None:
        dynamic_input = Path(input_file).read_text(encoding="utf-8")
    try:
        definition = load_workflow(workflow_path, mode=STRICT if strict else LENIENT)
    except WorkflowInvalid as exc:
        _fail(str(exc), EXIT_INVALID)

    if yes and approval_script:
        _fail("--yes and --approval-script are mutually exclusive", EXIT_RUNTIME)
    gated = any(agent.require_human_approval for agent in definition.agents)
    if yes:
        approver = auto_approve
    elif approval_script:
        approver = _load_approval_script(approval_script)
    elif gated and sys.stdin.isatty():
        approver = _prompt_approver
    elif gated:
        _fail(
            "workflow has approval gates but stdin is not a terminal; "
            "pass --yes or --approval-script",
            EXIT_RUNTIME,
        )
    else:
        approver = None

    engine_config = load_config(config_path)
    registry = build_registry(engine_config)
    base_policy = engine_config.policy
    policy = ExecutionPolicy(
        allow_code_execution=unsafe_allow_code_execution or base_policy.allow_code_execution,
        interpreter_cmd=base_policy.interpreter_cmd,
        timeout_s=base_policy.timeout_s,
        probe_timeout_s=base_policy.probe_timeout_s,
        allow_network=base_policy.allow_network,
    )
    if mock_script is not None:
        llm = _load_mock(mock_script)
    elif model.startswith("mock/"):
        llm = MockLlm.echo()
    else:
        llm = LlmClient(
            custom_endpoints=engine_config.custom_endpoints,
            default_provider=engine_config.default_provider,
        )

    try:
        config = RunConfig(
            model=model,
            creativity=creativity,
            diversity=diversity,
            max_tokens=max_tokens,
            dynamic_input=dynamic_input,
        )
    except ValueError as exc:
        _fail(str(exc), EXIT_RUNTIME)

    def show_step(produced) -> None:
        click.echo(f"\n--- {produced.agent_name} ---")
        click.echo(produced.post_output)

    sink = InteractionLog(log_path(interactions_dir, definition.source_stem))
    try:
        result = run_workflow(
            definition,
            config,
            llm,
            registry=registry,
            approver=approver,
            log=sink,
            policy=policy,
            on_step_output=show_step,
        )
    except WorkflowInvalid as exc:
        _fail(str(exc), EXIT_INVALID)
    except AgentflowError as exc:
        _fail(str(exc), EXIT_RUNTIME)
    finally:
        sink.close()
    click.echo("\n=== final output ===")
    click.echo(result.final_output)


@main.command("validate")
@click.argument("workflow", type=click.Path(dir_okay=False))
@click.option("--strict/--lenient", "strict", default=True, show_default=True)
@click.option("--json", "as_json", is_flag=True, help="print the report as JSON")
def cmd_validate(workflow: str, strict: bool, as_json: bool) -> None:
    """Check a workflow document; exit 0 only when the report is empty."""
    path = Path(workflow)
    if not path.is_file():
        _fail(f"workflow file not found: {workflow}", EXIT_INVALID)
    report = validate_document(
        path.read_text(encoding="utf-8"), mode=STRICT if strict else LENIENT
    )
    if as_json:
        click.echo(json.dumps(report.to_dict(), indent=2))
    elif report.ok:
        click.echo("OK")
        for warning in report.warnings:
            click.echo(f"warning: {warning.code.value} at {warning.path}: {warning.message}")
    else:
        for violation in report.violations:
            click.echo(f"{violation.code.value} at {violation.path}: {violation.message}")
    sys.exit(EXIT_OK if report.ok else EXIT_INVALID)


@main.command("list")
@click.option(
    "--workflows-dir",
    type=click.Path(file_okay=False),
    default=None,
    help="directory of workflow files (default: bundled set)",
)
def cmd_list(workflows_dir: str | None) -> None:
    """List available workflow files."""
    directory = Path(workflows_dir) if workflows_dir else PACKAGED_WORKFLOWS
    if not directory.is_dir():
        _fail(f"no such directory: {directory}", EXIT_INVALID)
    for path in sorted(directory.glob("*.json")):
        try:
            definition = load_workflow(path)
            click.echo(
                f"{path.stem}  ({len(definition.agents)} agents)  {definition.flow_description}"
            )
        except WorkflowInvalid:
            click.echo(f"{path.stem}  (invalid)")


@main.command("logs")
@click.argument("stem")
@click.option("--interactions-dir", default="Interactions", show_default=True)
@click.option("--json", "as_json", is_flag=True, help="dump records as a JSON array")
def cmd_logs(stem: str, interactions_dir: str, as_json: bool) -> None:
    """Show the interaction log of a workflow, grouped by run."""
    path = Path(interactions_dir) / f"{stem}_interactions.json"
    if not path.is_file():
        _fail(f"no interaction log at {path}", EXIT_INVALID)
    records = load_interactions(path)
    if as_json:
        click.echo(json.dumps([r.to_dict() for r in records], indent=2, ensure_ascii=False))
        return
    for run_id in runs_in(records):
        click.echo(f"run {run_id}:")
        for record in records:
            if record.run_id != run_id:
                continue
            agent = f" {record.agent_name}" if record.agent_name else ""
            attempt = f" attempt={record.attempt}" if record.attempt is not None else ""
            click.echo(f"  [{record.seq}] {record.kind}{agent}{attempt} {record.timestamp}")
            if record.output:
                preview = record.output if len(record.output) <= 120 else record.output[:117] + "..."
                click.echo(f"      {preview}")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8040, show_default=True, type=int)
@click.option("--workflows-dir", type=click.Path(file_okay=False), default=None)
@click.option("--interactions-dir", default="Interactions", show_default=True)
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
)
@click.option("--ui-dir", type=click.Path(file_okay=False), default=None)
def cmd_serve(
    host: str,
    port: int,
    workflows_dir: str | None,
    interactions_dir: str,
    config_path: str | None,
    ui_dir: str | None,
) -> None:
    """Start the local HTTP service (loopback by default)."""
    import uvicorn

    from .service import create_app

    if ui_dir is None:
        for candidate in (Path("frontend/dist"), Path(__file__).parents[2] / "frontend" / "dist"):
            if candidate.is_dir():
                ui_dir = str(candidate)
                break
    app = create_app(
        workflows_dir=workflows_dir,
        interactions_dir=interactions_dir,
        config=load_config(config_path),
        ui_dir=ui_dir,
    )
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()

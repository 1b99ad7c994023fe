"""Runs a workflow as a deterministic finite-state machine.

Each agent fires exactly once in chain order. Per agent the engine builds a
two-message prompt, calls the model, routes the raw output through the
approval gate when the agent requires one, postprocesses the approved text,
and feeds the result to the next agent. A reject decision re-invokes the model
fresh (no caching) with the attempt counter bumped; an edit substitutes the
reviewer's text as the approved raw output.

Approval gates the raw output before postprocessing, so a human vets generated
code before an execute postprocessor can run it.

All phase changes go through :func:`step`, a pure transition function with one
successor per (phase, event) pair; :func:`run_workflow` performs the side
effects (LLM calls, approval, postprocessors, log appends) around it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Protocol

from .errors import (
    ApprovalAbortedError,
    PostprocessorRunError,
    ProtocolError,
    RunError,
    UnknownPostprocessorError,
    WorkflowInvalid,
)
from .interactions import InteractionLog, InteractionRecord, format_timestamp, log_path, utcnow
from .llm import CompletionRequest, LlmClient
from .model import AgentSpec, WorkflowDefinition, chain_order, load_workflow, validate_chain
from .postprocessors import ExecutionPolicy, Registry, default_registry

INPUT_DELIMITER = "=== INPUT ==="

CREATIVITY_RANGE = (0.0, 2.0)


class Phase(str, Enum):
    LOADING = "Loading"
    VALIDATING = "Validating"
    AWAITING_LLM = "AwaitingLLM"
    AWAITING_APPROVAL = "AwaitingApproval"
    POSTPROCESSING = "Postprocessing"
    ADVANCING = "Advancing"
    COMPLETED = "Completed"
    FAILED = "Failed"


@dataclass(frozen=True)
class RunState:
    phase: Phase
    current_agent: str | None = None
    attempt: int = 0


@dataclass(frozen=True)
class Event:
    """One FSM input; payload fields carry what the transition needs to know."""

    kind: str
    ok: bool = True
    head: str | None = None
    gated: bool = False
    action: str = ""
    next_agent: str | None = None

    @staticmethod
    def loaded() -> "Event":
        return Event("loaded")

    @staticmethod
    def validated(ok: bool, head: str | None = None) -> "Event":
        return Event("validated", ok=ok, head=head)

    @staticmethod
    def output_received(gated: bool) -> "Event":
        return Event("output_received", gated=gated)

    @staticmethod
    def llm_failed() -> "Event":
        return Event("llm_failed")

    @staticmethod
    def decision(action: str) -> "Event":
        return Event("decision", action=action)

    @staticmethod
    def postprocess_done(next_agent: str | None) -> "Event":
        return Event("postprocess_done", next_agent=next_agent)

    @staticmethod
    def postprocess_failed() -> "Event":
        return Event("postprocess_failed")

    @staticmethod
    def advanced() -> "Event":
        return Event("advanced")


def step(state: RunState, event: Event) -> RunState:
    """Pure transition function: exactly one successor per legal (phase, event)."""
    phase, kind = state.phase, event.kind
    if phase == Phase.LOADING and kind == "loaded":
        return RunState(Phase.VALIDATING)
    if phase == Phase.VALIDATING and kind == "validated":
        if event.ok:
            return RunState(Phase.AWAITING_LLM, event.head, attempt=1)
        return RunState(Phase.FAILED)
    if phase == Phase.AWAITING_LLM and kind == "output_received":
        next_phase = Phase.AWAITING_APPROVAL if event.gated else Phase.POSTPROCESSING
        return RunState(next_phase, state.current_agent, state.attempt)
    if phase == Phase.AWAITING_LLM and kind == "llm_failed":
        return RunState(Phase.FAILED, state.current_agent, state.attempt)
    if phase == Phase.AWAITING_APPROVAL and kind == "decision":
        if event.action == "reject":
            return RunState(Phase.AWAITING_LLM, state.current_agent, state.attempt + 1)
        if event.action in ("approve", "edit"):
            return RunState(Phase.POSTPROCESSING, state.current_agent, state.attempt)
        if event.action == "abort":
            return RunState(Phase.FAILED, state.current_agent, state.attempt)
    if phase == Phase.POSTPROCESSING and kind == "postprocess_done":
        if event.next_agent is None:
            return RunState(Phase.COMPLETED)
        return RunState(Phase.ADVANCING, event.next_agent)
    if phase == Phase.POSTPROCESSING and kind == "postprocess_failed":
        return RunState(Phase.FAILED, state.current_agent, state.attempt)
    if phase == Phase.ADVANCING and kind == "advanced":
        return RunState(Phase.AWAITING_LLM, state.current_agent, attempt=1)
    raise ProtocolError(phase.value, kind if kind != "decision" else f"decision:{event.action}")


@dataclass(frozen=True)
class RunConfig:
    """Model and sampling settings plus the run's external input."""

    model: str
    creativity: float = 0.7
    diversity: float = 1.0
    max_tokens: int = 1024
    dynamic_input: str = ""

    def __post_init__(self) -> None:
        low, high = CREATIVITY_RANGE
        if not low <= self.creativity <= high:
            raise ValueError(f"creativity must be in [{low}, {high}], got {self.creativity}")
        if not 0.0 < self.diversity <= 1.0:
            raise ValueError(f"diversity must be in (0, 1], got {self.diversity}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be positive, got {self.max_tokens}")

    def params(self) -> dict[str, float | int]:
        return {
            "creativity": self.creativity,
            "diversity": self.diversity,
            "max_tokens": self.max_tokens,
        }


@dataclass(frozen=True)
class ApprovalDecision:
    action: str  # approve | edit | reject
    edited_output: str = ""

    def __post_init__(self) -> None:
        if self.action not in ("approve", "edit", "reject"):
            raise ValueError(f"unknown approval action {self.action!r}")
        if self.action == "edit" and not self.edited_output:
            raise ValueError("edit decision requires a non-empty edited_output")


class Approver(Protocol):
    def __call__(self, agent: AgentSpec, raw_output: str, attempt: int) -> ApprovalDecision: ...


def auto_approve(agent: AgentSpec, raw_output: str, attempt: int) -> ApprovalDecision:
    return ApprovalDecision("approve")


def script_approver(decisions: list[ApprovalDecision]) -> Approver:
    """Approver that replays a fixed decision list, one per gate visit."""
    remaining = list(decisions)

    def respond(agent: AgentSpec, raw_output: str, attempt: int) -> ApprovalDecision:
        if not remaining:
            raise ApprovalAbortedError("approval script exhausted")
        return remaining.pop(0)

    return respond


@dataclass(frozen=True)
class StepOutput:
    agent_name: str
    raw_output: str
    post_output: str


@dataclass(frozen=True)
class RunResult:
    final_output: str
    step_outputs: tuple[StepOutput, ...]


def build_prompt(
    agent: AgentSpec, upstream: str | None, dynamic_input: str = ""
) -> list[dict[str, str]]:
    """Two-message conversation for one agent firing.

    The head agent sees the run's dynamic input; every other agent sees its
    predecessor's postprocessed output. An empty payload elides the INPUT
    section entirely.
    """
    if agent.head and upstream is not None:
        raise ValueError("head agent cannot have upstream input")
    if not agent.head and upstream is None:
        raise ValueError(f"agent {agent.name_of_agent!r} is not the head and needs upstream input")
    payload = dynamic_input if agent.head else upstream
    user = agent.what_should_agent_do
    if payload:
        user = f"{user}\n\n{INPUT_DELIMITER}\n{payload}"
    return [
        {"role": "system", "content": agent.role_of_agent},
        {"role": "user", "content": user},
    ]


class _Recorder:
    """Assigns per-run sequence numbers and timestamps to log records."""

    def __init__(self, sink, run_id: str, clock: Callable):
        self.sink = sink
        self.run_id = run_id
        self.clock = clock
        self.seq = 0

    def emit(self, kind: str, **fields) -> None:
        if self.sink is None:
            return
        self.seq += 1
        self.sink.append(
            InteractionRecord(
                seq=self.seq,
                run_id=self.run_id,
                kind=kind,
                timestamp=format_timestamp(self.clock()),
                **fields,
            )
        )


def run_workflow(
    definition: WorkflowDefinition,
    config: RunConfig,
    llm,
    *,
    registry: Registry | None = None,
    approver: Approver | None = None,
    log=None,
    policy: ExecutionPolicy | None = None,
    clock: Callable | None = None,
    run_id: str | None = None,
    on_state_change: Callable[[RunState], None] | None = None,
    on_step_output: Callable[[StepOutput], None] | None = None,
) -> RunResult:
    """Execute every agent once in chain order and return the collected outputs.

    The interaction log receives one run_start record, one llm_call per model
    invocation (rejected attempts included), one approval_event per gate
    decision, one postprocess record per applied function, and one run_end.
    On failure the partial log is flushed with the error in run_end, then the
    causing exception propagates.
    """
    registry = registry if registry is not None else default_registry()
    policy = policy or ExecutionPolicy()
    clock = clock or utcnow
    if run_id is None:
        run_id = f"{definition.source_stem or 'run'}-{clock():%Y%m%d%H%M%S%f}"

    def notify(state: RunState) -> None:
        if on_state_change is not None:
            on_state_change(state)

    state = RunState(Phase.LOADING)
    notify(state)
    state = step(state, Event.loaded())
    notify(state)

    chain_report = validate_chain(definition)
    problems: list[str] = []
    if not chain_report.ok:
        state = step(state, Event.validated(ok=False))
        notify(state)
        raise WorkflowInvalid(chain_report)
    for agent in definition.agents:
        if not registry.resolves(agent.postprocessor_function):
            problems.append(
                f"agent {agent.name_of_agent!r} names unregistered postprocessor "
                f"{agent.postprocessor_function!r}"
            )
    if problems:
        state = step(state, Event.validated(ok=False))
        notify(state)
        raise UnknownPostprocessorError("; ".join(problems))
    gates = [a.name_of_agent for a in definition.agents if a.require_human_approval]
    if gates and approver is None:
        state = step(state, Event.validated(ok=False))
        notify(state)
        raise ApprovalAbortedError(
            f"workflow has approval gates ({', '.join(gates)}) but no approver was provided"
        )

    order = chain_order(definition)
    state = step(state, Event.validated(ok=True, head=order[0].name_of_agent))
    notify(state)

    recorder = _Recorder(log, run_id, clock)
    recorder.emit(
        "run_start",
        input=config.dynamic_input,
        output=definition.flow_description,
        model=config.model,
        params=config.params(),
    )

    step_outputs: list[StepOutput] = []
    upstream: str | None = None
    try:
        for agent in order:
            raw = ""
            while True:
                messages = build_prompt(agent, upstream, config.dynamic_input)
                request = CompletionRequest(
                    model=config.model,
                    messages=messages,
                    temperature=config.creativity,
                    top_p=config.diversity,
                    max_tokens=config.max_tokens,
                )
                prompt_text = json.dumps(messages, ensure_ascii=False)
                try:
                    response = llm.complete(request)
                except Exception as exc:
                    recorder.emit(
                        "llm_call",
                        agent_name=agent.name_of_agent,
                        agent_role=agent.role_of_agent,
                        attempt=state.attempt,
                        input=prompt_text,
                        output="",
                        model=config.model,
                        params=config.params(),
                    )
                    state = step(state, Event.llm_failed())
                    notify(state)
                    raise RunError(
                        f"model call failed at agent {agent.name_of_agent!r}: {exc}"
                    ) from exc
                raw = response.text
                recorder.emit(
                    "llm_call",
                    agent_name=agent.name_of_agent,
                    agent_role=agent.role_of_agent,
                    attempt=state.attempt,
                    input=prompt_text,
                    output=raw,
                    model=config.model,
                    params=config.params(),
                )
                if not agent.require_human_approval:
                    state = step(state, Event.output_received(gated=False))
                    notify(state)
                    break
                state = step(state, Event.output_received(gated=True))
                notify(state)
                try:
                    decision = approver(agent, raw, state.attempt)
                except ApprovalAbortedError:
                    state = step(state, Event.decision("abort"))
                    notify(state)
                    raise
                except Exception as exc:
                    state = step(state, Event.decision("abort"))
                    notify(state)
                    raise ApprovalAbortedError(f"approval channel failed: {exc}") from exc
                recorder.emit(
                    "approval_event",
                    agent_name=agent.name_of_agent,
                    agent_role=agent.role_of_agent,
                    attempt=state.attempt,
                    input=raw,
                    output=decision.action,
                )
                state = step(state, Event.decision(decision.action))
                notify(state)
                if decision.action == "reject":
                    continue
                if decision.action == "edit":
                    raw = decision.edited_output
                break

            post = raw
            if agent.postprocessor_function is not None:
                try:
                    result = registry.apply(agent.postprocessor_function, raw, policy)
                except Exception as exc:
                    state = step(state, Event.postprocess_failed())
                    notify(state)
                    raise PostprocessorRunError(
                        agent.name_of_agent, agent.postprocessor_function, exc
                    ) from exc
                post = raw if result.output is None else result.output
                recorder.emit(
                    "postprocess",
                    agent_name=agent.name_of_agent,
                    agent_role=agent.role_of_agent,
                    attempt=state.attempt,
                    input=raw,
                    output=post,
                )

            produced = StepOutput(agent.name_of_agent, raw, post)
            step_outputs.append(produced)
            if on_step_output is not None:
                on_step_output(produced)
            upstream = post
            state = step(state, Event.postprocess_done(agent.next))
            notify(state)
            if agent.next is not None:
                state = step(state, Event.advanced())
                notify(state)
    except Exception as exc:
        recorder.emit("run_end", output=f"run failed: {exc}")
        raise

    final_output = step_outputs[-1].post_output if step_outputs else ""
    recorder.emit("run_end", output=final_output)
    return RunResult(final_output=final_output, step_outputs=tuple(step_outputs))


def run(
    workflow_path: str | Path,
    dynamic_input: str = "",
    model: str = "mock/echo",
    creativity: float = 0.7,
    diversity: float = 1.0,
    max_tokens: int = 1024,
    *,
    mode: str = "lenient",
    llm=None,
    registry: Registry | None = None,
    approver: Approver | None = None,
    interactions_dir: str | Path = "Interactions",
    policy: ExecutionPolicy | None = None,
    clock: Callable | None = None,
) -> tuple[str, list[StepOutput]]:
    """Load a workflow file, run it, and log under the interactions directory.

    Returns (final_output, step_outputs). Stringify any structured dynamic
    input before passing it in.
    """
    definition = load_workflow(workflow_path, mode=mode)
    config = RunConfig(
        model=model,
        creativity=creativity,
        diversity=diversity,
        max_tokens=max_tokens,
        dynamic_input=dynamic_input,
    )
    if llm is None:
        llm = LlmClient()
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
            clock=clock,
        )
    finally:
        sink.close()
    return result.final_output, list(result.step_outputs)

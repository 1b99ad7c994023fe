"""Declarative orchestration of linear LLM agent chains.

Workflows are JSON documents describing a chain of agents: who each agent is,
what it should do, whether a human must approve its output, and which agent
runs next. The engine walks the chain, calls the configured model once per
agent, routes raw output through approval and postprocessing, and appends an
auditable interaction log per run.
"""

from .engine import RunConfig, RunResult, StepOutput, run, run_workflow
from .errors import AgentflowError, WorkflowInvalid
from .interactions import InteractionLog, InteractionRecord, load_interactions, log_path
from .llm import CompletionRequest, CompletionResponse, LlmClient, MockLlm, resolve_provider
from .model import (
    AgentSpec,
    ValidationReport,
    Violation,
    ViolationCode,
    WorkflowDefinition,
    chain_order,
    load_workflow,
    parse_workflow,
    serialize_workflow,
    validate_chain,
    validate_document,
)
from .postprocessors import ExecutionPolicy, Registry, default_registry

__version__ = "0.1.0"

__all__ = [
    "AgentSpec",
    "AgentflowError",
    "CompletionRequest",
    "CompletionResponse",
    "ExecutionPolicy",
    "InteractionLog",
    "InteractionRecord",
    "LlmClient",
    "MockLlm",
    "Registry",
    "RunConfig",
    "RunResult",
    "StepOutput",
    "ValidationReport",
    "Violation",
    "ViolationCode",
    "WorkflowDefinition",
    "chain_order",
    "default_registry",
    "load_interactions",
    "load_workflow",
    "log_path",
    "parse_workflow",
    "resolve_provider",
    "run",
    "run_workflow",
    "serialize_workflow",
    "validate_chain",
    "validate_document",
]

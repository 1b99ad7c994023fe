"""Exception hierarchy shared across the package."""

from __future__ import annotations


class AgentflowError(Exception):
    """Base class for all agentflow errors."""


class WorkflowInvalid(AgentflowError):
    """A workflow document failed schema or chain validation.

    Carries the full :class:`~agentflow.model.ValidationReport` so callers can
    render individual violations instead of a flat message.
    """

    def __init__(self, report) -> None:
        lines = "; ".join(f"{v.code} at {v.path}: {v.message}" for v in report.violations)
        super().__init__(f"workflow is invalid: {lines}")
        self.report = report


class ChainOrderError(AgentflowError):
    """chain_order() was called on a definition that fails chain validation."""


class ProtocolError(AgentflowError):
    """An engine event was applied in a phase where it is not legal."""

    def __init__(self, phase, event) -> None:
        super().__init__(f"event {event!r} is not legal in phase {phase!r}")
        self.phase = phase
        self.event = event


class RunError(AgentflowError):
    """Base class for failures that abort a workflow run."""


class UnknownPostprocessorError(RunError):
    """A workflow names a postprocessor that is not in the registry."""


class DuplicatePostprocessorError(AgentflowError):
    """A postprocessor name was registered twice."""


class PostprocessorRunError(RunError):
    """A postprocessor raised while transforming an agent output."""

    def __init__(self, agent_name: str, function_name: str, cause: str) -> None:
        super().__init__(
            f"postprocessor {function_name!r} failed for agent {agent_name!r}: {cause}"
        )
        self.agent_name = agent_name
        self.function_name = function_name


class NoTargetError(AgentflowError):
    """No pingable host or address could be extracted from the text."""


class ProbeDisallowedError(AgentflowError):
    """The execution policy forbids network probes."""


class CodeExecutionDisabledError(AgentflowError):
    """Code execution was requested but the policy leaves it disabled."""


class CodeExecutionTimeout(AgentflowError):
    """The executed snippet exceeded the policy wall-clock timeout."""


class ApprovalAbortedError(RunError):
    """The approval channel closed before a decision arrived."""


class ProviderError(RunError):
    """Base class for LLM provider failures."""


class MissingCredentialError(ProviderError):
    """The credential environment variable for a provider is not set."""

    def __init__(self, variable: str) -> None:
        super().__init__(f"missing credential: set {variable}")
        self.variable = variable


class UnknownProviderError(ProviderError):
    """The model's provider prefix is unknown and has no custom endpoint."""


class ProviderHttpError(ProviderError):
    """The provider endpoint answered with a non-success status."""

    def __init__(self, status_code: int, excerpt: str) -> None:
        super().__init__(f"provider returned HTTP {status_code}: {excerpt}")
        self.status_code = status_code


class TransportFailure(ProviderError):
    """The provider endpoint was unreachable after the configured retries."""


class MalformedResponseError(ProviderError):
    """The provider response is missing the expected fields."""


class ScriptExhaustedError(ProviderError):
    """A sequence-mode mock ran out of scripted responses."""


class UnknownScriptKeyError(ProviderError):
    """A keyed-mode mock has no response for the request's prompt hash."""


class InteractionLogCorrupt(AgentflowError):
    """An interaction log file contains a record that cannot be decoded."""

    def __init__(self, path, line_number: int, byte_offset: int, detail: str) -> None:
        super().__init__(
            f"{path}: malformed record at line {line_number} (byte offset {byte_offset}): {detail}"
        )
        self.line_number = line_number
        self.byte_offset = byte_offset

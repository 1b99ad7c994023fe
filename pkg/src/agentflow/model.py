"""Workflow documents: parsing, validation, and chain ordering.

A workflow is a JSON document declaring an ordered chain of agents. Each agent
carries a name, a system role, a task prompt, an approval flag, an optional
postprocessor name, and a ``next`` pointer naming its successor. Exactly one
agent is the head, and following ``next`` pointers from the head must visit
every agent exactly once before hitting the ``"None"`` sentinel.

Validation is two-layered: the JSON Schema layer checks document structure
(required keys, the "True"/"False" string enums, unknown keys), and the chain
layer checks the head/next pointer topology. Both layers report findings as
:class:`Violation` entries with JSON-pointer paths and stable codes.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterator

import jsonschema

from .errors import ChainOrderError, WorkflowInvalid

STRICT = "strict"
LENIENT = "lenient"

NONE_SENTINEL = "None"

# Key that two of the bundled workflows spell with a trailing question mark.
# Lenient mode treats it as an alias for the canonical key; strict mode
# rejects it like any other unknown property.
APPROVAL_KEY = "require_human_approval_of_response"
APPROVAL_KEY_ALIAS = APPROVAL_KEY + "?"

AGENT_KEYS = (
    "head",
    "name_of_agent",
    "role_of_agent",
    "what_should_agent_do",
    APPROVAL_KEY,
    "postprocessor_function",
    "next",
)

# Fields that must not be empty even though the schema only constrains type.
_NONEMPTY_AGENT_KEYS = ("name_of_agent", "role_of_agent", "what_should_agent_do")

WORKFLOW_SCHEMA: dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "Workflow",
    "type": "object",
    "required": ["flow_description", "agents"],
    "properties": {
        "flow_description": {"type": "string"},
        "agents": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": list(AGENT_KEYS),
                "properties": {
                    "head": {"type": "string", "enum": ["True", "False"]},
                    "name_of_agent": {"type": "string"},
                    "role_of_agent": {"type": "string"},
                    "what_should_agent_do": {"type": "string"},
                    APPROVAL_KEY: {"type": "string", "enum": ["True", "False"]},
                    "postprocessor_function": {"type": "string"},
                    "next": {"type": "string"},
                },
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}

_VALIDATOR = jsonschema.Draft7Validator(WORKFLOW_SCHEMA)


class ViolationCode(str, Enum):
    """Stable identifiers for validation findings."""

    MALFORMED_JSON = "MALFORMED_JSON"
    MISSING_REQUIRED = "MISSING_REQUIRED"
    BAD_ENUM = "BAD_ENUM"
    BAD_TYPE = "BAD_TYPE"
    EMPTY_AGENTS = "EMPTY_AGENTS"
    UNKNOWN_KEY = "UNKNOWN_KEY"
    EMPTY_VALUE = "EMPTY_VALUE"
    NO_HEAD = "NO_HEAD"
    MULTIPLE_HEADS = "MULTIPLE_HEADS"
    DANGLING_NEXT = "DANGLING_NEXT"
    CYCLE = "CYCLE"
    UNREACHABLE = "UNREACHABLE"
    DUPLICATE_NAME = "DUPLICATE_NAME"
    MULTIPLE_PREDECESSORS = "MULTIPLE_PREDECESSORS"
    ORDER_MISMATCH = "ORDER_MISMATCH"  # warning only


@dataclass(frozen=True)
class Violation:
    code: ViolationCode
    path: str  # JSON pointer into the source document
    message: str

    def to_dict(self) -> dict[str, str]:
        return {"code": self.code.value, "path": self.path, "message": self.message}


@dataclass
class ValidationReport:
    """Outcome of validating one workflow document.

    ``violations`` empty means the document is accepted; ``warnings`` never
    block acceptance.
    """

    mode: str
    violations: list[Violation] = field(default_factory=list)
    warnings: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "violations": [v.to_dict() for v in self.violations],
            "warnings": [v.to_dict() for v in self.warnings],
        }


@dataclass(frozen=True)
class AgentSpec:
    """One step of a workflow, with booleans and sentinels decoded."""

    head: bool
    name_of_agent: str
    role_of_agent: str
    what_should_agent_do: str
    require_human_approval: bool
    postprocessor_function: str | None  # None when the document says "None"
    next: str | None  # None when this agent is terminal

    def to_dict(self) -> dict[str, str]:
        """Re-encode to the document form (string enums and sentinels)."""
        return {
            "head": "True" if self.head else "False",
            "name_of_agent": self.name_of_agent,
            "role_of_agent": self.role_of_agent,
            "what_should_agent_do": self.what_should_agent_do,
            APPROVAL_KEY: "True" if self.require_human_approval else "False",
            "postprocessor_function": self.postprocessor_function or NONE_SENTINEL,
            "next": self.next or NONE_SENTINEL,
        }


@dataclass(frozen=True)
class WorkflowDefinition:
    """A schema-valid workflow document, agents in source array order."""

    flow_description: str
    agents: tuple[AgentSpec, ...]
    source_stem: str

    @property
    def head(self) -> AgentSpec | None:
        for agent in self.agents:
            if agent.head:
                return agent
        return None

    def agent_named(self, name: str) -> AgentSpec | None:
        for agent in self.agents:
            if agent.name_of_agent == name:
                return agent
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "flow_description": self.flow_description,
            "agents": [agent.to_dict() for agent in self.agents],
        }


class OrderMismatchWarning(UserWarning):
    """Execution order (next pointers) differs from the source array order."""


def _pointer(parts: Iterator[Any] | list[Any]) -> str:
    escaped = [str(p).replace("~", "~0").replace("/", "~1") for p in parts]
    return "/" + "/".join(escaped) if escaped else ""


_QUOTED = re.compile(r"'([^']*)'")


def _schema_violations(doc: Any) -> list[Violation]:
    found: list[Violation] = []
    for error in _VALIDATOR.iter_errors(doc):
        base = list(error.absolute_path)
        if error.validator == "required":
            # jsonschema anchors 'required' at the object; point at the key.
            key = _QUOTED.search(error.message).group(1)
            found.append(
                Violation(
                    ViolationCode.MISSING_REQUIRED,
                    _pointer(base + [key]),
                    f"required property {key!r} is missing",
                )
            )
        elif error.validator == "additionalProperties":
            for key in _QUOTED.findall(error.message):
                found.append(
                    Violation(
                        ViolationCode.UNKNOWN_KEY,
                        _pointer(base + [key]),
                        f"unknown property {key!r}",
                    )
                )
        elif error.validator == "enum":
            found.append(
                Violation(
                    ViolationCode.BAD_ENUM,
                    _pointer(base),
                    f"{error.instance!r} is not one of 'True'/'False'",
                )
            )
        elif error.validator == "minItems":
            found.append(
                Violation(ViolationCode.EMPTY_AGENTS, _pointer(base), "agents must not be empty")
            )
        else:
            found.append(Violation(ViolationCode.BAD_TYPE, _pointer(base), error.message))
    return found


def _nonempty_violations(doc: dict[str, Any]) -> list[Violation]:
    found: list[Violation] = []
    if not str(doc.get("flow_description", "x")).strip():
        found.append(
            Violation(
                ViolationCode.EMPTY_VALUE, "/flow_description", "flow_description must not be empty"
            )
        )
    for i, agent in enumerate(doc.get("agents", [])):
        if not isinstance(agent, dict):
            continue
        for key in _NONEMPTY_AGENT_KEYS:
            if key in agent and not str(agent[key]).strip():
                found.append(
                    Violation(
                        ViolationCode.EMPTY_VALUE,
                        _pointer(["agents", i, key]),
                        f"{key} must not be empty",
                    )
                )
    return found


def _apply_lenient_aliases(doc: Any) -> Any:
    """Rename the '...?' approval key to the canonical key, in place."""
    if not isinstance(doc, dict) or not isinstance(doc.get("agents"), list):
        return doc
    for agent in doc["agents"]:
        if isinstance(agent, dict) and APPROVAL_KEY_ALIAS in agent and APPROVAL_KEY not in agent:
            agent[APPROVAL_KEY] = agent.pop(APPROVAL_KEY_ALIAS)
    return doc


def _decode_sentinel(value: str) -> str | None:
    return None if value == NONE_SENTINEL else value


def _build_definition(doc: dict[str, Any], source_stem: str) -> WorkflowDefinition:
    agents = tuple(
        AgentSpec(
            head=agent["head"] == "True",
            name_of_agent=agent["name_of_agent"],
            role_of_agent=agent["role_of_agent"],
            what_should_agent_do=agent["what_should_agent_do"],
            require_human_approval=agent[APPROVAL_KEY] == "True",
            postprocessor_function=_decode_sentinel(agent["postprocessor_function"]),
            next=_decode_sentinel(agent["next"]),
        )
        for agent in doc["agents"]
    )
    return WorkflowDefinition(
        flow_description=doc["flow_description"], agents=agents, source_stem=source_stem
    )


def _schema_report(text: str, mode: str) -> tuple[ValidationReport, dict[str, Any] | None]:
    if mode not in (STRICT, LENIENT):
        raise ValueError(f"mode must be {STRICT!r} or {LENIENT!r}, got {mode!r}")
    report = ValidationReport(mode=mode)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        report.violations.append(Violation(ViolationCode.MALFORMED_JSON, "", str(exc)))
        return report, None
    if mode == LENIENT:
        doc = _apply_lenient_aliases(doc)
    report.violations.extend(_schema_violations(doc))
    if not report.violations and isinstance(doc, dict):
        report.violations.extend(_nonempty_violations(doc))
    report.violations.sort(key=lambda v: (v.path, v.code.value, v.message))
    return report, doc if not report.violations else None


def parse_workflow(text: str, *, mode: str = LENIENT, source_stem: str) -> WorkflowDefinition:
    """Parse and schema-validate a workflow document.

    Raises :class:`WorkflowInvalid` (carrying the report) when the document
    fails schema validation. Chain topology is checked separately by
    :func:`validate_chain`; ``source_stem`` names the document for log files
    and must be given explicitly when parsing from a string.
    """
    report, doc = _schema_report(text, mode)
    if doc is None:
        raise WorkflowInvalid(report)
    return _build_definition(doc, source_stem)


def load_workflow(path: str | Path, *, mode: str = LENIENT) -> WorkflowDefinition:
    """Load a workflow file, enforcing both schema and chain validity."""
    path = Path(path)
    definition = parse_workflow(
        path.read_text(encoding="utf-8"), mode=mode, source_stem=path.stem
    )
    chain_report = validate_chain(definition)
    if not chain_report.ok:
        raise WorkflowInvalid(chain_report)
    return definition


def validate_document(text: str, *, mode: str = STRICT) -> ValidationReport:
    """Run schema and chain validation, returning the combined report."""
    report, doc = _schema_report(text, mode)
    if doc is None:
        return report
    chain_report = validate_chain(_build_definition(doc, source_stem=""))
    report.violations.extend(chain_report.violations)
    report.warnings.extend(chain_report.warnings)
    return report


def validate_chain(definition: WorkflowDefinition) -> ValidationReport:
    """Check that head/next pointers form a single simple path over all agents.

    Findings are reported, never raised; an empty report means the chain is a
    valid linear workflow.
    """
    report = ValidationReport(mode="chain")
    agents = definition.agents

    names: dict[str, list[int]] = {}
    for i, agent in enumerate(agents):
        names.setdefault(agent.name_of_agent, []).append(i)
    for name, indices in names.items():
        if len(indices) > 1:
            for i in indices:
                report.violations.append(
                    Violation(
                        ViolationCode.DUPLICATE_NAME,
                        _pointer(["agents", i, "name_of_agent"]),
                        f"agent name {name!r} is used {len(indices)} times",
                    )
                )

    head_indices = [i for i, agent in enumerate(agents) if agent.head]
    if not head_indices:
        report.violations.append(
            Violation(ViolationCode.NO_HEAD, "/agents", "no agent has head set to \"True\"")
        )
    elif len(head_indices) > 1:
        for i in head_indices:
            report.violations.append(
                Violation(
                    ViolationCode.MULTIPLE_HEADS,
                    _pointer(["agents", i, "head"]),
                    f"{len(head_indices)} agents claim to be the head",
                )
            )

    dangling = False
    predecessors: dict[str, list[int]] = {}
    for i, agent in enumerate(agents):
        if agent.next is None:
            continue
        predecessors.setdefault(agent.next, []).append(i)
        if agent.next not in names:
            dangling = True
            report.violations.append(
                Violation(
                    ViolationCode.DANGLING_NEXT,
                    _pointer(["agents", i, "next"]),
                    f"next points at unknown agent {agent.next!r}",
                )
            )
    for target, sources in predecessors.items():
        if len(sources) > 1:
            for i in sources:
                report.violations.append(
                    Violation(
                        ViolationCode.MULTIPLE_PREDECESSORS,
                        _pointer(["agents", i, "next"]),
                        f"agent {target!r} has {len(sources)} predecessors",
                    )
                )

    structure_clean = (
        len(head_indices) == 1
        and not dangling
        and all(len(v) == 1 for v in names.values())
    )
    if structure_clean:
        visited: list[int] = []
        seen: set[int] = set()
        index = head_indices[0]
        while True:
            if index in seen:
                closing = visited[-1]
                report.violations.append(
                    Violation(
                        ViolationCode.CYCLE,
                        _pointer(["agents", closing, "next"]),
                        f"next pointer of {agents[closing].name_of_agent!r} closes a cycle",
                    )
                )
                break
            seen.add(index)
            visited.append(index)
            next_name = agents[index].next
            if next_name is None:
                break
            index = names[next_name][0]
        for i, agent in enumerate(agents):
            if i not in seen:
                report.violations.append(
                    Violation(
                        ViolationCode.UNREACHABLE,
                        _pointer(["agents", i]),
                        f"agent {agent.name_of_agent!r} is never reached from the head",
                    )
                )
        if not report.violations and visited != sorted(visited):
            report.warnings.append(
                Violation(
                    ViolationCode.ORDER_MISMATCH,
                    "/agents",
                    "execution order (next pointers) differs from the array order",
                )
            )

    report.violations.sort(key=lambda v: (v.path, v.code.value, v.message))
    return report


def chain_order(definition: WorkflowDefinition) -> list[AgentSpec]:
    """Return agents in execution order by walking next pointers from the head.

    The pointer order is authoritative; if it differs from the source array
    order an :class:`OrderMismatchWarning` is emitted. Calling this on a
    definition that fails :func:`validate_chain` raises :class:`ChainOrderError`.
    """
    report = validate_chain(definition)
    if not report.ok:
        raise ChainOrderError(
            f"chain_order called on an invalid chain ({len(report.violations)} violations)"
        )
    by_name = {agent.name_of_agent: agent for agent in definition.agents}
    ordered: list[AgentSpec] = []
    current: AgentSpec | None = definition.head
    while current is not None:
        ordered.append(current)
        current = by_name[current.next] if current.next is not None else None
    if [a.name_of_agent for a in ordered] != [a.name_of_agent for a in definition.agents]:
        warnings.warn(
            f"workflow {definition.source_stem!r}: next-pointer order differs from array order",
            OrderMismatchWarning,
            stacklevel=2,
        )
    return ordered


def serialize_workflow(definition: WorkflowDefinition) -> str:
    """Serialize back to canonical document text (string enums, sentinels)."""
    return json.dumps(definition.to_dict(), indent=2, ensure_ascii=False) + "\n"

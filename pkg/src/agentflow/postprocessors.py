"""Registry of named output-transforming functions applied after agent output.

A postprocessor receives the (approved) raw output of an agent and may replace
it, pass it through while performing side effects, or both. Functions are
looked up by the name in the workflow's ``postprocessor_function`` field; the
sentinel ``"None"`` is the identity. A function returning ``None`` keeps the
raw text flowing to the next agent, so side-effect-only functions never sever
the chain.

All process spawning and network probing routes through this module's
``_run_process`` / ``_connect`` seams and is governed by an
:class:`ExecutionPolicy`. Code execution is disabled by default and must be
enabled per run.
"""

from __future__ import annotations

import inspect
import ipaddress
import re
import shutil
import socket
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .errors import (
    CodeExecutionDisabledError,
    CodeExecutionTimeout,
    DuplicatePostprocessorError,
    NoTargetError,
    ProbeDisallowedError,
    UnknownPostprocessorError,
)

NONE_SENTINEL = "None"

PINK = "\x1b[95m"
RESET = "\x1b[0m"

TRIM_LIMIT = 50
TAIL_LIMIT = 20


@dataclass(frozen=True)
class SideEffect:
    kind: str  # stdout | stderr | network | process
    summary: str


@dataclass
class PostprocessResult:
    """What one application produced.

    ``output`` is the replacement text for the chain; ``None`` means the raw
    input passes through unchanged.
    """

    output: str | None
    side_effects: list[SideEffect] = field(default_factory=list)
    duration_s: float = 0.0


@dataclass(frozen=True)
class ExecutionPolicy:
    """Limits applied to postprocessors that spawn processes or touch the network."""

    allow_code_execution: bool = False
    interpreter_cmd: tuple[str, ...] = (sys.executable,)
    timeout_s: float = 30.0
    probe_timeout_s: float = 2.0
    allow_network: bool = True


def _run_process(
    argv: list[str],
    *,
    input_text: str | None,
    timeout_s: float,
    cwd: str | None = None,
) -> subprocess.CompletedProcess[str]:
    """Single seam for every subprocess this module spawns."""
    return subprocess.run(
        argv,
        input=input_text,
        capture_output=True,
        text=True,
        timeout=timeout_s,
        cwd=cwd,
    )


def _connect(host: str, port: int, timeout_s: float) -> None:
    """Single seam for TCP probes; raises OSError on failure."""
    with socket.create_connection((host, port), timeout=timeout_s):
        pass


class Context:
    """Handed to two-argument postprocessors for interleaving and effect records."""

    def __init__(self, registry: "Registry", policy: ExecutionPolicy):
        self._registry = registry
        self.policy = policy
        self.effects: list[SideEffect] = []

    def apply(self, name: str, raw: str) -> str:
        """Invoke another registered function, folding its effects into this call."""
        result = self._registry.apply(name, raw, policy=self.policy)
        self.effects.extend(result.side_effects)
        return raw if result.output is None else result.output

    def record(self, kind: str, summary: str) -> None:
        self.effects.append(SideEffect(kind, summary))


class Registry:
    """Name → transform mapping; frozen once runs start, shareable across runs."""

    def __init__(self) -> None:
        self._functions: dict[str, Callable] = {}

    def register(self, name: str, fn: Callable) -> None:
        if name in self._functions:
            raise DuplicatePostprocessorError(f"postprocessor {name!r} is already registered")
        self._functions[name] = fn

    def register_command(self, name: str, argv: list[str]) -> None:
        """Register an external command under the stdin → stdout contract."""

        def run_command(raw: str, ctx: Context) -> str:
            proc = _run_process(
                list(argv), input_text=raw, timeout_s=ctx.policy.timeout_s
            )
            ctx.record("process", f"ran {argv[0]} (exit {proc.returncode})")
            if proc.returncode != 0:
                raise RuntimeError(
                    f"command {argv[0]!r} exited {proc.returncode}: {proc.stderr.strip()}"
                )
            return proc.stdout

        self.register(name, run_command)

    def names(self) -> list[str]:
        return sorted(self._functions)

    def resolves(self, name: str | None) -> bool:
        return name is None or name == NONE_SENTINEL or name in self._functions

    def apply(
        self, name: str, raw: str, policy: ExecutionPolicy | None = None
    ) -> PostprocessResult:
        """Apply the named function to raw text under the given policy."""
        if name == NONE_SENTINEL:
            return PostprocessResult(output=raw)
        fn = self._functions.get(name)
        if fn is None:
            raise UnknownPostprocessorError(f"unknown postprocessor {name!r}")
        ctx = Context(self, policy or ExecutionPolicy())
        started = time.perf_counter()
        wants_context = len(inspect.signature(fn).parameters) >= 2
        value = fn(raw, ctx) if wants_context else fn(raw)
        duration = time.perf_counter() - started
        if isinstance(value, PostprocessResult):
            value.side_effects = ctx.effects + value.side_effects
            value.duration_s = duration
            return value
        return PostprocessResult(output=value, side_effects=ctx.effects, duration_s=duration)


def trimtoonly50chars(raw: str) -> str:
    return raw[:TRIM_LIMIT]


def last20chars(raw: str) -> str:
    return raw[-TAIL_LIMIT:]


def printinpink(raw: str, ctx: Context) -> str:
    colored = f"{PINK}{raw}{RESET}"
    print(colored)
    ctx.record("stdout", colored)
    return raw


# hostname: dotted labels, at least one dot, or bare "localhost"
_HOSTNAME = re.compile(
    r"^(?=.{1,253}$)[A-Za-z0-9]([A-Za-z0-9-]*[A-Za-z0-9])?"
    r"(\.[A-Za-z0-9]([A-Za-z0-9-]*[A-Za-z0-9])?)+\.?$"
)


def _probe_target(raw: str) -> str | None:
    """First token of raw that looks like an IP address or hostname."""
    for token in raw.split():
        candidate = token.strip("\"'()[],;")
        bare = candidate.rstrip(".")
        if not bare:
            continue
        try:
            ipaddress.ip_address(bare)
            return bare
        except ValueError:
            pass
        if bare.lower() == "localhost" or _HOSTNAME.match(candidate):
            return bare
    return None


def pingserver(raw: str, ctx: Context) -> str:
    """Report whether the first address or hostname in raw answers on the network.

    Tries TCP 443 then 80 (a refused connection still proves the host is up),
    then falls back to the system ping command if neither port answered.
    """
    if not ctx.policy.allow_network:
        raise ProbeDisallowedError("network probes are disabled by policy")
    target = _probe_target(raw)
    if target is None:
        raise NoTargetError(f"no IP address or hostname found in {raw[:80]!r}")
    timeout = ctx.policy.probe_timeout_s
    reachable = False
    for port in (443, 80):
        try:
            _connect(target, port, timeout)
            ctx.record("network", f"tcp connect {target}:{port} ok")
            reachable = True
            break
        except ConnectionRefusedError:
            # port closed but the host answered, so it is up
            ctx.record("network", f"tcp connect {target}:{port} refused")
            reachable = True
            break
        except OSError as exc:
            ctx.record("network", f"tcp connect {target}:{port} failed ({exc})")
    if not reachable and shutil.which("ping"):
        proc = _run_process(
            ["ping", "-c", "1", "-W", str(max(1, int(timeout))), target],
            input_text=None,
            timeout_s=timeout + 2,
        )
        ctx.record("process", f"ping {target} (exit {proc.returncode})")
        reachable = proc.returncode == 0
    status = "is reachable" if reachable else "is unreachable"
    line = f"{target} {status}"
    print(line)
    ctx.record("stdout", line)
    return line


def execute_code(raw: str, ctx: Context) -> str:
    """Run raw as a script with the configured interpreter, in a scratch directory.

    Disabled unless the policy explicitly allows code execution; the policy
    gate precedes any filesystem or process activity.
    """
    if not ctx.policy.allow_code_execution:
        raise CodeExecutionDisabledError(
            "code execution is disabled; enable it explicitly to run generated code"
        )
    with tempfile.TemporaryDirectory(prefix="agentflow-exec-") as workdir:
        script = Path(workdir) / "snippet.py"
        script.write_text(raw, encoding="utf-8")
        argv = list(ctx.policy.interpreter_cmd) + [str(script)]
        try:
            proc = _run_process(
                argv, input_text=None, timeout_s=ctx.policy.timeout_s, cwd=workdir
            )
        except subprocess.TimeoutExpired as exc:
            ctx.record("process", f"{argv[0]} killed after {ctx.policy.timeout_s}s")
            raise CodeExecutionTimeout(
                f"script exceeded {ctx.policy.timeout_s}s and was killed"
            ) from exc
    ctx.record("process", f"{argv[0]} exited {proc.returncode}")
    if proc.stdout:
        ctx.record("stdout", proc.stdout)
    if proc.stderr:
        ctx.record("stderr", proc.stderr)
    return (
        f"exit code: {proc.returncode}\n"
        f"stdout:\n{proc.stdout}"
        f"stderr:\n{proc.stderr}"
    )


def default_registry() -> Registry:
    """Registry with the built-ins, under the names workflows use."""
    registry = Registry()
    registry.register("trimtoonly50chars", trimtoonly50chars)
    registry.register("last20chars", last20chars)
    registry.register("printinpink", printinpink)
    registry.register("pingserver", pingserver)
    registry.register("execute_python_code", execute_code)
    return registry

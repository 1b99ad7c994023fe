"""Engine configuration file: providers, execution policy, external postprocessors.

The config is a JSON object, all keys optional:

    {
      "default_provider": "openai",
      "custom_endpoints": {
        "local": {"url": "http://127.0.0.1:8080/v1/chat/completions",
                   "credential_var": "LOCAL_API_KEY"}
      },
      "execution": {
        "allow_code_execution": false,
        "interpreter_cmd": ["python3"],
        "timeout_s": 30,
        "probe_timeout_s": 2,
        "allow_network": true
      },
      "external_postprocessors": {"rot13": ["tr", "A-Za-z", "N-ZA-Mn-za-m"]}
    }

External postprocessors are commands under the stdin → stdout contract: raw
text in, replacement text out, nonzero exit reported as an error.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .postprocessors import ExecutionPolicy, Registry, default_registry


@dataclass
class EngineConfig:
    default_provider: str = "openai"
    custom_endpoints: dict[str, dict[str, str]] = field(default_factory=dict)
    policy: ExecutionPolicy = field(default_factory=ExecutionPolicy)
    external_postprocessors: dict[str, list[str]] = field(default_factory=dict)


def _parse_policy(data: dict[str, Any], *, allow_code_execution: bool | None = None) -> ExecutionPolicy:
    base = ExecutionPolicy()
    enabled = data.get("allow_code_execution", base.allow_code_execution)
    if allow_code_execution is not None:
        enabled = allow_code_execution
    return ExecutionPolicy(
        allow_code_execution=bool(enabled),
        interpreter_cmd=tuple(data.get("interpreter_cmd") or (sys.executable,)),
        timeout_s=float(data.get("timeout_s", base.timeout_s)),
        probe_timeout_s=float(data.get("probe_timeout_s", base.probe_timeout_s)),
        allow_network=bool(data.get("allow_network", base.allow_network)),
    )


def load_config(path: str | Path | None) -> EngineConfig:
    """Read the config file; a missing path gives defaults."""
    if path is None:
        return EngineConfig()
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError(f"config {path} must be a JSON object")
    return EngineConfig(
        default_provider=data.get("default_provider", "openai"),
        custom_endpoints=data.get("custom_endpoints", {}),
        policy=_parse_policy(data.get("execution", {})),
        external_postprocessors={
            name: list(argv) for name, argv in data.get("external_postprocessors", {}).items()
        },
    )


def build_registry(config: EngineConfig) -> Registry:
    """Built-ins plus any configured external command postprocessors."""
    registry = default_registry()
    for name, argv in config.external_postprocessors.items():
        registry.register_command(name, argv)
    return registry

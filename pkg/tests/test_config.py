"""Config file loading and registry assembly."""

from __future__ import annotations

import json
import sys

import pytest

from agentflow.config import EngineConfig, build_registry, load_config
from agentflow.postprocessors import ExecutionPolicy


def test_none_path_gives_defaults():
    config = load_config(None)
    assert config == EngineConfig()
    assert config.policy.allow_code_execution is False


def test_full_file_round_trip(tmp_path):
    path = tmp_path / "engine.json"
    path.write_text(
        json.dumps(
            {
                "default_provider": "groq",
                "custom_endpoints": {
                    "local": {"url": "http://127.0.0.1:9/v1/chat/completions"}
                },
                "execution": {
                    "allow_code_execution": True,
                    "timeout_s": 5,
                    "allow_network": False,
                },
                "external_postprocessors": {"shout": [sys.executable, "-c", "pass"]},
            }
        ),
        encoding="utf-8",
    )
    config = load_config(path)
    assert config.default_provider == "groq"
    assert "local" in config.custom_endpoints
    assert config.policy.allow_code_execution is True
    assert config.policy.timeout_s == 5
    assert config.policy.allow_network is False
    assert config.external_postprocessors["shout"][0] == sys.executable


def test_non_object_config_rejected(tmp_path):
    path = tmp_path / "engine.json"
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ValueError):
        load_config(path)


def test_build_registry_includes_builtins_and_externals(tmp_path):
    config = EngineConfig(
        external_postprocessors={
            "shout": [sys.executable, "-c", "import sys; print(sys.stdin.read().upper(), end='')"]
        }
    )
    registry = build_registry(config)
    assert "pingserver" in registry.names()
    assert "shout" in registry.names()
    result = registry.apply("shout", "quiet words", policy=ExecutionPolicy())
    assert result.output == "QUIET WORDS"

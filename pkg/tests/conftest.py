"""Shared fixtures: bundled workflow corpus, random workflow generator, mutations."""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from agentflow.model import APPROVAL_KEY

CORPUS_DIR = Path(__file__).parent.parent / "src" / "agentflow" / "workflows"

CORPUS_STEMS = [
    "Customer-Care-Sentiment-Analysis",
    "Dynamic-Input-Example-Apple",
    "5G-RAN-data",
    "Ecommerce",
    "foodtruck-website",
    "XML-formatter",
    "Simple-Quantum-Circuit-Creator-And-Executor",
    "PingServer",
    "Realtime-Action-Beeper",
]

# the two corpus documents carrying the "...?" alias key
ALIAS_KEY_STEMS = {"Customer-Care-Sentiment-Analysis", "foodtruck-website"}

# postprocessors safe for bulk random runs (no network, no subprocess)
SAFE_POSTPROCESSORS = ["None", "trimtoonly50chars", "last20chars"]


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS_DIR


def corpus_text(stem: str) -> str:
    return (CORPUS_DIR / f"{stem}.json").read_text(encoding="utf-8")


def make_workflow_doc(rng: random.Random, n_agents: int | None = None) -> dict:
    """Random valid workflow document; array order may differ from chain order."""
    if n_agents is None:
        n_agents = rng.randint(1, 10)
    names = [f"Agent{i}-{rng.randrange(10**6)}" for i in range(n_agents)]
    agents = []
    for i, name in enumerate(names):
        agents.append(
            {
                "head": "True" if i == 0 else "False",
                "name_of_agent": name,
                "role_of_agent": f"role {i}",
                "what_should_agent_do": f"task {i}",
                APPROVAL_KEY: "False",
                "postprocessor_function": rng.choice(SAFE_POSTPROCESSORS),
                "next": names[i + 1] if i + 1 < n_agents else "None",
            }
        )
    shuffled = agents[:]
    rng.shuffle(shuffled)
    return {
        "flow_description": f"generated workflow with {n_agents} agents",
        "agents": shuffled,
    }


def chain_names(doc: dict) -> list[str]:
    """Oracle: follow next pointers from the head by hand."""
    by_name = {a["name_of_agent"]: a for a in doc["agents"]}
    current = next(a for a in doc["agents"] if a["head"] == "True")
    ordered = [current["name_of_agent"]]
    while current["next"] != "None":
        current = by_name[current["next"]]
        ordered.append(current["name_of_agent"])
    return ordered


MUTATION_KINDS = (
    "drop_required",
    "bad_enum",
    "dangling_next",
    "duplicate_name",
    "second_head",
)


def mutate_doc(doc: dict, kind: str, rng: random.Random) -> tuple[dict, str]:
    """Apply one schema- or chain-breaking mutation; returns (doc, mutated JSON pointer).

    The pointer is where a validator should place (or include) a violation.
    """
    doc = json.loads(json.dumps(doc))
    agents = doc["agents"]
    i = rng.randrange(len(agents))
    if kind == "drop_required":
        key = rng.choice(list(agents[i].keys()))
        del agents[i][key]
        # dropping the alias key surfaces as the canonical key going missing
        return doc, f"/agents/{i}/{key.removesuffix('?')}"
    if kind == "bad_enum":
        key = rng.choice(["head", APPROVAL_KEY])
        if key not in agents[i]:  # alias form in corpus docs
            key = APPROVAL_KEY + "?"
        agents[i][key] = "true"
        return doc, f"/agents/{i}/{key}".replace("?", "")
    if kind == "dangling_next":
        agents[i]["next"] = "NoSuchAgentAnywhere"
        return doc, f"/agents/{i}/next"
    if kind == "duplicate_name":
        if len(agents) == 1:
            agents.append(json.loads(json.dumps(agents[0])))
            agents[1]["head"] = "False"
            i = 1
        j = rng.choice([k for k in range(len(agents)) if k != i])
        agents[i]["name_of_agent"] = agents[j]["name_of_agent"]
        return doc, f"/agents/{i}/name_of_agent"
    if kind == "second_head":
        non_heads = [k for k in range(len(agents)) if agents[k]["head"] != "True"]
        if not non_heads:
            agents.append(
                {
                    "head": "True",
                    "name_of_agent": "ExtraHead",
                    "role_of_agent": "extra",
                    "what_should_agent_do": "extra",
                    APPROVAL_KEY: "False",
                    "postprocessor_function": "None",
                    "next": "None",
                }
            )
            return doc, f"/agents/{len(agents) - 1}/head"
        i = rng.choice(non_heads)
        agents[i]["head"] = "True"
        return doc, f"/agents/{i}/head"
    raise ValueError(kind)

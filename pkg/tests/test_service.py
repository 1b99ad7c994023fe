"""HTTP service: validation endpoint, run lifecycle, approvals, events, auth."""

from __future__ import annotations

import json
import time

import pytest
from fastapi.testclient import TestClient

from agentflow.config import EngineConfig
from agentflow.service import create_app

from conftest import CORPUS_DIR, corpus_text

TWO_AGENT_DOC = {
    "flow_description": "Give the workflow some name",
    "agents": [
        {
            "head": "True",
            "name_of_agent": "Agent1",
            "role_of_agent": "You are a helpful assistant",
            "what_should_agent_do": "Say hello",
            "require_human_approval_of_response": "False",
            "postprocessor_function": "None",
            "next": "Agent2",
        },
        {
            "head": "False",
            "name_of_agent": "Agent2",
            "role_of_agent": "You are a helpful assistant",
            "what_should_agent_do": "Say goodbye",
            "require_human_approval_of_response": "False",
            "postprocessor_function": "None",
            "next": "None",
        },
    ],
}


def gated_doc():
    doc = json.loads(json.dumps(TWO_AGENT_DOC))
    doc["agents"][0]["require_human_approval_of_response"] = "True"
    return doc


@pytest.fixture()
def client(tmp_path):
    app = create_app(
        workflows_dir=CORPUS_DIR,
        interactions_dir=tmp_path / "Interactions",
        config=EngineConfig(),
        poll_timeout_s=0.2,
    )
    with TestClient(app) as test_client:
        yield test_client


def wait_terminal(client, run_id, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        handle = client.get(f"/runs/{run_id}").json()
        if handle["terminal"]:
            return handle
        time.sleep(0.02)
    raise AssertionError(f"run {run_id} did not finish")


def wait_pending(client, run_id, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        body = client.get(f"/runs/{run_id}/approvals/pending").json()
        if body["pending"] is not None:
            return body["pending"]
        time.sleep(0.02)
    raise AssertionError("no pending approval appeared")


class TestValidateEndpoint:
    def test_two_agent_example_strict_ok(self, client):
        response = client.post("/workflows/validate", json=TWO_AGENT_DOC)
        assert response.status_code == 200
        assert response.json()["violations"] == []

    def test_empty_agents_gives_422_with_min_items(self, client):
        response = client.post(
            "/workflows/validate", json={"flow_description": "x", "agents": []}
        )
        assert response.status_code == 422
        assert response.json()["violations"][0]["code"] == "EMPTY_AGENTS"

    def test_foodtruck_strict_422_lenient_200(self, client):
        text = corpus_text("foodtruck-website")
        strict = client.post("/workflows/validate", content=text)
        assert strict.status_code == 422
        paths = [v["path"] for v in strict.json()["violations"]]
        assert any("require_human_approval_of_response?" in p for p in paths)
        lenient = client.post("/workflows/validate?mode=lenient", content=text)
        assert lenient.status_code == 200

    def test_malformed_json_400(self, client):
        response = client.post("/workflows/validate", content="{nope")
        assert response.status_code == 400

    def test_oversize_413(self, client):
        big = '{"flow_description": "' + "x" * 1_000_001 + '"}'
        response = client.post("/workflows/validate", content=big)
        assert response.status_code == 413

    def test_unknown_mode_400(self, client):
        response = client.post("/workflows/validate?mode=fuzzy", json=TWO_AGENT_DOC)
        assert response.status_code == 400


class TestWorkflowListing:
    def test_lists_corpus(self, client):
        body = client.get("/workflows").json()
        stems = {w["stem"] for w in body["workflows"]}
        assert "foodtruck-website" in stems
        assert "PingServer" in stems
        foodtruck = next(w for w in body["workflows"] if w["stem"] == "foodtruck-website")
        assert foodtruck["agents"] == 4


class TestRunLifecycle:
    def test_happy_path_completes(self, client):
        response = client.post(
            "/runs",
            json={
                "workflow": TWO_AGENT_DOC,
                "config": {"model": "mock/script"},
                "mock_script": ["A", "B"],
            },
        )
        assert response.status_code == 201
        handle = response.json()
        run_id = handle["run_id"]
        assert handle["workflow_stem"] == "adhoc"
        final = wait_terminal(client, run_id)
        assert final["state"]["phase"] == "Completed"
        assert final["final_output"] == "B"
        assert final["error"] is None

    def test_stored_stem_run(self, client):
        response = client.post(
            "/runs",
            json={
                "workflow": "Dynamic-Input-Example-Apple",
                "config": {"model": "mock/script", "dynamic_input": "text to format"},
                "mock_script": ["formatted"],
            },
        )
        assert response.status_code == 201
        handle = wait_terminal(client, response.json()["run_id"])
        assert handle["workflow_stem"] == "Dynamic-Input-Example-Apple"
        assert handle["final_output"] == "formatted"

    def test_unknown_stored_stem_404(self, client):
        response = client.post("/runs", json={"workflow": "NoSuchFlow"})
        assert response.status_code == 404

    def test_invalid_workflow_422(self, client):
        doc = json.loads(json.dumps(TWO_AGENT_DOC))
        doc["agents"][0]["next"] = "Ghost"
        response = client.post("/runs", json={"workflow": doc})
        assert response.status_code == 422
        assert any(v["code"] == "DANGLING_NEXT" for v in response.json()["violations"])

    def test_bad_config_400(self, client):
        response = client.post(
            "/runs",
            json={"workflow": TWO_AGENT_DOC, "config": {"model": "mock/x", "creativity": 3.5}},
        )
        assert response.status_code == 400

    def test_unknown_postprocessor_409_before_llm(self, client):
        doc = json.loads(json.dumps(TWO_AGENT_DOC))
        doc["agents"][0]["postprocessor_function"] = "nope"
        response = client.post(
            "/runs", json={"workflow": doc, "mock_script": ["a", "b"]}
        )
        assert response.status_code == 409

    def test_unknown_run_404(self, client):
        assert client.get("/runs/doesnotexist").status_code == 404
        assert client.get("/runs/doesnotexist/events").status_code == 404
        assert client.get("/runs/doesnotexist/approvals/pending").status_code == 404
        assert (
            client.post("/runs/doesnotexist/approvals", json={"action": "approve"}).status_code
            == 404
        )


class TestEvents:
    def start(self, client, doc=None, script=("A", "B")):
        response = client.post(
            "/runs",
            json={
                "workflow": doc or TWO_AGENT_DOC,
                "config": {"model": "mock/script"},
                "mock_script": list(script),
            },
        )
        assert response.status_code == 201
        return response.json()["run_id"]

    def test_full_event_list_ends_with_run_end(self, client):
        run_id = self.start(client)
        wait_terminal(client, run_id)
        body = client.get(f"/runs/{run_id}/events?after=0").json()
        kinds = [e["kind"] for e in body["events"]]
        assert kinds[-1] == "run_end" or "run_end" in kinds  # state_change may trail
        interaction_kinds = [k for k in kinds if k not in ("state_change", "step_output")]
        assert interaction_kinds[0] == "run_start"
        assert interaction_kinds[-1] == "run_end"
        assert interaction_kinds.count("llm_call") == 2
        assert body["terminal"] is True

    def test_seqs_contiguous_from_one(self, client):
        run_id = self.start(client)
        wait_terminal(client, run_id)
        events = client.get(f"/runs/{run_id}/events?after=0").json()["events"]
        assert [e["seq"] for e in events] == list(range(1, len(events) + 1))

    def test_after_cursor_and_timeout(self, client):
        run_id = self.start(client)
        wait_terminal(client, run_id)
        events = client.get(f"/runs/{run_id}/events?after=0").json()["events"]
        last = events[-1]["seq"]
        again = client.get(f"/runs/{run_id}/events?after={last}").json()
        assert again["events"] == []
        assert again["terminal"] is True

    def test_mirrors_every_interaction_record(self, client, tmp_path):
        run_id = self.start(client)
        wait_terminal(client, run_id)
        events = client.get(f"/runs/{run_id}/events?after=0").json()["events"]
        mirrored = [e for e in events if e["kind"] not in ("state_change", "step_output")]
        seqs = [e["payload"]["seq"] for e in mirrored]
        assert seqs == sorted(seqs)
        assert {e["payload"]["run_id"] for e in mirrored} == {run_id}


class TestApprovals:
    def start_gated(self, client, script=("draft1", "draft2", "draft3", "final")):
        response = client.post(
            "/runs",
            json={
                "workflow": gated_doc(),
                "config": {"model": "mock/script"},
                "mock_script": list(script),
            },
        )
        assert response.status_code == 201
        return response.json()["run_id"]

    def test_approve_resumes(self, client):
        run_id = self.start_gated(client, script=("draft", "final"))
        pending = wait_pending(client, run_id)
        assert pending["agent_name"] == "Agent1"
        assert pending["attempt"] == 1
        assert pending["raw_output"] == "draft"
        response = client.post(f"/runs/{run_id}/approvals", json={"action": "approve"})
        assert response.status_code == 204
        handle = wait_terminal(client, run_id)
        assert handle["final_output"] == "final"

    def test_reject_increments_attempt(self, client):
        run_id = self.start_gated(client)
        pending = wait_pending(client, run_id)
        assert pending["attempt"] == 1
        assert (
            client.post(f"/runs/{run_id}/approvals", json={"action": "reject"}).status_code == 204
        )
        deadline = time.monotonic() + 10
        while time.monotonic() < deadline:
            nxt = client.get(f"/runs/{run_id}/approvals/pending").json()["pending"]
            if nxt is not None and nxt["attempt"] == 2:
                break
            time.sleep(0.02)
        else:
            raise AssertionError("attempt 2 never appeared")
        assert nxt["agent_name"] == "Agent1"
        client.post(f"/runs/{run_id}/approvals", json={"action": "approve"})
        wait_terminal(client, run_id)

    def test_edit_feeds_next_prompt(self, client):
        run_id = self.start_gated(client, script=("draft", "final"))
        wait_pending(client, run_id)
        response = client.post(
            f"/runs/{run_id}/approvals", json={"action": "edit", "edited_output": "FIXED"}
        )
        assert response.status_code == 204
        wait_terminal(client, run_id)
        events = client.get(f"/runs/{run_id}/events?after=0").json()["events"]
        second_call = [
            e
            for e in events
            if e["kind"] == "llm_call" and e["payload"]["agent_name"] == "Agent2"
        ][0]
        assert "FIXED" in second_call["payload"]["input"]

    def test_idempotent_replay_is_noop_204(self, client):
        run_id = self.start_gated(client, script=("draft", "final"))
        pending = wait_pending(client, run_id)
        decision = {
            "action": "approve",
            "agent_name": pending["agent_name"],
            "attempt": pending["attempt"],
        }
        assert client.post(f"/runs/{run_id}/approvals", json=decision).status_code == 204
        wait_terminal(client, run_id)
        events_before = client.get(f"/runs/{run_id}/events?after=0").json()["events"]
        # replaying the exact same decision after it was applied: no-op 204
        assert client.post(f"/runs/{run_id}/approvals", json=decision).status_code == 204
        events_after = client.get(f"/runs/{run_id}/events?after=0").json()["events"]
        assert len(events_after) == len(events_before)  # no duplicate transitions

    def test_conflicting_replay_409(self, client):
        run_id = self.start_gated(client, script=("draft", "final"))
        pending = wait_pending(client, run_id)
        decision = {
            "action": "approve",
            "agent_name": pending["agent_name"],
            "attempt": pending["attempt"],
        }
        client.post(f"/runs/{run_id}/approvals", json=decision)
        wait_terminal(client, run_id)
        conflicting = dict(decision, action="reject")
        assert client.post(f"/runs/{run_id}/approvals", json=conflicting).status_code == 409

    def test_post_without_pending_409(self, client):
        response = client.post(
            "/runs",
            json={
                "workflow": TWO_AGENT_DOC,
                "config": {"model": "mock/script"},
                "mock_script": ["A", "B"],
            },
        )
        run_id = response.json()["run_id"]
        wait_terminal(client, run_id)
        reply = client.post(f"/runs/{run_id}/approvals", json={"action": "approve"})
        assert reply.status_code == 409

    def test_agent_mismatch_409(self, client):
        run_id = self.start_gated(client, script=("draft", "final"))
        wait_pending(client, run_id)
        reply = client.post(
            f"/runs/{run_id}/approvals", json={"action": "approve", "agent_name": "WrongAgent"}
        )
        assert reply.status_code == 409
        client.post(f"/runs/{run_id}/approvals", json={"action": "approve"})
        wait_terminal(client, run_id)

    def test_invalid_decision_400(self, client):
        run_id = self.start_gated(client, script=("draft", "final"))
        wait_pending(client, run_id)
        assert (
            client.post(f"/runs/{run_id}/approvals", json={"action": "edit"}).status_code == 400
        )
        client.post(f"/runs/{run_id}/approvals", json={"action": "approve"})
        wait_terminal(client, run_id)


class TestCodeExecutionGate:
    def test_execute_disabled_without_flag(self, client):
        doc = json.loads(json.dumps(TWO_AGENT_DOC))
        doc["agents"] = doc["agents"][:1]
        doc["agents"][0]["next"] = "None"
        doc["agents"][0]["postprocessor_function"] = "execute_python_code"
        response = client.post(
            "/runs", json={"workflow": doc, "mock_script": ["print('hi')"]}
        )
        run_id = response.json()["run_id"]
        handle = wait_terminal(client, run_id)
        assert handle["state"]["phase"] == "Failed"
        assert "disabled" in handle["error"]

    def test_execute_allowed_with_flag(self, client):
        doc = json.loads(json.dumps(TWO_AGENT_DOC))
        doc["agents"] = doc["agents"][:1]
        doc["agents"][0]["next"] = "None"
        doc["agents"][0]["postprocessor_function"] = "execute_python_code"
        response = client.post(
            "/runs",
            json={
                "workflow": doc,
                "mock_script": ["print('hi from generated code')"],
                "unsafe_allow_code_execution": True,
            },
        )
        handle = wait_terminal(client, response.json()["run_id"])
        assert handle["state"]["phase"] == "Completed"
        assert "hi from generated code" in handle["final_output"]


class TestAuth:
    def test_token_required_when_configured(self, tmp_path):
        app = create_app(
            workflows_dir=CORPUS_DIR,
            interactions_dir=tmp_path,
            poll_timeout_s=0.2,
            token="sekrit",
        )
        with TestClient(app) as client:
            assert client.get("/workflows").status_code == 401
            ok = client.get("/workflows", headers={"authorization": "Bearer sekrit"})
            assert ok.status_code == 200
            bad = client.get("/workflows", headers={"authorization": "Bearer wrong"})
            assert bad.status_code == 401

    def test_no_token_no_auth(self, client):
        assert client.get("/workflows").status_code == 200

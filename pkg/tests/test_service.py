import json
import time

import pytest
from fastapi.testclient import TestClient

from vista.service.app import create_app

SMALL_CONFIG = {
    "run": {"videos_per_prompt": 2, "max_workers": 1},
    "planner": {"num_planned_prompts": 1, "num_variants": 1},
    "optimizer": {"num_sampled_prompts": 1, "num_variants": 1},
}


@pytest.fixture
def client():
    return TestClient(create_app())


def _run_body(tmp_path, name="run", **overrides):
    body = {
        "prompt_text": "a dog chasing a ball",
        "duration_seconds": 8,
        "backend": "mock",
        "seed": 3,
        "iterations": 1,
        "out_dir": str(tmp_path / name),
        "config": SMALL_CONFIG,
        "wait": True,
    }
    body.update(overrides)
    return body


class TestHealth:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"


class TestRuns:
    def test_run_to_completion(self, client, tmp_path):
        response = client.post("/runs", json=_run_body(tmp_path))
        assert response.status_code == 200, response.text
        info = response.json()
        assert info["status"] == "completed"
        assert info["iterations_completed"] == 2
        assert info["champion"]["prompt"]["text"]
        assert info["champion_video_path"].endswith(".bin")
        assert (tmp_path / "run" / "manifest.json").exists()
        assert (tmp_path / "run" / "trajectory.jsonl").exists()
        assert (tmp_path / "run" / "transcript.jsonl").exists()

    def test_poll_after_background_run(self, client, tmp_path):
        response = client.post("/runs", json=_run_body(tmp_path, name="bg", wait=False))
        assert response.status_code == 200
        run_id = response.json()["run_id"]
        assert response.json()["status"] == "running"
        for _ in range(100):
            info = client.get(f"/runs/{run_id}").json()
            if info["status"] in ("completed", "failed", "stopped-early"):
                break
            time.sleep(0.05)
        assert info["status"] == "completed"

    def test_unknown_run_id(self, client):
        assert client.get("/runs/nope").status_code == 404

    def test_iteration_view(self, client, tmp_path):
        run_id = client.post("/runs", json=_run_body(tmp_path)).json()["run_id"]
        view = client.get(f"/runs/{run_id}/iterations/1")
        assert view.status_code == 200
        payload = view.json()
        assert payload["phase"] == "improve"
        assert payload["meta_scores"]
        assert payload["costs"]["model_calls"] > 0
        init = client.get(f"/runs/{run_id}/iterations/0").json()
        assert init["phase"] == "init"
        assert init["meta_scores"] == {}
        assert init["modification_actions"] == []

    def test_iteration_out_of_range(self, client, tmp_path):
        run_id = client.post("/runs", json=_run_body(tmp_path)).json()["run_id"]
        assert client.get(f"/runs/{run_id}/iterations/9").status_code == 404

    def test_iteration_costs_match_account(self, client, tmp_path):
        from vista.orchestrator import account_costs, load_trajectory
        from vista.store import RunStore

        run_id = client.post("/runs", json=_run_body(tmp_path)).json()["run_id"]
        view = client.get(f"/runs/{run_id}/iterations/0").json()
        trajectory = load_trajectory(RunStore(tmp_path / "run"))
        report = account_costs(trajectory)
        assert view["costs"]["tokens_in"] == report.per_iteration[0]["tokens_in"]

    def test_bad_config_is_400(self, client, tmp_path):
        body = _run_body(tmp_path, name="bad", config={"selector": {"lambda_typo": 1}})
        response = client.post("/runs", json=body)
        assert response.status_code == 400
        assert "lambda_typo" in response.json()["detail"]

    def test_occupied_out_dir_is_400(self, client, tmp_path):
        assert client.post("/runs", json=_run_body(tmp_path)).status_code == 200
        response = client.post("/runs", json=_run_body(tmp_path))
        assert response.status_code == 400

    def test_resume_completed_is_409(self, client, tmp_path):
        client.post("/runs", json=_run_body(tmp_path))
        response = client.post(
            "/runs/resume", json={"run_dir": str(tmp_path / "run"), "wait": True}
        )
        assert response.status_code == 409

    def test_open_registers_existing_dir(self, client, tmp_path):
        run_id = client.post("/runs", json=_run_body(tmp_path)).json()["run_id"]
        fresh = TestClient(create_app())
        opened = fresh.post("/runs/open", json={"run_dir": str(tmp_path / "run")})
        assert opened.status_code == 200
        assert opened.json()["run_id"] == run_id
        assert fresh.get(f"/runs/{run_id}").status_code == 200


class TestEval:
    def _make_corpus(self, tmp_path, n=3):
        prompts = tmp_path / "prompts.txt"
        prompts.write_text("\n".join(f"prompt {i}" for i in range(n)))
        side_a = tmp_path / "a"
        side_b = tmp_path / "b"
        side_a.mkdir()
        side_b.mkdir()
        for i in range(n):
            (side_a / f"{i}.bin").write_bytes(f"video a {i}".encode())
            (side_b / f"{i}.bin").write_bytes(f"video b {i}".encode())
        return prompts, side_a, side_b

    def test_identical_sides_tie(self, client, tmp_path):
        prompts, side_a, _ = self._make_corpus(tmp_path)
        response = client.post(
            "/eval",
            json={
                "prompt_file": str(prompts),
                "side_a": str(side_a),
                "side_b": str(side_a),
                "backend": "mock",
            },
        )
        assert response.status_code == 200
        summary = response.json()
        assert summary["delta"] == 0.0
        assert summary["tie"] == 100.0

    def test_results_file_written(self, client, tmp_path):
        prompts, side_a, side_b = self._make_corpus(tmp_path)
        out = tmp_path / "results.jsonl"
        response = client.post(
            "/eval",
            json={
                "prompt_file": str(prompts),
                "side_a": str(side_a),
                "side_b": str(side_b),
                "results_out": str(out),
            },
        )
        assert response.status_code == 200
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(rows) == 3
        assert {"index", "prompt", "overall", "outcomes"} <= set(rows[0])
        wins = sum(r["overall"] == "Win" for r in rows)
        losses = sum(r["overall"] == "Loss" for r in rows)
        summary = response.json()
        assert summary["delta"] == pytest.approx((wins - losses) / 3 * 100)

    def test_mismatched_corpus_is_400(self, client, tmp_path):
        prompts, side_a, side_b = self._make_corpus(tmp_path)
        (side_b / "extra.bin").write_bytes(b"extra")
        response = client.post(
            "/eval",
            json={
                "prompt_file": str(prompts),
                "side_a": str(side_a),
                "side_b": str(side_b),
            },
        )
        assert response.status_code == 400
        assert "corpus" in response.json()["detail"].lower()

    def test_run_dirs_as_sides(self, client, tmp_path):
        client.post("/runs", json=_run_body(tmp_path, name="ra", seed=1))
        client.post("/runs", json=_run_body(tmp_path, name="rb", seed=2))
        prompts = tmp_path / "p.txt"
        prompts.write_text("a dog chasing a ball\n")
        response = client.post(
            "/eval",
            json={
                "prompt_file": str(prompts),
                "side_a": str(tmp_path / "ra"),
                "side_b": str(tmp_path / "rb"),
            },
        )
        assert response.status_code == 200
        assert response.json()["matches"] == 1


class TestTranscriptInfo:
    def test_info_and_tamper(self, client, tmp_path):
        client.post("/runs", json=_run_body(tmp_path))
        path = tmp_path / "run" / "transcript.jsonl"
        response = client.get("/transcripts/info", params={"path": str(path)})
        assert response.status_code == 200
        info = response.json()
        assert info["valid"] and info["records"] > 0
        assert "planner" in info["templates"]

        lines = path.read_text().splitlines()
        body = json.loads(lines[0])
        body["response_text"] = "tampered"
        lines[0] = json.dumps(body)
        path.write_text("\n".join(lines) + "\n")
        tampered = client.get("/transcripts/info", params={"path": str(path)}).json()
        assert not tampered["valid"]


class TestBackgroundFailure:
    def test_poll_sees_failed_run(self, client, tmp_path):
        body = _run_body(tmp_path, name="doomed", wait=False)
        body["prompt_text"] = "[reject] a dog"  # every generation is refused
        response = client.post("/runs", json=body)
        assert response.status_code == 200
        run_id = response.json()["run_id"]
        for _ in range(100):
            info = client.get(f"/runs/{run_id}").json()
            if info["status"] in ("completed", "failed"):
                break
            time.sleep(0.05)
        assert info["status"] == "failed"


class TestPromptValidation:
    def test_whitespace_prompt_is_400(self, client, tmp_path):
        body = _run_body(tmp_path, name="blank")
        body["prompt_text"] = "   "
        response = client.post("/runs", json=body)
        assert response.status_code == 400
        assert "non-empty" in response.json()["detail"]

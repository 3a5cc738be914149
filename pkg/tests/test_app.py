import json
import os

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from hexmem import taskdb
from hexmem.app.cli import main as cli_main
from hexmem.app.config import AppConfig, load_config, parse_config_text
from hexmem.app.service import SessionService, create_app
from hexmem.rl.policy import init_params
from hexmem.rl.ppo import PPOConfig
from hexmem.rl.rewards import RewardSpec
from hexmem.rl.train import fine_tune_from_logs
from hexmem.sessionlog import read_session_log


class TestConfig:
    def test_parse_and_env_override(self, tmp_path, monkeypatch):
        path = tmp_path / "hexmem.conf"
        path.write_text(
            "# service settings\n"
            "ddb_path = /data/tasks.ddb\n"
            "bind_port = 9000\n"
            "weights = 0.5,0.25,0.25\n"
        )
        monkeypatch.setenv("HEXMEM_BIND_PORT", "9100")
        monkeypatch.setenv("HEXMEM_DEFAULT_METHOD", "rl")
        cfg = load_config(str(path))
        assert cfg.ddb_path == "/data/tasks.ddb"
        assert cfg.bind_port == 9100  # env wins
        assert cfg.default_method == "rl"
        assert cfg.weights == (0.5, 0.25, 0.25)

    def test_defaults_without_file(self):
        cfg = load_config(env={})
        assert cfg == AppConfig()

    def test_bad_lines_rejected(self):
        with pytest.raises(ValueError, match="key"):
            parse_config_text("no_such_key = 3")
        with pytest.raises(ValueError, match="expected"):
            parse_config_text("just some words")


@pytest.fixture
def service(grid, table, weights, small_db, tmp_path):
    return SessionService(grid, table, weights, small_db, str(tmp_path / "data"),
                          policy=init_params(seed=0), reward_spec=RewardSpec("r1"),
                          session_seed=1234)


@pytest.fixture
def client(service):
    return TestClient(create_app(service), raise_server_exceptions=False)


def play_trial(client, session_id, trial_payload, hit_all=True):
    targets = trial_payload["targets"]
    if hit_all:
        clicks = list(targets)
    else:
        clicks = list(targets[:-1]) + [next(c for c in range(36) if c not in targets)]
    resp = client.post(f"/sessions/{session_id}/recall", json={"clicks": clicks})
    assert resp.status_code == 200, resp.text
    return resp.json()


class TestSessionAPI:
    def test_healthz(self, client):
        resp = client.get("/healthz")
        assert resp.status_code == 200
        assert resp.json()["status"] == "ok"

    def test_create_session_payload(self, client, small_db):
        resp = client.post("/sessions", json={"method": "rule2"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["method"] == "rule2"
        trial = body["trial"]
        assert trial["trial"] == 1
        assert trial["memorize_ms"] == 2000
        assert trial["n_targets"] == len(trial["targets"])
        assert body["grid"] == {"rows": 6, "cols": 6, "layout": "odd-r",
                                "orientation": "pointy", "indexing": "row-major"}

    def test_first_task_near_medium_difficulty(self, client, service, small_db):
        body = client.post("/sessions", json={"method": "rule2"}).json()
        summaryless = service._sessions[body["session_id"]]
        assert abs(summaryless.log.trials[0].actual_difficulty - 0.5) <= small_db.tolerance

    def test_distinct_tokens(self, client):
        a = client.post("/sessions", json={"method": "rule2"}).json()["session_id"]
        b = client.post("/sessions", json={"method": "rule2"}).json()["session_id"]
        assert a != b

    def test_full_session_flow(self, client):
        body = client.post("/sessions", json={"method": "rule1"}).json()
        sid = body["session_id"]
        trial = body["trial"]
        for i in range(20):
            result = play_trial(client, sid, trial, hit_all=(i % 2 == 0))
            if i < 19:
                assert result["next_trial"]["trial"] == i + 2
                trial = result["next_trial"]
            else:
                assert "summary" in result
                assert result["summary"]["finished"]
                assert result["summary"]["trials_completed"] == 20
        # 21st submission
        resp = client.post(f"/sessions/{sid}/recall", json={"clicks": [0, 1, 2, 3]})
        assert resp.status_code == 409
        assert resp.json()["error"] == "session_finished"
        summary = client.get(f"/sessions/{sid}/summary").json()
        assert summary["trials_completed"] == 20
        assert summary["win_rate"] == pytest.approx(0.5)
        assert len(summary["difficulty_trajectory"]) == 20

    def test_correct_flags_mark_misses(self, client):
        body = client.post("/sessions", json={"method": "rule2"}).json()
        trial = body["trial"]
        targets = trial["targets"]
        wrong = next(c for c in range(36) if c not in targets)
        clicks = list(targets[:-1]) + [wrong]
        result = client.post(f"/sessions/{body['session_id']}/recall",
                             json={"clicks": clicks}).json()
        assert result["correct_flags"] == [True] * (len(targets) - 1) + [False]
        assert result["outcome"]["correct"] == len(targets) - 1
        assert result["outcome"]["score"] == pytest.approx((len(targets) - 1) / len(targets))

    def test_protocol_errors(self, client):
        body = client.post("/sessions", json={"method": "rule2"}).json()
        sid = body["session_id"]
        targets = body["trial"]["targets"]
        resp = client.post(f"/sessions/{sid}/recall", json={"clicks": targets[:-1]})
        assert resp.status_code == 400
        assert resp.json()["error"] == "wrong_click_count"
        dup = [targets[0]] + list(targets[:-1])
        resp = client.post(f"/sessions/{sid}/recall", json={"clicks": dup})
        assert resp.status_code == 400
        assert resp.json()["error"] == "duplicate_clicks"
        bad = list(targets[:-1]) + [99]
        resp = client.post(f"/sessions/{sid}/recall", json={"clicks": bad})
        assert resp.status_code == 400
        assert resp.json()["error"] == "invalid_cell"

    def test_unknown_token_404(self, client):
        assert client.get("/sessions/nope/summary").status_code == 404
        assert client.post("/sessions/nope/recall",
                           json={"clicks": [0, 1, 2, 3]}).status_code == 404

    def test_rl_without_policy_503(self, grid, table, weights, small_db, tmp_path):
        bare = SessionService(grid, table, weights, small_db,
                              str(tmp_path / "bare"), policy=None)
        client = TestClient(create_app(bare), raise_server_exceptions=False)
        resp = client.post("/sessions", json={"method": "rl"})
        assert resp.status_code == 503
        assert resp.json()["error"] == "policy_unavailable"

    def test_resume_endpoint_returns_current_trial(self, client):
        body = client.post("/sessions", json={"method": "rule2"}).json()
        sid = body["session_id"]
        state = client.get(f"/sessions/{sid}").json()
        assert state["phase"] == "awaiting_recall"
        assert state["trial"]["targets"] == body["trial"]["targets"]

    def test_summary_before_any_completed_trial(self, client):
        body = client.post("/sessions", json={"method": "rule2"}).json()
        summary = client.get(f"/sessions/{body['session_id']}/summary").json()
        assert summary["trials_completed"] == 0
        assert summary["difficulty_trajectory"] == []
        assert summary["mean_score"] is None
        assert summary["decline_correlation"] is None

    def test_summary_mean_matches_persisted_log(self, service, client):
        body = client.post("/sessions", json={"method": "rule2"}).json()
        sid = body["session_id"]
        trial = body["trial"]
        for i in range(4):
            result = play_trial(client, sid, trial, hit_all=(i % 2 == 0))
            trial = result["next_trial"]
        log = read_session_log(service._log_path(sid))
        summary = client.get(f"/sessions/{sid}/summary").json()
        assert summary["mean_score"] == pytest.approx(log.mean_score(), abs=1e-12)


class TestDurability:
    def test_every_trial_fsynced_before_response(self, service, client):
        body = client.post("/sessions", json={"method": "rule2"}).json()
        sid = body["session_id"]
        path = service._log_path(sid)
        lines = [json.loads(line) for line in open(path)]
        assert [e["event"] for e in lines] == ["session", "trial_issued"]
        play_trial(client, sid, body["trial"])
        lines = [json.loads(line) for line in open(path)]
        assert [e["event"] for e in lines] == [
            "session", "trial_issued", "trial_completed", "trial_issued"]

    def test_restart_restores_and_continues(self, grid, table, weights, small_db,
                                            tmp_path):
        data_dir = str(tmp_path / "data")
        policy = init_params(seed=0)
        first = SessionService(grid, table, weights, small_db, data_dir,
                               policy=policy, session_seed=42)
        client1 = TestClient(create_app(first), raise_server_exceptions=False)
        body = client1.post("/sessions", json={"method": "rl"}).json()
        sid = body["session_id"]
        trial = body["trial"]
        for _ in range(5):
            result = play_trial(client1, sid, trial)
            trial = result["next_trial"]
        # simulate a restart: fresh service over the same data directory
        second = SessionService(grid, table, weights, small_db, data_dir,
                                policy=policy, session_seed=42)
        client2 = TestClient(create_app(second), raise_server_exceptions=False)
        state = client2.get(f"/sessions/{sid}").json()
        assert state["phase"] == "awaiting_recall"
        assert state["trial"]["trial"] == 6
        assert state["trial"]["targets"] == trial["targets"]
        result = play_trial(client2, sid, state["trial"])
        assert result["next_trial"]["trial"] == 7
        summary = client2.get(f"/sessions/{sid}/summary").json()
        assert summary["trials_completed"] == 6

    def test_restore_divergence_detected(self, grid, table, weights, small_db,
                                         tmp_path):
        data_dir = str(tmp_path / "data")
        first = SessionService(grid, table, weights, small_db, data_dir,
                               policy=init_params(seed=0), session_seed=42)
        client1 = TestClient(create_app(first), raise_server_exceptions=False)
        body = client1.post("/sessions", json={"method": "rl"}).json()
        play_trial(client1, body["session_id"], body["trial"])
        # a different policy would have chosen different tasks
        second = SessionService(grid, table, weights, small_db, data_dir,
                                policy=init_params(seed=999), session_seed=42)
        with pytest.raises(RuntimeError, match="diverged"):
            second.session_state(body["session_id"])

    def test_served_rl_logs_feed_fine_tuning(self, grid, table, weights, small_db,
                                             tmp_path):
        data_dir = str(tmp_path / "data")
        policy = init_params(seed=0)
        service = SessionService(grid, table, weights, small_db, data_dir,
                                 policy=policy, session_seed=7)
        client = TestClient(create_app(service), raise_server_exceptions=False)
        body = client.post("/sessions", json={"method": "rl"}).json()
        sid = body["session_id"]
        trial = body["trial"]
        for i in range(20):
            result = play_trial(client, sid, trial, hit_all=(i % 3 != 0))
            trial = result.get("next_trial")
        log = read_session_log(os.path.join(data_dir, f"{sid}.jsonl"))
        assert log.finished
        tuned, metrics = fine_tune_from_logs(policy, [log],
                                             PPOConfig(minibatch_size=19, epochs=1))
        assert tuned.all_finite()
        assert metrics


class TestCLI:
    @pytest.fixture(scope="class")
    @staticmethod
    def workdir(tmp_path_factory):
        path = tmp_path_factory.mktemp("cli")
        runner = CliRunner()
        result = runner.invoke(cli_main, [
            "ddb", "build", "--per-stratum", "300", "--seed", "3",
            "--out", str(path / "tasks.ddb")])
        assert result.exit_code == 0, result.output
        return path

    def test_ddb_build_and_query(self, workdir):
        runner = CliRunner()
        result = runner.invoke(cli_main, [
            "ddb", "query", "--difficulty", "0.5", "--db", str(workdir / "tasks.ddb")])
        assert result.exit_code == 0, result.output
        assert "difficulty 0.5" in result.output

    def test_task_difficulty(self):
        runner = CliRunner()
        result = runner.invoke(cli_main, ["task", "difficulty", "--cells", "0,5,9,14"])
        assert result.exit_code == 0, result.output
        assert "n_t 4  n_c 4  d_raw 14" in result.output
        assert "difficulty 0.384259" in result.output

    def test_task_difficulty_rejects_bad_cells(self):
        runner = CliRunner()
        result = runner.invoke(cli_main, ["task", "difficulty", "--cells", "0,1,2"])
        assert result.exit_code != 0

    def test_simulate_deterministic_csvs(self, workdir):
        runner = CliRunner()
        outputs = []
        for run in range(2):
            out = workdir / f"sim{run}"
            result = runner.invoke(cli_main, [
                "simulate", "--cohort", "4", "--methods", "rule1,rule2",
                "--seed", "11", "--out", str(out), "--db", str(workdir / "tasks.ddb")])
            assert result.exit_code == 0, result.output
            outputs.append({p.name: p.read_bytes() for p in out.iterdir() if p.is_file()})
        assert outputs[0] == outputs[1]

    def test_train_and_simulate_with_policy(self, workdir):
        runner = CliRunner()
        ckpt = workdir / "policy.ckpt"
        result = runner.invoke(cli_main, [
            "train", "--reward", "r1", "--steps", "400", "--seed", "5",
            "--out", str(ckpt), "--db", str(workdir / "tasks.ddb"), "--cohort", "2"])
        assert result.exit_code == 0, result.output
        assert ckpt.exists()
        result = runner.invoke(cli_main, [
            "simulate", "--cohort", "3", "--methods", "rl", "--seed", "2",
            "--out", str(workdir / "simrl"), "--db", str(workdir / "tasks.ddb"),
            "--policy", str(ckpt), "--save-logs"])
        assert result.exit_code == 0, result.output
        sessions = list((workdir / "simrl" / "sessions").glob("*.jsonl"))
        assert len(sessions) == 3

    def test_fine_tune_from_logs_cli(self, workdir):
        runner = CliRunner()
        result = runner.invoke(cli_main, [
            "train", "--from-logs", str(workdir / "simrl" / "sessions"),
            "--ckpt", str(workdir / "policy.ckpt"),
            "--out", str(workdir / "tuned.ckpt")])
        assert result.exit_code == 0, result.output
        assert (workdir / "tuned.ckpt").exists()

    def test_simulate_requires_policy_for_rl(self, workdir):
        runner = CliRunner()
        result = runner.invoke(cli_main, [
            "simulate", "--cohort", "2", "--methods", "rl", "--seed", "1",
            "--out", str(workdir / "x"), "--db", str(workdir / "tasks.ddb")])
        assert result.exit_code != 0
        assert "requires --policy" in result.output

    def test_missing_db_reported(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(cli_main, [
            "ddb", "query", "--difficulty", "0.5", "--db", str(tmp_path / "none.ddb")])
        assert result.exit_code != 0
        assert "not found" in result.output

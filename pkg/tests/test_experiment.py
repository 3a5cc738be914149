import math

import numpy as np
import pytest
import scipy.stats

from hexmem.controllers import RLController, Rule1Controller, Rule2Controller
from hexmem.experiment import (
    paired_t_test,
    pearson_r,
    run_cohort_experiment,
    run_session,
    write_report_csvs,
)
from hexmem.rl.policy import init_params
from hexmem.rl.ppo import PPOConfig
from hexmem.rl.rewards import RewardSpec
from hexmem.rl.train import batch_from_logs, fine_tune_from_logs
from hexmem.sessionlog import SessionLog, read_session_log, write_session_log
from hexmem.simplayer import SimPlayer, make_cohort, CohortSpec


def perfect_player() -> SimPlayer:
    return SimPlayer(ability=1.0, slope=0.001, guess_floor=0.0, rng_seed=1)


def hopeless_player() -> SimPlayer:
    return SimPlayer(ability=0.0, slope=0.001, guess_floor=0.0, rng_seed=2)


class TestPairedTTest:
    def test_hand_computed_example(self):
        t, df = paired_t_test([1, 2, 3], [2, 3, 5])
        assert t == pytest.approx(-4.0, abs=1e-12)
        assert df == 2

    def test_identical_vectors_give_zero(self):
        t, df = paired_t_test([1.5, 2.5, 3.5], [1.5, 2.5, 3.5])
        assert t == 0.0
        assert df == 2

    def test_matches_scipy_on_random_vectors(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            x = rng.normal(size=52)
            y = rng.normal(size=52)
            t, df = paired_t_test(x, y)
            ref = scipy.stats.ttest_rel(x, y)
            assert t == pytest.approx(ref.statistic, rel=1e-12)
            assert df == ref.df == 51

    def test_antisymmetry(self):
        rng = np.random.default_rng(1)
        x, y = rng.normal(size=20), rng.normal(size=20)
        assert paired_t_test(x, y)[0] == pytest.approx(-paired_t_test(y, x)[0], abs=1e-12)

    def test_constant_nonzero_difference_is_infinite(self):
        t, _ = paired_t_test([2.0, 3.0, 4.0], [1.0, 2.0, 3.0])
        assert t == math.inf
        t, _ = paired_t_test([1.0, 2.0, 3.0], [2.0, 3.0, 4.0])
        assert t == -math.inf

    def test_rejects_mismatched_or_short(self):
        with pytest.raises(ValueError):
            paired_t_test([1, 2], [1, 2, 3])
        with pytest.raises(ValueError):
            paired_t_test([1], [2])


class TestPearson:
    def test_perfect_negative_linearity(self):
        x = np.arange(1, 21, dtype=float)
        assert pearson_r(x, 5.0 - 2.0 * x) == pytest.approx(-1.0, abs=1e-12)

    def test_identity_is_one(self):
        x = np.arange(1, 21, dtype=float)
        assert pearson_r(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_matches_direct_formula_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            x = rng.normal(size=20)
            y = rng.normal(size=20)
            # naive covariance-formula reference
            mx, my = sum(x) / 20, sum(y) / 20
            cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
            sx = math.sqrt(sum((a - mx) ** 2 for a in x))
            sy = math.sqrt(sum((b - my) ** 2 for b in y))
            assert pearson_r(x, y) == pytest.approx(cov / (sx * sy), abs=1e-12)
            assert pearson_r(x, y) == pytest.approx(
                scipy.stats.pearsonr(x, y).statistic, abs=1e-12)

    def test_constant_input_reported_undefined(self):
        assert math.isnan(pearson_r([1, 1, 1], [1, 2, 3]))


class TestRunSession:
    def test_perfect_player_rule1_trace(self, grid, table, weights, small_db):
        ctl = Rule1Controller(grid, table, weights)
        log = run_session(ctl, perfect_player(), None, seed=3, weights=weights)
        counts = [rec.requested_targets for rec in log.trials]
        assert counts == [9, 10, 11, 12, 13, 14] + [14] * 14
        assert all(rec.score == 1.0 for rec in log.trials)
        assert log.win_rate() == 1.0

    def test_hopeless_player_rule2_trace(self, small_db, weights):
        ctl = Rule2Controller()
        log = run_session(ctl, hopeless_player(), small_db, seed=4, weights=weights)
        requested = [rec.requested_difficulty for rec in log.trials]
        assert requested == [0.5, 0.4, 0.3, 0.2, 0.1, 0.0] + [0.0] * 14
        assert all(rec.score == 0.0 for rec in log.trials)

    def test_same_seed_byte_identical_logs(self, small_db, weights, tmp_path):
        ctl = Rule2Controller()
        player = SimPlayer(ability=0.55, rng_seed=9)
        paths = []
        for run in range(2):
            log = run_session(ctl, player, small_db, seed=5, weights=weights)
            path = tmp_path / f"run{run}.jsonl"
            write_session_log(path, log)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_log_roundtrip(self, small_db, weights, tmp_path):
        ctl = Rule2Controller()
        log = run_session(ctl, SimPlayer(ability=0.5, rng_seed=10), small_db,
                          seed=6, weights=weights)
        path = tmp_path / "session.jsonl"
        write_session_log(path, log)
        loaded = read_session_log(path)
        assert loaded.to_events() == log.to_events()

    def test_rl_sessions_record_action_densities(self, small_db, weights):
        ctl = RLController(init_params(seed=0), deterministic=False)
        log = run_session(ctl, SimPlayer(ability=0.5, rng_seed=11), small_db,
                          seed=7, weights=weights)
        assert log.trials[0].log_prob is None  # first trial is the fixed opener
        for rec in log.trials[1:]:
            assert rec.log_prob is not None
            assert rec.raw_action is not None


class TestCohortExperiment:
    @pytest.fixture(scope="class")
    @staticmethod
    def report_and_logs(grid, table, weights, small_db):
        cohort = make_cohort(CohortSpec(size=5, seed=1))
        return run_cohort_experiment(
            ["rl", "rule1", "rule2"], cohort, small_db, seed=8,
            grid=grid, table=table, weights=weights, policy=init_params(seed=1))

    def test_report_shapes(self, report_and_logs):
        report, logs = report_and_logs
        assert len(logs) == 15
        for m in report.methods:
            assert report.avg_subject[m].shape == (5,)
            assert report.avg_trial[m].shape == (20,)
            assert report.avg_trial_difficulty[m].shape == (20,)
            assert 0.0 <= report.win_rate[m] <= 1.0
            assert report.decline[m].shape == (5,)
        # 3 method pairs x 2 factors
        assert len(report.tests) == 6
        for row in report.tests:
            assert row["df"] <= 4

    def test_avg_subject_matches_logs(self, report_and_logs):
        report, logs = report_and_logs
        for log in logs:
            p_idx = report.player_ids.index(log.player_id)
            assert report.avg_subject[log.method][p_idx] == pytest.approx(
                log.mean_score(), abs=1e-12)

    def test_deterministic_given_seed(self, grid, table, weights, small_db, tmp_path):
        cohort = make_cohort(CohortSpec(size=3, seed=2))
        outs = []
        for run in range(2):
            report, _ = run_cohort_experiment(
                ["rule1", "rule2"], cohort, small_db, seed=9,
                grid=grid, table=table, weights=weights)
            outdir = tmp_path / f"run{run}"
            write_report_csvs(report, outdir)
            outs.append({p.name: p.read_bytes() for p in outdir.iterdir()})
        assert outs[0] == outs[1]
        assert set(outs[0]) == {"avg_subject_method.csv", "avg_trial_method.csv",
                                "decline.csv", "tests.csv"}

    def test_constant_score_player_average(self, grid, table, weights, small_db):
        report, _ = run_cohort_experiment(
            ["rule1"], [perfect_player()], small_db, seed=10,
            grid=grid, table=table, weights=weights)
        assert report.avg_subject["rule1"][0] == 1.0
        assert report.win_rate["rule1"] == 1.0
        assert math.isnan(report.decline["rule1"][0])  # constant scores

    def test_empty_cohort_rejected(self, grid, table, weights, small_db):
        with pytest.raises(ValueError):
            run_cohort_experiment(["rule1"], [], small_db, seed=0,
                                  grid=grid, table=table, weights=weights)


class TestDeclineWithFatigue:
    def test_rule1_decline_negative_for_fatigued_player(self, grid, table, weights):
        # A strong player starts above the rule's opening difficulty, gets
        # ratcheted up, then fatigue bites: scores fall across the session.
        ctl = Rule1Controller(grid, table, weights)
        negatives = 0
        n_seeds = 40
        for seed in range(n_seeds):
            player = SimPlayer(ability=0.9, fatigue_rate=0.015, rng_seed=100 + seed)
            log = run_session(ctl, player, None, seed=seed, weights=weights)
            r = pearson_r(np.arange(1, 21, dtype=float), np.array(log.scores()))
            negatives += (r < 0)
        assert negatives >= 0.95 * n_seeds


class TestFineTuneReplay:
    def _stochastic_session(self, db, weights, seed):
        params = init_params(seed=0)
        ctl = RLController(params, deterministic=False)
        player = SimPlayer(ability=0.5, rng_seed=seed)
        log = run_session(ctl, player, db, seed=seed, weights=weights)
        return params, log

    def test_log_reconstruction_matches_recorded_trajectory(self, small_db, weights):
        params, log = self._stochastic_session(small_db, weights, seed=12)
        cfg = PPOConfig(minibatch_size=19, epochs=1)
        batch = batch_from_logs(params, [log], cfg)
        trials = log.completed_trials
        for i, (prev, rec) in enumerate(zip(trials, trials[1:])):
            assert batch.states[i, 0] == prev.actual_difficulty
            assert batch.states[i, 1] == prev.score
            assert batch.raw_actions[i] == rec.raw_action
            assert batch.log_probs_old[i] == rec.log_prob

    def test_replay_through_file_same_update(self, small_db, weights, tmp_path):
        params, log = self._stochastic_session(small_db, weights, seed=13)
        cfg = PPOConfig(minibatch_size=19, epochs=2)
        direct, _ = fine_tune_from_logs(params, [log], cfg, seed=3)
        path = tmp_path / "session.jsonl"
        write_session_log(path, log)
        replayed, _ = fine_tune_from_logs(params, [read_session_log(path)], cfg, seed=3)
        assert np.allclose(direct.to_vector(), replayed.to_vector(), atol=1e-12, rtol=0)

    def test_fine_tune_bounded_kl_and_finite(self, small_db, weights):
        params, log = self._stochastic_session(small_db, weights, seed=14)
        cfg = PPOConfig(minibatch_size=19, epochs=1)
        tuned, metrics = fine_tune_from_logs(params, [log], cfg, seed=4)
        assert tuned.all_finite()
        # closed-form Gaussian KL on the log's states (squash cancels)
        from hexmem.rl.policy import actor_mean
        states = np.array([[rec.actual_difficulty, rec.score]
                           for rec in log.completed_trials[:-1]])
        mu_p = actor_mean(params, states)
        mu_q = actor_mean(tuned, states)
        s_p, s_q = math.exp(params.log_std), math.exp(tuned.log_std)
        kl = (math.log(s_q / s_p) + (s_p**2 + (mu_p - mu_q) ** 2) / (2 * s_q**2) - 0.5)
        assert float(np.mean(kl)) < 0.5

    def test_non_rl_logs_rejected(self, small_db, weights):
        ctl = Rule2Controller()
        log = run_session(ctl, SimPlayer(ability=0.5, rng_seed=15), small_db,
                          seed=16, weights=weights)
        with pytest.raises(ValueError, match="method"):
            fine_tune_from_logs(init_params(seed=0), [log], PPOConfig(), seed=0)

    def test_missing_log_probs_rejected(self, small_db, weights):
        params, log = self._stochastic_session(small_db, weights, seed=17)
        for rec in log.trials:
            rec.log_prob = None
        with pytest.raises(ValueError, match="log-probability"):
            fine_tune_from_logs(params, [log], PPOConfig(), seed=0)

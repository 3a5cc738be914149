"""Cohort experiments: run sessions under each adjustment method and
aggregate per-subject averages, per-trial averages, win rates, score-decline
correlations, and paired t statistics, mirroring a within-subject design.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import taskdb
from .controllers import Controller, make_controller
from .hexgrid import DistanceTable, HexGrid
from .rl.policy import PolicyParams
from .rl.rewards import RewardSpec, reward as compute_reward
from .sessionlog import SessionLog, TrialRecord
from .simplayer import SimPlayer, respond
from .taskmodel import DifficultyWeights

# Two-sided 5% critical value of Student's t at df = 51.
T_CRITICAL_ALPHA05_DF51 = 2.008


def paired_t_test(x, y) -> tuple[float, int]:
    """Paired t statistic and degrees of freedom (sample sd, n-1 denominator).

    Zero-variance differences give t = 0 when the mean difference is zero,
    otherwise +/- infinity.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("paired t-test needs two equal-length vectors")
    n = len(x)
    if n < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    d = x - y
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0.0:
        t = 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
    else:
        t = mean / (sd / math.sqrt(n))
    return float(t), n - 1


def pearson_r(x, y) -> float:
    """Sample Pearson correlation; NaN when either input is constant
    (the correlation is undefined there)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("pearson_r needs two equal-length vectors of length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float((dx**2).sum()) * float((dy**2).sum()))
    if denom == 0.0:
        return float("nan")
    return float((dx * dy).sum() / denom)


def run_session(controller: Controller, player: SimPlayer,
                db: taskdb.TaskDatabase | None, *, n_trials: int = 20,
                seed: int = 0, reward_spec: RewardSpec = RewardSpec("r1"),
                session_id: str = "sim", player_id: str = "sim",
                weights: DifficultyWeights = DifficultyWeights()) -> SessionLog:
    """One full session: select task, play, score, adjust; deterministic
    for a given seed."""
    seed_rng = np.random.default_rng(seed)
    select_rng = np.random.default_rng(int(seed_rng.integers(0, 2**63 - 1)))
    session_player = player.fresh(rng_seed=int(seed_rng.integers(0, 2**63 - 1)))
    log = SessionLog(session_id=session_id, method=controller.method,
                     player_id=player_id, seed=seed, n_trials=n_trials,
                     reward_kind=reward_spec.kind, weights=weights.as_tuple())
    state = controller.init()
    last_score = None
    for trial in range(1, n_trials + 1):
        if trial > 1:
            state = controller.next_difficulty(state, last_score)
        requested = state.requested()
        selected = controller.select_task(state, db, select_rng)
        outcome = respond(session_player, selected.task, selected.actual_difficulty,
                          trial_index=trial - 1)
        r = compute_reward(reward_spec, outcome.score, selected.actual_difficulty)
        record = TrialRecord(
            trial=trial,
            targets=selected.task.targets,
            actual_difficulty=selected.actual_difficulty,
            task_id=selected.task_id,
            requested_difficulty=float(requested) if controller.method != "rule1" else None,
            requested_targets=int(requested) if controller.method == "rule1" else None,
            clicks=outcome.clicks,
            correct=outcome.correct,
            score=outcome.score,
            win=outcome.win,
            reward=r,
            log_prob=state.last_log_prob if trial > 1 else None,
            raw_action=state.last_raw_action if trial > 1 else None,
        )
        log.trials.append(record)
        last_score = outcome.score
    return log


@dataclass
class ExperimentReport:
    methods: list[str]
    player_ids: list[str]
    n_trials: int
    avg_subject: dict[str, np.ndarray]  # per method: |cohort| mean scores
    avg_trial: dict[str, np.ndarray]  # per method: n_trials mean scores
    avg_trial_difficulty: dict[str, np.ndarray]  # per method: n_trials mean served difficulty
    win_rate: dict[str, float]
    decline: dict[str, np.ndarray]  # per method: |cohort| score-vs-trial correlations
    tests: list[dict] = field(default_factory=list)  # factor/group pair t statistics


def _paired_dropping_nan(x: np.ndarray, y: np.ndarray) -> tuple[float, int]:
    keep = ~(np.isnan(x) | np.isnan(y))
    return paired_t_test(x[keep], y[keep])


def run_cohort_experiment(methods: list[str], cohort: list[SimPlayer],
                          db: taskdb.TaskDatabase, seed: int, *,
                          grid: HexGrid, table: DistanceTable,
                          weights: DifficultyWeights = DifficultyWeights(),
                          policy: PolicyParams | None = None,
                          n_trials: int = 20,
                          reward_spec: RewardSpec = RewardSpec("r1"),
                          ) -> tuple[ExperimentReport, list[SessionLog]]:
    """Every player plays every method (order randomized per player);
    aggregates follow the within-subject analysis layout."""
    if not cohort:
        raise ValueError("cohort must be nonempty")
    controllers = {m: make_controller(m, grid, table, weights, policy=policy)
                   for m in methods}
    master = np.random.default_rng(seed)
    player_ids = [f"p{idx:03d}" for idx in range(len(cohort))]
    logs: list[SessionLog] = []
    scores = {m: np.zeros((len(cohort), n_trials)) for m in methods}
    difficulties = {m: np.zeros((len(cohort), n_trials)) for m in methods}
    wins = {m: 0 for m in methods}
    for p_idx, player in enumerate(cohort):
        order = [methods[i] for i in master.permutation(len(methods))]
        session_seeds = {m: int(master.integers(0, 2**63 - 1)) for m in order}
        for m in order:
            log = run_session(
                controllers[m], player, db, n_trials=n_trials,
                seed=session_seeds[m], reward_spec=reward_spec,
                session_id=f"{player_ids[p_idx]}-{m}", player_id=player_ids[p_idx],
                weights=weights)
            logs.append(log)
            for t_idx, rec in enumerate(log.completed_trials):
                scores[m][p_idx, t_idx] = rec.score
                difficulties[m][p_idx, t_idx] = rec.actual_difficulty
                wins[m] += rec.win
    trial_axis = np.arange(1, n_trials + 1, dtype=np.float64)
    decline = {
        m: np.array([pearson_r(trial_axis, scores[m][i]) for i in range(len(cohort))])
        for m in methods
    }
    report = ExperimentReport(
        methods=list(methods),
        player_ids=player_ids,
        n_trials=n_trials,
        avg_subject={m: scores[m].mean(axis=1) for m in methods},
        avg_trial={m: scores[m].mean(axis=0) for m in methods},
        avg_trial_difficulty={m: difficulties[m].mean(axis=0) for m in methods},
        win_rate={m: wins[m] / (len(cohort) * n_trials) for m in methods},
        decline=decline,
    )
    for i, a in enumerate(methods):
        for b in methods[i + 1:]:
            t, df = paired_t_test(report.avg_subject[a], report.avg_subject[b])
            report.tests.append({"factor": "score", "group_a": a, "group_b": b,
                                 "t": t, "df": df})
            t, df = _paired_dropping_nan(decline[a], decline[b])
            report.tests.append({"factor": "decline", "group_a": a, "group_b": b,
                                 "t": t, "df": df})
    return report, logs


def _fmt(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return ""
    return repr(float(value))


def write_report_csvs(report: ExperimentReport, outdir) -> None:
    os.makedirs(outdir, exist_ok=True)
    methods = report.methods
    with open(os.path.join(outdir, "avg_subject_method.csv"), "w") as fh:
        fh.write("player_id," + ",".join(methods) + "\n")
        for i, pid in enumerate(report.player_ids):
            fh.write(pid + "," + ",".join(_fmt(report.avg_subject[m][i]) for m in methods) + "\n")
    with open(os.path.join(outdir, "avg_trial_method.csv"), "w") as fh:
        fh.write("trial," + ",".join(f"score_{m}" for m in methods)
                 + "," + ",".join(f"difficulty_{m}" for m in methods) + "\n")
        for t in range(report.n_trials):
            row = [str(t + 1)]
            row += [_fmt(report.avg_trial[m][t]) for m in methods]
            row += [_fmt(report.avg_trial_difficulty[m][t]) for m in methods]
            fh.write(",".join(row) + "\n")
    with open(os.path.join(outdir, "decline.csv"), "w") as fh:
        fh.write("player_id," + ",".join(methods) + "\n")
        for i, pid in enumerate(report.player_ids):
            fh.write(pid + "," + ",".join(_fmt(report.decline[m][i]) for m in methods) + "\n")
    with open(os.path.join(outdir, "tests.csv"), "w") as fh:
        fh.write("factor,group_a,group_b,t,df\n")
        for row in report.tests:
            fh.write(f"{row['factor']},{row['group_a']},{row['group_b']},"
                     f"{_fmt(row['t'])},{row['df']}\n")

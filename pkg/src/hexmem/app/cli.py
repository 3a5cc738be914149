"""Command-line entry points: build/query the task database, inspect task
difficulty, train or fine-tune a policy, run cohort simulations, and serve
live sessions."""

from __future__ import annotations

import glob
import os
import sys

import click
import numpy as np

from .. import taskdb
from ..experiment import run_cohort_experiment, write_report_csvs
from ..hexgrid import HexGrid, build_distance_table
from ..rl.policy import load_checkpoint
from ..rl.ppo import PPOConfig
from ..rl.rewards import RewardSpec
from ..rl.train import fine_tune_from_logs, train
from ..sessionlog import read_session_log, write_session_log
from ..simplayer import CohortSpec, make_cohort
from ..taskmodel import (
    DifficultyWeights,
    MemoryTask,
    extract_features,
    difficulty as metric,
)
from .config import load_config


def _weights(option: str | None) -> DifficultyWeights:
    if option is None:
        return DifficultyWeights()
    return DifficultyWeights(*(float(x) for x in option.split(",")))


def _load_db(path: str, weights: DifficultyWeights) -> taskdb.TaskDatabase:
    if not os.path.exists(path):
        raise click.ClickException(f"task database {path!r} not found; "
                                   "run `hexmem ddb build` first")
    try:
        return taskdb.load(path, weights)
    except ValueError as exc:
        raise click.ClickException(str(exc))


@click.group()
def main():
    """Adaptive visual working memory game tooling."""


@main.group()
def ddb():
    """Difficulty database operations."""


@ddb.command("build")
@click.option("--per-stratum", default=taskdb.DEFAULT_PER_STRATUM, show_default=True,
              help="Sampled tasks per target count.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default="hexmem.ddb", show_default=True)
@click.option("--weights", "weights_opt", default=None,
              help="Comma-separated difficulty weights (default 1/3,1/3,1/3).")
def ddb_build(per_stratum: int, seed: int, out: str, weights_opt: str | None):
    """Sample tasks per target count and index them by difficulty."""
    grid = HexGrid()
    table = build_distance_table(grid)
    weights = _weights(weights_opt)
    db = taskdb.build(grid, table, weights, per_stratum=per_stratum, seed=seed)
    taskdb.save(db, out)
    click.echo(f"wrote {len(db)} tasks to {out} "
               f"(difficulty {db.difficulties[0]:.3f}..{db.difficulties[-1]:.3f})")


@ddb.command("query")
@click.option("--difficulty", "target", type=float, required=True)
@click.option("--db", "db_path", default="hexmem.ddb", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--weights", "weights_opt", default=None)
def ddb_query(target: float, db_path: str, seed: int, weights_opt: str | None):
    """Look up the task nearest a difficulty value."""
    weights = _weights(weights_opt)
    db = _load_db(db_path, weights)
    found = taskdb.lookup(db, target, (), np.random.default_rng(seed))
    click.echo(f"task id {found.task_id}: targets {','.join(map(str, found.task.targets))}")
    click.echo(f"difficulty {found.difficulty:.6f} (requested {target})")


@main.group()
def task():
    """Single-task inspection."""


@task.command("difficulty")
@click.option("--cells", required=True, help="Comma-separated target cell indices.")
@click.option("--weights", "weights_opt", default=None)
def task_difficulty_cmd(cells: str, weights_opt: str | None):
    """Print a task's features and difficulty."""
    grid = HexGrid()
    table = build_distance_table(grid)
    weights = _weights(weights_opt)
    try:
        memory_task = MemoryTask(tuple(int(x) for x in cells.split(",")))
    except ValueError as exc:
        raise click.ClickException(str(exc))
    feats = extract_features(grid, table, memory_task)
    click.echo(f"n_t {feats.n_t}  n_c {feats.n_c}  d_raw {feats.d_raw:g}")
    click.echo(f"f_t {feats.f_t:.6f}  f_c {feats.f_c:.6f}  f_d {feats.f_d:.6f}")
    click.echo(f"difficulty {metric(feats, weights):.6f}")


@main.command("train")
@click.option("--reward", "reward_kind", type=click.Choice(["r1", "r2", "r3"]),
              default="r1", show_default=True)
@click.option("--steps", default=200_000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", default="policy.ckpt", show_default=True)
@click.option("--db", "db_path", default="hexmem.ddb", show_default=True)
@click.option("--weights", "weights_opt", default=None)
@click.option("--cohort", "cohort_size", default=8, show_default=True)
@click.option("--ability-low", default=0.2, show_default=True)
@click.option("--ability-high", default=0.9, show_default=True)
@click.option("--curve", "curve_path", default=None,
              help="Write the training curve CSV here.")
@click.option("--from-logs", "logs_dir", default=None,
              help="Fine-tune from logged sessions instead of simulating.")
@click.option("--ckpt", "ckpt_path", default=None,
              help="Starting checkpoint (required with --from-logs).")
def train_cmd(reward_kind, steps, seed, out_path, db_path, weights_opt,
              cohort_size, ability_low, ability_high, curve_path,
              logs_dir, ckpt_path):
    """Train a policy against simulated players, or fine-tune from logs."""
    weights = _weights(weights_opt)
    if logs_dir is not None:
        if ckpt_path is None:
            raise click.ClickException("--from-logs requires --ckpt")
        params, cfg_dict = load_checkpoint(ckpt_path)
        cfg = PPOConfig(**cfg_dict)
        paths = sorted(glob.glob(os.path.join(logs_dir, "*.jsonl")))
        logs = [read_session_log(p) for p in paths]
        logs = [log for log in logs if log.method == "rl"]
        if not logs:
            raise click.ClickException(f"no replayable RL session logs in {logs_dir}")
        try:
            params, metrics = fine_tune_from_logs(params, logs, cfg, seed=seed)
        except ValueError as exc:
            raise click.ClickException(str(exc))
        from ..rl.policy import save_checkpoint

        save_checkpoint(out_path, params, cfg.as_dict())
        click.echo(f"fine-tuned on {len(logs)} sessions -> {out_path} "
                   f"(kl {metrics.get('approx_kl', 0.0):.4f})")
        return
    db = _load_db(db_path, weights)
    cohort = make_cohort(CohortSpec(size=cohort_size, ability_low=ability_low,
                                    ability_high=ability_high, seed=seed))
    result = train(db, cohort, PPOConfig(), RewardSpec(reward_kind), seed=seed,
                   total_steps=steps, checkpoint_path=out_path,
                   curve_path=curve_path)
    last = result.curve[-1] if result.curve else {}
    click.echo(f"trained {result.env_steps} steps -> {out_path} "
               f"(mean reward {last.get('mean_reward', float('nan')):.3f}, "
               f"mean score {last.get('mean_score', float('nan')):.3f})")


@main.command("simulate")
@click.option("--cohort", "cohort_size", default=52, show_default=True)
@click.option("--methods", default="rl,rule1,rule2", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", required=True)
@click.option("--db", "db_path", default="hexmem.ddb", show_default=True)
@click.option("--policy", "policy_path", default=None)
@click.option("--weights", "weights_opt", default=None)
@click.option("--ability-low", default=0.2, show_default=True)
@click.option("--ability-high", default=0.9, show_default=True)
@click.option("--fatigue", default=0.004, show_default=True)
@click.option("--reward", "reward_kind", type=click.Choice(["r1", "r2", "r3"]),
              default="r1", show_default=True)
@click.option("--save-logs/--no-save-logs", default=False, show_default=True)
def simulate_cmd(cohort_size, methods, seed, out_dir, db_path, policy_path,
                 weights_opt, ability_low, ability_high, fatigue, reward_kind,
                 save_logs):
    """Run the cohort experiment and write the report CSVs."""
    weights = _weights(weights_opt)
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    grid = HexGrid()
    table = build_distance_table(grid)
    db = _load_db(db_path, weights)
    policy = None
    if "rl" in method_list:
        if policy_path is None:
            raise click.ClickException("method 'rl' requires --policy")
        policy, _ = load_checkpoint(policy_path)
    cohort = make_cohort(CohortSpec(size=cohort_size, ability_low=ability_low,
                                    ability_high=ability_high,
                                    fatigue_rate=fatigue, seed=seed))
    report, logs = run_cohort_experiment(
        method_list, cohort, db, seed=seed, grid=grid, table=table,
        weights=weights, policy=policy, reward_spec=RewardSpec(reward_kind))
    write_report_csvs(report, out_dir)
    if save_logs:
        logs_dir = os.path.join(out_dir, "sessions")
        os.makedirs(logs_dir, exist_ok=True)
        for log in logs:
            write_session_log(os.path.join(logs_dir, f"{log.session_id}.jsonl"), log)
    click.echo(f"wrote report for {cohort_size} players x {len(method_list)} methods "
               f"to {out_dir}")
    for m in method_list:
        click.echo(f"  {m}: mean score {report.avg_subject[m].mean():.3f}, "
                   f"win rate {report.win_rate[m]:.3f}")


@main.command("serve")
@click.option("--config", "config_path", default=None)
@click.option("--host", default=None, help="Override the configured bind host.")
@click.option("--port", default=None, type=int, help="Override the configured port.")
def serve_cmd(config_path, host, port):
    """Serve live sessions over HTTP."""
    import uvicorn

    from .service import SessionService, create_app

    cfg = load_config(config_path)
    grid = HexGrid()
    table = build_distance_table(grid)
    weights = cfg.difficulty_weights()
    db = _load_db(cfg.ddb_path, weights)
    policy = None
    if cfg.policy_path:
        try:
            policy, _ = load_checkpoint(cfg.policy_path)
        except (OSError, ValueError) as exc:
            raise click.ClickException(f"cannot load policy {cfg.policy_path!r}: {exc}")
    service = SessionService(
        grid, table, weights, db, cfg.data_dir, policy=policy,
        reward_spec=RewardSpec(cfg.reward), default_method=cfg.default_method,
        session_seed=cfg.session_seed)
    app = create_app(service)
    if cfg.static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=cfg.static_dir, html=True), name="ui")
    uvicorn.run(app, host=host or cfg.bind_host, port=port or cfg.bind_port,
                log_level="warning")


if __name__ == "__main__":
    sys.exit(main())

"""Training orchestration: rollouts over simulated players, updates,
checkpointing, evaluation, and fine-tuning from logged human sessions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .. import taskdb
from ..sessionlog import SessionLog
from ..simplayer import SimPlayer
from .env import SessionEnv
from .gae import gae
from .policy import PolicyParams, act, critic_value, init_params, save_checkpoint
from .ppo import AdamState, Batch, PPOConfig, ppo_update
from .rewards import RewardSpec, reward as compute_reward


@dataclass
class TrainResult:
    params: PolicyParams
    curve: list[dict]
    env_steps: int


def _child_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.default_rng(seed).integers(0, 2**63 - 1, size=n)]


def _collect_rollout(params: PolicyParams, env: SessionEnv, cohort: list[SimPlayer],
                     min_steps: int, act_rng: np.random.Generator,
                     episode_rng: np.random.Generator) -> tuple[dict, dict]:
    states, raws, logps, rewards, values, dones = [], [], [], [], [], []
    episode_rewards = []
    episode_scores = []
    while len(raws) < min_steps:
        idx = int(episode_rng.integers(len(cohort)))
        player = cohort[idx].fresh(rng_seed=int(episode_rng.integers(0, 2**63 - 1)))
        state = env.reset(player)
        ep_reward = 0.0
        ep_scores = [state[1]]
        while not env.done:
            decision = act(params, state, deterministic=False, rng=act_rng)
            next_state, r, done = env.step(decision.action)
            states.append(state)
            raws.append(decision.raw)
            logps.append(decision.log_prob)
            rewards.append(r)
            values.append(decision.value)
            dones.append(done)
            ep_reward += r
            ep_scores.append(next_state[1])
            state = next_state
        episode_rewards.append(ep_reward)
        episode_scores.append(float(np.mean(ep_scores)))
    arrays = {
        "states": np.array(states),
        "raws": np.array(raws),
        "logps": np.array(logps),
        "rewards": np.array(rewards),
        "values": np.array(values),
        "dones": np.array(dones),
    }
    stats = {
        "mean_episode_reward": float(np.mean(episode_rewards)),
        "mean_episode_score": float(np.mean(episode_scores)),
    }
    return arrays, stats


def _normalized(advantages: np.ndarray) -> np.ndarray:
    return (advantages - advantages.mean()) / (advantages.std() + 1e-8)


def train(db: taskdb.TaskDatabase, cohort: list[SimPlayer], cfg: PPOConfig,
          reward_spec: RewardSpec, seed: int, total_steps: int,
          checkpoint_path=None, curve_path=None, log_every: int = 0) -> TrainResult:
    """Alternate rollouts (episodes sampled over the cohort) and updates
    until the environment-step budget is spent. Deterministic per seed."""
    init_seed, env_seed, act_seed, shuffle_seed, episode_seed = _child_seeds(seed, 5)
    params = init_params(init_seed)
    env = SessionEnv(db, reward_spec, np.random.default_rng(env_seed))
    act_rng = np.random.default_rng(act_seed)
    shuffle_rng = np.random.default_rng(shuffle_seed)
    episode_rng = np.random.default_rng(episode_seed)
    opt_state: AdamState | None = None
    curve: list[dict] = []
    steps_done = 0
    update_idx = 0
    while steps_done < total_steps:
        arrays, roll_stats = _collect_rollout(
            params, env, cohort, min(cfg.rollout_steps, total_steps - steps_done),
            act_rng, episode_rng)
        advantages, targets = gae(arrays["rewards"], arrays["values"], arrays["dones"],
                                  cfg.gamma, cfg.lam)
        batch = Batch(
            states=arrays["states"],
            raw_actions=arrays["raws"],
            log_probs_old=arrays["logps"],
            advantages=_normalized(advantages),
            value_targets=targets,
        )
        params, opt_state, metrics = ppo_update(params, batch, cfg, shuffle_rng, opt_state)
        steps_done += len(batch)
        update_idx += 1
        row = {
            "update": update_idx,
            "env_steps": steps_done,
            "mean_reward": roll_stats["mean_episode_reward"],
            "mean_score": roll_stats["mean_episode_score"],
            "approx_kl": metrics.get("approx_kl", 0.0),
            "clip_fraction": metrics.get("clip_fraction", 0.0),
        }
        curve.append(row)
        if checkpoint_path is not None:
            save_checkpoint(checkpoint_path, params, cfg.as_dict())
        if log_every and update_idx % log_every == 0:
            print(f"update {update_idx}: steps={steps_done} "
                  f"reward={row['mean_reward']:.3f} score={row['mean_score']:.3f}")
    if curve_path is not None:
        write_curve(curve_path, curve)
    return TrainResult(params=params, curve=curve, env_steps=steps_done)


def write_curve(path, curve: list[dict]) -> None:
    fields = ["update", "env_steps", "mean_reward", "mean_score", "approx_kl",
              "clip_fraction"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(curve)


def evaluate_policy(params: PolicyParams, db: taskdb.TaskDatabase, player: SimPlayer,
                    n_trials: int = 100, seed: int = 0,
                    reward_spec: RewardSpec | None = None) -> float:
    """Mean score over n_trials of deterministic-mode play, in whole sessions."""
    env_seed, player_seed = _child_seeds(seed, 2)
    env = SessionEnv(db, reward_spec or RewardSpec("r1"), np.random.default_rng(env_seed))
    session_seeds = _child_seeds(player_seed, (n_trials + 19) // 20)
    scores: list[float] = []
    for s in session_seeds:
        state = env.reset(player.fresh(rng_seed=s))
        scores.append(float(state[1]))
        while not env.done:
            decision = act(params, state, deterministic=True)
            state, _, _ = env.step(decision.action)
            scores.append(float(state[1]))
    return float(np.mean(scores[:n_trials]))


def batch_from_logs(params: PolicyParams, logs: list[SessionLog],
                    cfg: PPOConfig) -> Batch | None:
    """Rebuild a training batch from logged sessions. Only RL-driven
    sessions can be replayed: each non-initial trial must carry the action
    density recorded when it was served."""
    states, raws, logps, rewards, dones = [], [], [], [], []
    for log in logs:
        if log.method != "rl":
            raise ValueError(f"session {log.session_id} used method {log.method!r}; "
                             "only RL sessions can fine-tune the policy")
        trials = log.completed_trials
        if len(trials) < 2:
            continue
        spec = RewardSpec(log.reward_kind)
        for prev, rec in zip(trials, trials[1:]):
            if rec.log_prob is None or rec.raw_action is None:
                raise ValueError(
                    f"session {log.session_id} trial {rec.trial} lacks the stored "
                    "action log-probability; logs from non-RL or older sessions "
                    "cannot be replayed")
            states.append([prev.actual_difficulty, prev.score])
            raws.append(rec.raw_action)
            logps.append(rec.log_prob)
            r = rec.reward
            if r is None:
                r = compute_reward(spec, rec.score, rec.actual_difficulty)
            rewards.append(r)
            dones.append(False)
        dones[-1] = True
    if not raws:
        return None
    states_arr = np.array(states, dtype=np.float64)
    values = critic_value(params, states_arr)
    advantages, targets = gae(np.array(rewards), values, np.array(dones),
                              cfg.gamma, cfg.lam)
    return Batch(
        states=states_arr,
        raw_actions=np.array(raws),
        log_probs_old=np.array(logps),
        advantages=_normalized(advantages),
        value_targets=targets,
    )


def fine_tune_from_logs(params: PolicyParams, logs: list[SessionLog], cfg: PPOConfig,
                        seed: int = 0) -> tuple[PolicyParams, dict]:
    """Off-policy replay of logged sessions through the regular update;
    probability ratios are taken against the stored log-densities."""
    batch = batch_from_logs(params, logs, cfg)
    if batch is None:
        return params, {}
    if len(batch) < cfg.minibatch_size:
        cfg = replace(cfg, minibatch_size=len(batch))
    # index 3 is train()'s shuffle stream, so replaying a rollout's sessions
    # with the same seed shuffles exactly like the update that produced them
    shuffle_rng = np.random.default_rng(_child_seeds(seed, 4)[3])
    new_params, _, metrics = ppo_update(params, batch, cfg, shuffle_rng)
    return new_params, metrics

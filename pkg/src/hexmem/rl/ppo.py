"""Clipped-surrogate policy optimization with hand-derived gradients.

The loss is the standard clipped objective plus a value-function term and
an entropy bonus; its gradient is assembled analytically through the
Gaussian log-density and the two small nets, and is finite-difference
checkable to high precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nets import layer_param_count
from .policy import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    PolicyParams,
    backward_batch,
    forward_batch,
    log_sech2,
)

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_LOG_2 = np.log(2.0)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class PPOConfig:
    gamma: float = 0.95
    lam: float = 0.95
    clip_eps: float = 0.2
    learning_rate: float = 3e-4
    epochs: int = 10
    minibatch_size: int = 64
    rollout_steps: int = 2048
    entropy_coef: float = 0.005
    value_coef: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma {self.gamma} outside (0, 1]")
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be positive")

    def as_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "lam": self.lam,
            "clip_eps": self.clip_eps,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "minibatch_size": self.minibatch_size,
            "rollout_steps": self.rollout_steps,
            "entropy_coef": self.entropy_coef,
            "value_coef": self.value_coef,
        }


@dataclass
class Batch:
    """Step-aligned training arrays; raw actions are pre-squash."""

    states: np.ndarray  # (n, 2)
    raw_actions: np.ndarray  # (n,)
    log_probs_old: np.ndarray  # (n,)
    advantages: np.ndarray  # (n,)
    value_targets: np.ndarray  # (n,)

    def __len__(self) -> int:
        return len(self.raw_actions)

    def select(self, idx: np.ndarray) -> "Batch":
        return Batch(self.states[idx], self.raw_actions[idx], self.log_probs_old[idx],
                     self.advantages[idx], self.value_targets[idx])


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n))


def adam_step(vector: np.ndarray, grad: np.ndarray, state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> np.ndarray:
    state.t += 1
    state.m = beta1 * state.m + (1 - beta1) * grad
    state.v = beta2 * state.v + (1 - beta2) * grad**2
    m_hat = state.m / (1 - beta1**state.t)
    v_hat = state.v / (1 - beta2**state.t)
    return vector - lr * m_hat / (np.sqrt(v_hat) + eps)


def loss_and_grad(params: PolicyParams, batch: Batch, cfg: PPOConfig) -> tuple[float, np.ndarray, dict]:
    """Total loss, its exact gradient as a flat vector, and diagnostics."""
    n = len(batch)
    cache = forward_batch(params, batch.states)
    sigma = np.exp(params.log_std)
    z = (batch.raw_actions - cache.mu) / sigma
    log_probs = (-0.5 * z**2 - params.log_std - _HALF_LOG_2PI
                 - (log_sech2(batch.raw_actions) - _LOG_2))

    ratio = np.exp(log_probs - batch.log_probs_old)
    clipped = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
    surr_raw = ratio * batch.advantages
    surr_clip = clipped * batch.advantages
    policy_loss = -np.minimum(surr_raw, surr_clip).mean()

    value_err = cache.values - batch.value_targets
    value_loss = (value_err**2).mean()

    ent = params.log_std + 0.5 * (1.0 + np.log(2.0 * np.pi))
    total = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * ent

    # d(total)/d(log_prob): only where min() follows the unclipped branch,
    # or the clipped branch inside the clip bounds (where both agree).
    take_raw = surr_raw <= surr_clip
    in_bounds = (ratio > 1.0 - cfg.clip_eps) & (ratio < 1.0 + cfg.clip_eps)
    d_logp = np.where(take_raw | in_bounds, -(batch.advantages * ratio) / n, 0.0)

    d_mu = d_logp * (z / sigma)
    d_log_std = float((d_logp * (z**2 - 1.0)).sum()) - cfg.entropy_coef
    d_value = cfg.value_coef * 2.0 * value_err / n
    grad = backward_batch(params, cache, d_mu, d_log_std, d_value)

    stats = {
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": float(ent),
        "approx_kl": float((batch.log_probs_old - log_probs).mean()),
        "clip_fraction": float((np.abs(ratio - 1.0) > cfg.clip_eps).mean()),
    }
    return float(total), grad, stats


def ppo_update(params: PolicyParams, batch: Batch, cfg: PPOConfig,
               rng: np.random.Generator,
               opt_state: AdamState | None = None) -> tuple[PolicyParams, AdamState, dict]:
    """cfg.epochs passes of shuffled minibatches; returns fresh params."""
    if len(batch) < cfg.minibatch_size:
        raise ValueError(f"batch of {len(batch)} smaller than minibatch size "
                         f"{cfg.minibatch_size}")
    vector = params.to_vector()
    if opt_state is None:
        opt_state = AdamState.zeros(len(vector))
    dims = params.dims
    metrics: dict[str, float] = {}
    n_batches = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(batch))
        for start in range(0, len(batch) - cfg.minibatch_size + 1, cfg.minibatch_size):
            mb = batch.select(order[start:start + cfg.minibatch_size])
            current = PolicyParams.from_vector(vector, dims)
            loss, grad, stats = loss_and_grad(current, mb, cfg)
            if not np.isfinite(loss) or not np.isfinite(grad).all():
                raise TrainingError(
                    f"non-finite loss/gradient (loss={loss}, "
                    f"|grad|max={np.abs(grad).max() if len(grad) else 'n/a'}); "
                    "update aborted"
                )
            vector = adam_step(vector, grad, opt_state, cfg.learning_rate)
            log_std_pos = layer_param_count(dims)
            vector[log_std_pos] = np.clip(vector[log_std_pos], LOG_STD_MIN, LOG_STD_MAX)
            for key, value in stats.items():
                metrics[key] = metrics.get(key, 0.0) + value
            metrics["loss"] = metrics.get("loss", 0.0) + loss
            n_batches += 1
    if n_batches:
        metrics = {k: v / n_batches for k, v in metrics.items()}
    return PolicyParams.from_vector(vector, dims), opt_state, metrics

"""Generalized advantage estimation over (possibly concatenated) episodes."""

from __future__ import annotations

import numpy as np


def gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
        gamma: float, lam: float, last_value: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Advantages and value targets for a step-aligned trajectory.

    dones[t] marks the last step of an episode; the value after a done step
    is 0 (episodes here end by trial count, not by truncation). last_value
    bootstraps a trailing unfinished episode.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    n = len(rewards)
    if n == 0:
        raise ValueError("empty trajectory")
    if len(values) != n or len(dones) != n:
        raise ValueError("rewards, values, dones must be step-aligned")
    advantages = np.empty(n)
    running = 0.0
    next_value = last_value
    for t in range(n - 1, -1, -1):
        if dones[t]:
            next_value = 0.0
            running = 0.0
        delta = rewards[t] + gamma * next_value - values[t]
        running = delta + gamma * lam * running
        advantages[t] = running
        next_value = values[t]
    return advantages, advantages + values

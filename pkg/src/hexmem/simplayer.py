"""Simulated players with tunable proficiency.

A player recalls each target independently with a probability given by a
logistic psychometric curve in (ability - difficulty), with a guess floor;
missed targets are replaced by random wrong clicks so the click count
always equals the target count, as the game demands of humans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .taskmodel import MemoryTask, TrialOutcome, score_trial

DEFAULT_SLOPE = 0.15
DEFAULT_GUESS_FLOOR = 0.05


@dataclass
class SimPlayer:
    """Parametric player: ability in [0,1], psychometric slope, guess floor,
    optional per-trial learning and fatigue drifts."""

    ability: float
    slope: float = DEFAULT_SLOPE
    guess_floor: float = DEFAULT_GUESS_FLOOR
    learning_rate: float = 0.0
    fatigue_rate: float = 0.0
    rng_seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.ability <= 1.0:
            raise ValueError(f"ability {self.ability} outside [0, 1]")
        if self.slope <= 0:
            raise ValueError("slope must be positive")
        if not 0.0 <= self.guess_floor < 1.0:
            raise ValueError(f"guess floor {self.guess_floor} outside [0, 1)")
        self.reset()

    def reset(self) -> None:
        """Rewind the player's random stream to its seed."""
        self._rng = np.random.default_rng(self.rng_seed)

    def fresh(self, rng_seed: int | None = None) -> "SimPlayer":
        """Copy with an independent stream (same parameters)."""
        return replace(self, rng_seed=self.rng_seed if rng_seed is None else rng_seed)

    def effective_ability(self, trial_index: int) -> float:
        drift = (self.learning_rate - self.fatigue_rate) * trial_index
        return min(max(self.ability + drift, 0.0), 1.0)

    def recall_probability(self, task_difficulty: float, trial_index: int = 0) -> float:
        theta = self.effective_ability(trial_index)
        x = (theta - task_difficulty) / self.slope
        return self.guess_floor + (1.0 - self.guess_floor) / (1.0 + math.exp(-x))


def respond(player: SimPlayer, task: MemoryTask, task_difficulty: float,
            trial_index: int = 0, cells: int = 36) -> TrialOutcome:
    """Play one trial: per-target Bernoulli recall, misses replaced by
    uniform-random distinct wrong clicks."""
    if trial_index < 0:
        raise ValueError("trial_index must be >= 0")
    p = player.recall_probability(task_difficulty, trial_index)
    rng = player._rng
    hits = [t for t in task.targets if rng.random() < p]
    missed = task.n_targets - len(hits)
    if missed:
        non_targets = [c for c in range(cells) if c not in set(task.targets)]
        wrong = rng.choice(len(non_targets), size=missed, replace=False)
        hits.extend(non_targets[i] for i in wrong)
    return score_trial(task, hits)


@dataclass(frozen=True)
class CohortSpec:
    size: int
    ability_low: float = 0.2
    ability_high: float = 0.9
    slope: float = DEFAULT_SLOPE
    guess_floor: float = DEFAULT_GUESS_FLOOR
    learning_rate: float = 0.0
    fatigue_rate: float = 0.0
    seed: int = 0


def make_cohort(spec: CohortSpec) -> list[SimPlayer]:
    """Players with abilities evenly spaced over the range and distinct
    derived seeds; deterministic for a given spec."""
    if spec.size < 1:
        raise ValueError("cohort size must be >= 1")
    if spec.size == 1:
        abilities = [(spec.ability_low + spec.ability_high) / 2]
    else:
        abilities = np.linspace(spec.ability_low, spec.ability_high, spec.size).tolist()
    seed_rng = np.random.default_rng(spec.seed)
    seeds = seed_rng.integers(0, 2**63 - 1, size=spec.size)
    return [
        SimPlayer(
            ability=a,
            slope=spec.slope,
            guess_floor=spec.guess_floor,
            learning_rate=spec.learning_rate,
            fatigue_rate=spec.fatigue_rate,
            rng_seed=int(s),
        )
        for a, s in zip(abilities, seeds)
    ]

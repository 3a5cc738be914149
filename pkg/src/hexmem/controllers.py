"""Difficulty-adjustment controllers behind one interface.

Three methods: a trained policy acting on the last trial's
(difficulty, score); a rule stepping the target count by 1; and a rule
stepping the continuous metric by 0.1. Both rules raise difficulty on
scores above 0.9, lower it below 0.7, and hold inside the band.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import taskdb
from .hexgrid import DistanceTable, HexGrid
from .rl.policy import PolicyParams, act
from .simplayer import SimPlayer  # noqa: F401  (re-exported for callers)
from .taskmodel import (
    MAX_TARGETS,
    MIN_TARGETS,
    DifficultyWeights,
    MemoryTask,
    task_difficulty,
)

SCORE_HI = 0.9
SCORE_LO = 0.7
RULE2_STEP_TENTHS = 1  # 0.1 in difficulty
METHODS = ("rl", "rule1", "rule2")


@dataclass
class ControllerState:
    method: str
    trial_count: int = 0
    n_targets: int = (MIN_TARGETS + MAX_TARGETS) // 2  # rule1 difficulty indicator
    tenths: int = 5  # rule2 difficulty in exact tenths
    requested_difficulty: float = 0.5  # rl action for the next task
    served_difficulty: float = 0.5  # difficulty actually served last trial
    exclusions: deque = field(default_factory=lambda: deque(maxlen=taskdb.EXCLUSION_WINDOW))
    last_log_prob: float | None = None
    last_raw_action: float | None = None

    def requested(self) -> float | int:
        if self.method == "rule1":
            return self.n_targets
        if self.method == "rule2":
            return self.tenths / 10
        return self.requested_difficulty


@dataclass(frozen=True)
class SelectedTask:
    task: MemoryTask
    task_id: int | None
    actual_difficulty: float


class Controller:
    """Shared driver: init -> (select_task -> observe score -> update)*."""

    method: str

    def init(self) -> ControllerState:
        return ControllerState(method=self.method)

    def next_difficulty(self, state: ControllerState, last_score: float) -> ControllerState:
        raise NotImplementedError

    def select_task(self, state: ControllerState, db: taskdb.TaskDatabase | None,
                    rng: np.random.Generator) -> SelectedTask:
        raise NotImplementedError


class Rule1Controller(Controller):
    """Target count is the difficulty indicator; tasks are uniform random
    subsets of that size, never consulting the continuous metric."""

    method = "rule1"

    def __init__(self, grid: HexGrid, table: DistanceTable, weights: DifficultyWeights):
        self.grid = grid
        self.table = table
        self.weights = weights

    def next_difficulty(self, state: ControllerState, last_score: float) -> ControllerState:
        if last_score > SCORE_HI:
            state.n_targets = min(state.n_targets + 1, MAX_TARGETS)
        elif last_score < SCORE_LO:
            state.n_targets = max(state.n_targets - 1, MIN_TARGETS)
        return state

    def select_task(self, state: ControllerState, db, rng: np.random.Generator) -> SelectedTask:
        cells = rng.choice(self.grid.size, size=state.n_targets, replace=False)
        task = MemoryTask(tuple(int(c) for c in cells))
        actual = task_difficulty(self.grid, self.table, task, self.weights)
        return SelectedTask(task=task, task_id=None, actual_difficulty=actual)


class Rule2Controller(Controller):
    """Continuous metric stepped in exact tenths, clamped to [0, 1]."""

    method = "rule2"

    def next_difficulty(self, state: ControllerState, last_score: float) -> ControllerState:
        if last_score > SCORE_HI:
            state.tenths = min(state.tenths + RULE2_STEP_TENTHS, 10)
        elif last_score < SCORE_LO:
            state.tenths = max(state.tenths - RULE2_STEP_TENTHS, 0)
        return state

    def select_task(self, state: ControllerState, db: taskdb.TaskDatabase,
                    rng: np.random.Generator) -> SelectedTask:
        found = taskdb.lookup(db, state.tenths / 10, state.exclusions, rng)
        state.exclusions.append(found.task_id)
        return SelectedTask(task=found.task, task_id=found.task_id,
                            actual_difficulty=found.difficulty)


class RLController(Controller):
    """Policy-driven difficulty. Serving uses the deterministic action; the
    stochastic density at that action is recorded for later fine-tuning."""

    method = "rl"

    def __init__(self, params: PolicyParams, deterministic: bool = True):
        self.params = params
        self.deterministic = deterministic

    def next_difficulty(self, state: ControllerState, last_score: float) -> ControllerState:
        # The policy state is the last trial as observed: served difficulty + score.
        decision = act(self.params, [state.served_difficulty, last_score],
                       deterministic=self.deterministic)
        state.requested_difficulty = decision.action
        state.last_log_prob = decision.log_prob
        state.last_raw_action = decision.raw
        return state

    def select_task(self, state: ControllerState, db: taskdb.TaskDatabase,
                    rng: np.random.Generator) -> SelectedTask:
        found = taskdb.lookup(db, state.requested_difficulty, state.exclusions, rng)
        state.exclusions.append(found.task_id)
        state.served_difficulty = found.difficulty
        return SelectedTask(task=found.task, task_id=found.task_id,
                            actual_difficulty=found.difficulty)


def make_controller(method: str, grid: HexGrid, table: DistanceTable,
                    weights: DifficultyWeights,
                    policy: PolicyParams | None = None,
                    deterministic: bool = True) -> Controller:
    if method == "rule1":
        return Rule1Controller(grid, table, weights)
    if method == "rule2":
        return Rule2Controller()
    if method == "rl":
        if policy is None:
            raise ValueError("RL controller requires a policy checkpoint")
        return RLController(policy, deterministic=deterministic)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")

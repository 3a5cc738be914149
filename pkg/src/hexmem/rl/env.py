"""Session environment for training: difficulty in, (state, reward, done) out.

A session is a fixed number of trials. The first trial is always served at
medium difficulty (no state exists yet); every subsequent trial's
difficulty is the agent's action. The state after each trial is the pair
(difficulty actually served, score achieved).
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .. import taskdb
from ..simplayer import SimPlayer, respond
from .rewards import RewardSpec, reward

TRIALS_PER_SESSION = 20
INITIAL_DIFFICULTY = 0.5


class SessionEnv:
    def __init__(self, db: taskdb.TaskDatabase, reward_spec: RewardSpec,
                 rng: np.random.Generator,
                 trials_per_session: int = TRIALS_PER_SESSION,
                 exclusion_window: int = taskdb.EXCLUSION_WINDOW):
        self.db = db
        self.reward_spec = reward_spec
        self.rng = rng
        self.trials_per_session = trials_per_session
        self.exclusion_window = exclusion_window
        self.player: SimPlayer | None = None
        self.trials_played = 0
        self.last_lookup: taskdb.LookupResult | None = None
        self._exclusions: deque[int] = deque(maxlen=exclusion_window)

    @property
    def done(self) -> bool:
        return self.trials_played >= self.trials_per_session

    def reset(self, player: SimPlayer) -> np.ndarray:
        """Start a session: play the fixed medium-difficulty first trial and
        return the resulting state."""
        self.player = player
        self.trials_played = 0
        self._exclusions = deque(maxlen=self.exclusion_window)
        state, _ = self._play_trial(INITIAL_DIFFICULTY)
        return state

    def step(self, action: float) -> tuple[np.ndarray, float, bool]:
        if self.player is None:
            raise RuntimeError("call reset() before step()")
        if self.done:
            raise RuntimeError("session exhausted; call reset()")
        action = float(min(max(action, 0.0), 1.0))
        state, r = self._play_trial(action)
        return state, r, self.done

    def _play_trial(self, difficulty: float) -> tuple[np.ndarray, float]:
        found = taskdb.lookup(self.db, difficulty, self._exclusions, self.rng)
        self.last_lookup = found
        self._exclusions.append(found.task_id)
        outcome = respond(self.player, found.task, found.difficulty,
                          trial_index=self.trials_played)
        self.trials_played += 1
        r = reward(self.reward_spec, outcome.score, found.difficulty)
        return np.array([found.difficulty, outcome.score]), r

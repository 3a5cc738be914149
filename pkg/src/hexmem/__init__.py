"""hexmem: an adaptive visual working memory game on a hexagonal grid,
with a continuous difficulty metric and RL-driven difficulty adjustment."""

__version__ = "0.1.0"

from .hexgrid import HexGrid, DistanceTable, build_distance_table
from .taskmodel import (
    DifficultyWeights,
    MemoryTask,
    TaskFeatures,
    TrialOutcome,
    difficulty,
    extract_features,
    score_trial,
)

__all__ = [
    "HexGrid", "DistanceTable", "build_distance_table",
    "DifficultyWeights", "MemoryTask", "TaskFeatures", "TrialOutcome",
    "difficulty", "extract_features", "score_trial",
]

import numpy as np
import pytest

from hexmem import taskdb
from hexmem.hexgrid import HexGrid, build_distance_table
from hexmem.taskmodel import DifficultyWeights, MemoryTask


@pytest.fixture(scope="session")
def grid():
    return HexGrid()


@pytest.fixture(scope="session")
def table(grid):
    return build_distance_table(grid)


@pytest.fixture(scope="session")
def weights():
    return DifficultyWeights()


@pytest.fixture(scope="session")
def small_db(grid, table, weights):
    """2000 tasks per stratum: fast to build, dense enough for lookups."""
    return taskdb.build(grid, table, weights, per_stratum=2000, seed=7)


def random_task(rng: np.random.Generator, grid: HexGrid, n_t: int | None = None) -> MemoryTask:
    if n_t is None:
        n_t = int(rng.integers(4, 15))
    cells = rng.choice(grid.size, size=n_t, replace=False)
    return MemoryTask(tuple(int(c) for c in cells))

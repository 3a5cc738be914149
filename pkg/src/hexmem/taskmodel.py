"""Memory tasks, their difficulty features, and trial scoring.

Difficulty is a weighted combination of three normalized features of the
target set: how many targets there are, how many connected clusters they
form, and how spread out they are on the board.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .hexgrid import DistanceTable, HexGrid

MIN_TARGETS = 4
MAX_TARGETS = 14

# Saturation points for the cluster and spread features, calibrated on the
# 6x6 board so the combined metric covers [0, 1] densely: 9+ clusters count
# as maximally fragmented, and a mean pairwise gap of 3 intermediate hexes
# as maximally spread (the board-wide maximum gap is 7).
COMPONENT_SATURATION = 9
SPREAD_SATURATION = 3.0


class ProtocolError(ValueError):
    """A recall submission that violates the click protocol."""


@dataclass(frozen=True)
class MemoryTask:
    """An unordered set of target cells, stored sorted."""

    targets: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "targets", tuple(sorted(self.targets)))
        n = len(self.targets)
        if not MIN_TARGETS <= n <= MAX_TARGETS:
            raise ValueError(f"task needs {MIN_TARGETS}..{MAX_TARGETS} targets, got {n}")
        if len(set(self.targets)) != n:
            raise ValueError("duplicate target cells")

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    def validate_on(self, grid: HexGrid) -> None:
        for t in self.targets:
            grid.check_cell(t)

    def bitmask(self) -> int:
        mask = 0
        for t in self.targets:
            mask |= 1 << t
        return mask

    @classmethod
    def from_bitmask(cls, mask: int) -> "MemoryTask":
        return cls(tuple(i for i in range(mask.bit_length()) if mask >> i & 1))


@dataclass(frozen=True)
class TaskFeatures:
    n_t: int
    n_c: int
    d_raw: float
    f_t: float
    f_c: float
    f_d: float


@dataclass(frozen=True)
class DifficultyWeights:
    """Feature weights (targets, components, spread); must sum to 1."""

    alpha_targets: float = 1 / 3
    alpha_components: float = 1 / 3
    alpha_spread: float = 1 / 3

    def __post_init__(self) -> None:
        a = (self.alpha_targets, self.alpha_components, self.alpha_spread)
        if any(x < 0 for x in a):
            raise ValueError(f"weights must be nonnegative, got {a}")
        if abs(sum(a) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {sum(a)!r}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha_targets, self.alpha_components, self.alpha_spread)

    def fingerprint(self) -> int:
        """64-bit hash of the weights plus the metric's calibration
        constants; any change invalidates difficulty values computed
        before it.
        """
        text = "|".join(
            f"{v:.17g}"
            for v in (*self.as_tuple(), COMPONENT_SATURATION, SPREAD_SATURATION)
        )
        digest = hashlib.sha256(text.encode()).digest()
        return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class TrialOutcome:
    clicks: tuple[int, ...]
    correct: int
    score: float
    win: bool


def component_count(grid: HexGrid, targets: tuple[int, ...]) -> int:
    """Connected components of the adjacency subgraph induced by targets,
    via union-find.
    """
    index = {t: i for i, t in enumerate(targets)}
    parent = list(range(len(targets)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for t in targets:
        for nb in grid.neighbors(t):
            j = index.get(nb)
            if j is not None:
                ri, rj = find(index[t]), find(j)
                if ri != rj:
                    parent[ri] = rj
    return sum(1 for i in range(len(targets)) if find(i) == i)


def extract_features(grid: HexGrid, table: DistanceTable, task: MemoryTask) -> TaskFeatures:
    """Compute (n_t, n_c, d_raw) and their normalized forms for a task."""
    task.validate_on(grid)
    targets = task.targets
    n_t = len(targets)
    n_c = component_count(grid, targets)
    d_raw = 0
    for i in range(n_t):
        for j in range(i + 1, n_t):
            d_raw += table.entries[targets[i], targets[j]]
    pairs = n_t * (n_t - 1) / 2
    f_t = (n_t - MIN_TARGETS) / (MAX_TARGETS - MIN_TARGETS)
    f_c = min((n_c - 1) / (COMPONENT_SATURATION - 1), 1.0)
    f_d = min(d_raw / pairs / SPREAD_SATURATION, 1.0)
    return TaskFeatures(n_t=n_t, n_c=n_c, d_raw=float(d_raw), f_t=f_t, f_c=f_c, f_d=f_d)


def difficulty(features: TaskFeatures, weights: DifficultyWeights) -> float:
    """Weighted combination of the normalized features, in [0, 1]."""
    return (
        weights.alpha_targets * features.f_t
        + weights.alpha_components * features.f_c
        + weights.alpha_spread * features.f_d
    )


def task_difficulty(
    grid: HexGrid, table: DistanceTable, task: MemoryTask, weights: DifficultyWeights
) -> float:
    return difficulty(extract_features(grid, table, task), weights)


def score_trial(task: MemoryTask, clicks: list[int] | tuple[int, ...]) -> TrialOutcome:
    """Score a recall: fraction of targets clicked; a win is a perfect recall.

    Expects exactly n_t distinct clicks (the session layer rejects anything
    else before scoring).
    """
    clicks = tuple(clicks)
    if len(set(clicks)) != len(clicks):
        raise ProtocolError("duplicate clicks")
    if len(clicks) != task.n_targets:
        raise ProtocolError(f"expected {task.n_targets} clicks, got {len(clicks)}")
    correct = len(set(clicks) & set(task.targets))
    score = correct / task.n_targets
    return TrialOutcome(clicks=clicks, correct=correct, score=score, win=score == 1.0)


def write_task_fixture(path, tasks: list[MemoryTask]) -> None:
    """Newline-delimited records, one comma-separated sorted target list per task."""
    with open(path, "w") as fh:
        for task in tasks:
            fh.write(",".join(str(t) for t in task.targets) + "\n")


def read_task_fixture(path) -> list[MemoryTask]:
    tasks = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                tasks.append(MemoryTask(tuple(int(x) for x in line.split(","))))
    return tasks

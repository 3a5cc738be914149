"""Difficulty-indexed task store.

The full task space (all target subsets of size 4..14) holds ~8.3 billion
tasks; storing it verbatim is pointless for lookup quality, so the store
keeps a stratified uniform sample -- a fixed number of distinct random
tasks per target count -- sorted by difficulty for nearest-difficulty
retrieval with an anti-repetition exclusion window.
"""

from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass

import numpy as np

from .hexgrid import DistanceTable, HexGrid
from .taskmodel import (
    MAX_TARGETS,
    MIN_TARGETS,
    COMPONENT_SATURATION,
    SPREAD_SATURATION,
    DifficultyWeights,
    MemoryTask,
    component_count,
)

MAGIC = b"HXDB"
FORMAT_VERSION = 1
DEFAULT_PER_STRATUM = 20_000
DEFAULT_TOLERANCE = 0.01
EXCLUSION_WINDOW = 10

# Difficulties are quantized to 32-bit fixed point so that building,
# saving, and reloading a database all yield identical values.
_FIXED_ONE = 2**32 - 1


def quantize(value: float) -> float:
    return round(value * _FIXED_ONE) / _FIXED_ONE


def total_task_count(n_min: int, n_max: int, cells: int = 36) -> int:
    """Exact number of target subsets with size in [n_min, n_max]."""
    if not 0 <= n_min <= n_max <= cells:
        raise ValueError(f"need 0 <= n_min <= n_max <= {cells}, got ({n_min}, {n_max})")
    return sum(math.comb(cells, k) for k in range(n_min, n_max + 1))


@dataclass(frozen=True)
class _Stratum:
    n_t: int
    masks: np.ndarray  # int64 bitmasks, sorted by (difficulty, mask)
    diffs: np.ndarray  # float64 quantized difficulties, ascending


class TaskDatabase:
    """Sampled tasks sorted by difficulty, with flat ids for exclusion windows."""

    def __init__(self, strata: list[_Stratum], build_seed: int, fingerprint: int,
                 tolerance: float = DEFAULT_TOLERANCE):
        self.strata = strata
        self.build_seed = build_seed
        self.fingerprint = fingerprint
        self.tolerance = tolerance
        masks = np.concatenate([s.masks for s in strata]) if strata else np.empty(0, np.int64)
        diffs = np.concatenate([s.diffs for s in strata]) if strata else np.empty(0, np.float64)
        order = np.lexsort((masks, diffs))
        self._masks = masks[order]
        self._diffs = diffs[order]

    def __len__(self) -> int:
        return len(self._diffs)

    @property
    def difficulties(self) -> np.ndarray:
        return self._diffs

    def task(self, task_id: int) -> MemoryTask:
        return MemoryTask.from_bitmask(int(self._masks[task_id]))

    def task_difficulty(self, task_id: int) -> float:
        return float(self._diffs[task_id])


@dataclass(frozen=True)
class LookupResult:
    task: MemoryTask
    task_id: int
    difficulty: float


def _sample_stratum_masks(n_t: int, per_stratum: int, cells: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Distinct uniform-random size-n_t subsets, as bitmasks in draw order."""
    available = math.comb(cells, n_t)
    if per_stratum > available:
        raise ValueError(f"cannot sample {per_stratum} distinct tasks of size {n_t} "
                         f"(only {available} exist)")
    if per_stratum * 2 > available:
        # Sparse strata: enumerate and subsample without replacement.
        all_masks = np.array(
            [sum(1 << c for c in combo) for combo in itertools.combinations(range(cells), n_t)],
            dtype=np.int64,
        )
        chosen = rng.choice(len(all_masks), size=per_stratum, replace=False)
        return all_masks[chosen]
    seen: set[int] = set()
    out: list[int] = []
    powers = (np.int64(1) << np.arange(cells, dtype=np.int64))
    while len(out) < per_stratum:
        batch = max(per_stratum - len(out), 1024)
        picks = rng.random((batch, cells)).argpartition(n_t, axis=1)[:, :n_t]
        masks = powers[picks].sum(axis=1)
        for m in masks.tolist():
            if m not in seen:
                seen.add(m)
                out.append(m)
                if len(out) == per_stratum:
                    break
    return np.array(out, dtype=np.int64)


def _stratum_difficulties(grid: HexGrid, table: DistanceTable, weights: DifficultyWeights,
                          n_t: int, masks: np.ndarray) -> np.ndarray:
    cells = np.zeros((len(masks), n_t), dtype=np.int64)
    for row, mask in enumerate(masks.tolist()):
        cells[row] = [i for i in range(grid.size) if mask >> i & 1]
    pair_i, pair_j = np.array(list(itertools.combinations(range(n_t), 2))).T
    pairs = n_t * (n_t - 1) / 2
    d_mean = table.entries[cells[:, pair_i], cells[:, pair_j]].sum(axis=1) / pairs
    n_c = np.array([component_count(grid, tuple(row)) for row in cells.tolist()])
    f_t = (n_t - MIN_TARGETS) / (MAX_TARGETS - MIN_TARGETS)
    f_c = np.minimum((n_c - 1) / (COMPONENT_SATURATION - 1), 1.0)
    f_d = np.minimum(d_mean / SPREAD_SATURATION, 1.0)
    a_t, a_c, a_d = weights.as_tuple()
    diffs = a_t * f_t + a_c * f_c + a_d * f_d
    return np.round(diffs * _FIXED_ONE) / _FIXED_ONE


def build(grid: HexGrid, table: DistanceTable, weights: DifficultyWeights,
          per_stratum: int = DEFAULT_PER_STRATUM, seed: int = 0,
          tolerance: float = DEFAULT_TOLERANCE) -> TaskDatabase:
    """Sample per_stratum distinct tasks for each target count and index them
    by difficulty. Deterministic for a given seed.
    """
    if per_stratum < 1:
        raise ValueError("per_stratum must be >= 1")
    rng = np.random.default_rng(seed)
    strata = []
    for n_t in range(MIN_TARGETS, MAX_TARGETS + 1):
        masks = _sample_stratum_masks(n_t, per_stratum, grid.size, rng)
        diffs = _stratum_difficulties(grid, table, weights, n_t, masks)
        order = np.lexsort((masks, diffs))
        strata.append(_Stratum(n_t=n_t, masks=masks[order], diffs=diffs[order]))
    return TaskDatabase(strata, build_seed=seed, fingerprint=weights.fingerprint(),
                        tolerance=tolerance)


def lookup(db: TaskDatabase, target_difficulty: float, exclusions=(),
           rng: np.random.Generator | None = None) -> LookupResult:
    """Task whose difficulty is nearest the target.

    Picks uniformly at random among non-excluded entries within the
    tolerance band around the target; if the band is empty, returns the
    nearest non-excluded entry (lower side wins ties).
    """
    if not 0.0 <= target_difficulty <= 1.0:
        raise ValueError(f"target difficulty {target_difficulty} outside [0, 1]")
    if len(db) == 0:
        raise RuntimeError("task database is empty")
    if rng is None:
        rng = np.random.default_rng()
    diffs = db._diffs
    eps = db.tolerance
    lo = int(np.searchsorted(diffs, target_difficulty - eps, side="left"))
    hi = int(np.searchsorted(diffs, target_difficulty + eps, side="right"))
    if hi > lo:
        # Rejection-sample the band; exclusion windows are tiny, so a few
        # retries beat filtering a possibly large band.
        for _ in range(30):
            idx = lo + int(rng.integers(hi - lo))
            if idx not in exclusions:
                return LookupResult(db.task(idx), idx, float(diffs[idx]))
        candidates = [i for i in range(lo, hi) if i not in exclusions]
        if candidates:
            idx = candidates[int(rng.integers(len(candidates)))]
            return LookupResult(db.task(idx), idx, float(diffs[idx]))
    # Band empty (or fully excluded): widen outward to the nearest entry.
    left, right = lo - 1, hi
    while left >= 0 or right < len(diffs):
        d_left = target_difficulty - diffs[left] if left >= 0 else np.inf
        d_right = diffs[right] - target_difficulty if right < len(diffs) else np.inf
        if d_left <= d_right:
            idx, left = left, left - 1
        else:
            idx, right = right, right + 1
        if idx not in exclusions:
            return LookupResult(db.task(idx), idx, float(diffs[idx]))
    raise RuntimeError("all database entries are excluded")


def save(db: TaskDatabase, path) -> None:
    """Versioned binary layout: header, then per-stratum packed records."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HQQH", FORMAT_VERSION, db.fingerprint,
                             db.build_seed, len(db.strata)))
        for stratum in db.strata:
            fh.write(struct.pack("<BI", stratum.n_t, len(stratum.masks)))
            fixed = np.round(stratum.diffs * _FIXED_ONE).astype(np.uint64)
            for mask, q in zip(stratum.masks.tolist(), fixed.tolist()):
                fh.write(int(mask).to_bytes(5, "little"))
                fh.write(struct.pack("<I", q))


def load(path, weights: DifficultyWeights,
         tolerance: float = DEFAULT_TOLERANCE) -> TaskDatabase:
    """Load a database, refusing files built under different metric settings."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"not a task database file (magic {magic!r})")
        version, fingerprint, seed, n_strata = struct.unpack("<HQQH", fh.read(20))
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported format version {version}")
        if fingerprint != weights.fingerprint():
            raise ValueError(
                "difficulty metric fingerprint mismatch: database was built with "
                "different weights or calibration; rebuild it"
            )
        strata = []
        for _ in range(n_strata):
            n_t, count = struct.unpack("<BI", fh.read(5))
            raw = np.frombuffer(fh.read(count * 9), dtype=np.uint8).reshape(count, 9)
            masks = (raw[:, :5].astype(np.int64)
                     * (np.int64(1) << (8 * np.arange(5, dtype=np.int64)))).sum(axis=1)
            diffs = raw[:, 5:9].copy().view("<u4")[:, 0].astype(np.float64) / _FIXED_ONE
            strata.append(_Stratum(n_t=n_t, masks=masks, diffs=diffs))
    return TaskDatabase(strata, build_seed=seed, fingerprint=fingerprint,
                        tolerance=tolerance)

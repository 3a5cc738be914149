"""Reward functions mapping (score, difficulty) to a scalar signal.

r1 and r2 are piecewise-constant in the score, built around rewarding the
0.7..0.9 band; r3 is a multiplicative score-times-difficulty bonus.
"""

from __future__ import annotations

from dataclasses import dataclass

R3_CONSTANT = 0.35

KINDS = ("r1", "r2", "r3")


@dataclass(frozen=True)
class RewardSpec:
    kind: str = "r1"
    r3_constant: float = R3_CONSTANT

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"reward kind must be one of {KINDS}, got {self.kind!r}")
        if self.r3_constant <= 0:
            raise ValueError("r3 constant must be positive")


def reward(spec: RewardSpec, score: float, difficulty: float) -> float:
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"score {score} outside [0, 1]")
    if not 0.0 <= difficulty <= 1.0:
        raise ValueError(f"difficulty {difficulty} outside [0, 1]")
    if spec.kind == "r1":
        if score > 0.9:
            return 0.0
        if score >= 0.7:
            return 1.0
        return -1.0  # the failure band, including score exactly 0
    if spec.kind == "r2":
        if score > 0.9:
            return -0.5
        if score >= 0.7:
            return 1.0
        if score >= 0.4:
            return -1.0
        return -2.0
    return spec.r3_constant * score * difficulty

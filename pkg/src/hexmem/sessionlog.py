"""Session logs: ordered trial records for one 20-trial session.

Serialized as newline-delimited JSON events (one per line) so a live
service can append and fsync each event as it happens; the same files
feed offline analysis and policy fine-tuning.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict


@dataclass
class TrialRecord:
    trial: int  # 1-based within the session
    targets: tuple[int, ...]
    actual_difficulty: float
    task_id: int | None = None  # id in the task database; None for rule1 tasks
    requested_difficulty: float | None = None  # controller's own metric value
    requested_targets: int | None = None  # rule1's target-count request
    clicks: tuple[int, ...] | None = None
    correct: int | None = None
    score: float | None = None
    win: bool | None = None
    reward: float | None = None
    log_prob: float | None = None  # policy density at the action (RL sessions)
    raw_action: float | None = None  # pre-squash action (RL sessions)
    issued_at: float | None = None
    submitted_at: float | None = None

    @property
    def completed(self) -> bool:
        return self.clicks is not None

    def issued_event(self) -> dict:
        ev = {
            "event": "trial_issued",
            "trial": self.trial,
            "targets": list(self.targets),
            "actual_difficulty": self.actual_difficulty,
        }
        for key in ("task_id", "requested_difficulty", "requested_targets",
                    "log_prob", "raw_action", "issued_at"):
            value = getattr(self, key)
            if value is not None:
                ev[key] = value
        return ev

    def completed_event(self) -> dict:
        ev = {
            "event": "trial_completed",
            "trial": self.trial,
            "clicks": list(self.clicks),
            "correct": self.correct,
            "score": self.score,
            "win": self.win,
            "reward": self.reward,
        }
        if self.submitted_at is not None:
            ev["submitted_at"] = self.submitted_at
        return ev


@dataclass
class SessionLog:
    session_id: str
    method: str  # "rl" | "rule1" | "rule2"
    player_id: str
    seed: int
    n_trials: int = 20
    reward_kind: str = "r1"
    weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    created_at: float | None = None
    trials: list[TrialRecord] = field(default_factory=list)

    @property
    def completed_trials(self) -> list[TrialRecord]:
        return [t for t in self.trials if t.completed]

    @property
    def finished(self) -> bool:
        return len(self.completed_trials) >= self.n_trials

    def scores(self) -> list[float]:
        return [t.score for t in self.completed_trials]

    def mean_score(self) -> float:
        scores = self.scores()
        return sum(scores) / len(scores) if scores else float("nan")

    def win_rate(self) -> float:
        done = self.completed_trials
        return sum(t.win for t in done) / len(done) if done else float("nan")

    def header_event(self) -> dict:
        ev = {
            "event": "session",
            "session_id": self.session_id,
            "method": self.method,
            "player_id": self.player_id,
            "seed": self.seed,
            "n_trials": self.n_trials,
            "reward_kind": self.reward_kind,
            "weights": list(self.weights),
        }
        if self.created_at is not None:
            ev["created_at"] = self.created_at
        return ev

    def to_events(self) -> list[dict]:
        events = [self.header_event()]
        for rec in self.trials:
            events.append(rec.issued_event())
            if rec.completed:
                events.append(rec.completed_event())
        return events

    @classmethod
    def from_events(cls, events: list[dict]) -> "SessionLog":
        if not events or events[0].get("event") != "session":
            raise ValueError("log must start with a session event")
        head = events[0]
        log = cls(
            session_id=head["session_id"],
            method=head["method"],
            player_id=head["player_id"],
            seed=head["seed"],
            n_trials=head["n_trials"],
            reward_kind=head.get("reward_kind", "r1"),
            weights=tuple(head.get("weights", (1 / 3, 1 / 3, 1 / 3))),
            created_at=head.get("created_at"),
        )
        by_trial: dict[int, TrialRecord] = {}
        for ev in events[1:]:
            kind = ev.get("event")
            if kind == "trial_issued":
                rec = TrialRecord(
                    trial=ev["trial"],
                    targets=tuple(ev["targets"]),
                    actual_difficulty=ev["actual_difficulty"],
                    task_id=ev.get("task_id"),
                    requested_difficulty=ev.get("requested_difficulty"),
                    requested_targets=ev.get("requested_targets"),
                    log_prob=ev.get("log_prob"),
                    raw_action=ev.get("raw_action"),
                    issued_at=ev.get("issued_at"),
                )
                by_trial[rec.trial] = rec
                log.trials.append(rec)
            elif kind == "trial_completed":
                rec = by_trial.get(ev["trial"])
                if rec is None:
                    raise ValueError(f"completion for unknown trial {ev['trial']}")
                rec.clicks = tuple(ev["clicks"])
                rec.correct = ev["correct"]
                rec.score = ev["score"]
                rec.win = ev["win"]
                rec.reward = ev["reward"]
                rec.submitted_at = ev.get("submitted_at")
            else:
                raise ValueError(f"unknown event kind {kind!r}")
        return log


def write_session_log(path, log: SessionLog) -> None:
    with open(path, "w") as fh:
        for ev in log.to_events():
            fh.write(json.dumps(ev, sort_keys=True) + "\n")


def read_session_log(path) -> SessionLog:
    with open(path) as fh:
        events = [json.loads(line) for line in fh if line.strip()]
    return SessionLog.from_events(events)


def asdict_record(rec: TrialRecord) -> dict:
    return asdict(rec)

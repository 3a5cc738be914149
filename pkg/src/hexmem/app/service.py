"""Live session service: drives human-played adaptive sessions over HTTP.

Every trial is durably appended to the session's event log before the
response goes out, so a restarted service can rebuild any session by
re-executing its deterministic controller against the logged outcomes.
The server is the only scorer; clients just render and click.
"""

from __future__ import annotations

import os
import secrets
import threading
import time
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .. import taskdb
from ..controllers import Controller, ControllerState, make_controller
from ..hexgrid import DistanceTable, HexGrid
from ..rl.policy import PolicyParams
from ..rl.rewards import RewardSpec, reward as compute_reward
from ..sessionlog import SessionLog, TrialRecord
from ..taskmodel import DifficultyWeights, MemoryTask, score_trial

MEMORIZE_MS = 2000
TRIALS_PER_SESSION = 20


class UnknownSessionError(KeyError):
    pass


class SessionFinishedError(RuntimeError):
    pass


class PolicyUnavailableError(RuntimeError):
    pass


class RecallProtocolError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class LiveSession:
    log: SessionLog
    controller: Controller
    state: ControllerState
    select_rng: np.random.Generator
    log_path: str
    phase: str = "awaiting_recall"  # awaiting_recall | finished
    current_task: MemoryTask | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def trial(self) -> int:
        return len(self.log.trials)


class SessionService:
    def __init__(self, grid: HexGrid, table: DistanceTable, weights: DifficultyWeights,
                 db: taskdb.TaskDatabase, data_dir: str,
                 policy: PolicyParams | None = None,
                 reward_spec: RewardSpec = RewardSpec("r1"),
                 default_method: str = "rule2",
                 session_seed: int | None = None,
                 clock=time.time):
        self.grid = grid
        self.table = table
        self.weights = weights
        self.db = db
        self.policy = policy
        self.reward_spec = reward_spec
        self.default_method = default_method
        self.data_dir = data_dir
        self.clock = clock
        os.makedirs(data_dir, exist_ok=True)
        self._sessions: dict[str, LiveSession] = {}
        self._store_lock = threading.Lock()
        self._seed_rng = (np.random.default_rng(session_seed)
                          if session_seed is not None else None)
        self._counter = 0

    # -- session bookkeeping ------------------------------------------------

    def _new_session_id(self) -> str:
        self._counter += 1
        if self._seed_rng is not None:
            return f"s{self._counter:04d}"
        return secrets.token_urlsafe(9)

    def _new_session_seed(self) -> int:
        if self._seed_rng is not None:
            return int(self._seed_rng.integers(0, 2**63 - 1))
        return int.from_bytes(os.urandom(8), "little") >> 1

    def _log_path(self, session_id: str) -> str:
        return os.path.join(self.data_dir, f"{session_id}.jsonl")

    def _append_event(self, session: LiveSession, event: dict) -> None:
        with open(session.log_path, "a") as fh:
            import json

            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _make_controller(self, method: str) -> Controller:
        if method == "rl" and self.policy is None:
            raise PolicyUnavailableError("no policy checkpoint is loaded")
        return make_controller(method, self.grid, self.table, self.weights,
                               policy=self.policy)

    def _get(self, session_id: str) -> LiveSession:
        with self._store_lock:
            session = self._sessions.get(session_id)
            if session is None:
                session = self._restore(session_id)
                if session is not None:
                    self._sessions[session_id] = session
        if session is None:
            raise UnknownSessionError(session_id)
        return session

    # -- trial flow ----------------------------------------------------------

    def _issue_trial(self, session: LiveSession) -> TrialRecord:
        trial = session.trial + 1
        state = session.state
        if trial > 1:
            last = session.log.trials[-1]
            state = session.controller.next_difficulty(state, last.score)
        requested = state.requested()
        selected = session.controller.select_task(state, self.db, session.select_rng)
        record = TrialRecord(
            trial=trial,
            targets=selected.task.targets,
            actual_difficulty=selected.actual_difficulty,
            task_id=selected.task_id,
            requested_difficulty=(float(requested)
                                  if session.log.method != "rule1" else None),
            requested_targets=(int(requested)
                               if session.log.method == "rule1" else None),
            log_prob=state.last_log_prob if trial > 1 else None,
            raw_action=state.last_raw_action if trial > 1 else None,
            issued_at=self.clock(),
        )
        session.log.trials.append(record)
        session.current_task = selected.task
        session.state = state
        session.phase = "awaiting_recall"
        self._append_event(session, record.issued_event())
        return record

    def _trial_payload(self, session: LiveSession) -> dict:
        record = session.log.trials[-1]
        return {
            "trial": record.trial,
            "n_trials": session.log.n_trials,
            "n_targets": len(record.targets),
            "targets": list(record.targets),
            "memorize_ms": MEMORIZE_MS,
        }

    def create_session(self, method: str | None = None, player_id: str = "human") -> dict:
        method = method or self.default_method
        controller = self._make_controller(method)
        session_id = self._new_session_id()
        seed = self._new_session_seed()
        log = SessionLog(session_id=session_id, method=method, player_id=player_id,
                         seed=seed, n_trials=TRIALS_PER_SESSION,
                         reward_kind=self.reward_spec.kind,
                         weights=self.weights.as_tuple(), created_at=self.clock())
        session = LiveSession(
            log=log,
            controller=controller,
            state=controller.init(),
            select_rng=np.random.default_rng(seed),
            log_path=self._log_path(session_id),
        )
        self._append_event(session, log.header_event())
        self._issue_trial(session)
        with self._store_lock:
            self._sessions[session_id] = session
        return {
            "session_id": session_id,
            "method": method,
            "grid": self.grid.layout_descriptor(),
            "trial": self._trial_payload(session),
        }

    def _validate_clicks(self, task: MemoryTask, clicks: list) -> tuple[int, ...]:
        if not isinstance(clicks, (list, tuple)):
            raise RecallProtocolError("bad_request", "clicks must be a list")
        cells = []
        for c in clicks:
            if not isinstance(c, int) or isinstance(c, bool):
                raise RecallProtocolError("invalid_cell", f"click {c!r} is not a cell index")
            if not 0 <= c < self.grid.size:
                raise RecallProtocolError("invalid_cell", f"cell {c} out of range")
            cells.append(c)
        if len(set(cells)) != len(cells):
            raise RecallProtocolError("duplicate_clicks", "clicks must be distinct cells")
        if len(cells) != task.n_targets:
            raise RecallProtocolError(
                "wrong_click_count",
                f"expected {task.n_targets} clicks, got {len(cells)}")
        return tuple(cells)

    def submit_recall(self, session_id: str, clicks: list) -> dict:
        session = self._get(session_id)
        with session.lock:
            if session.phase == "finished":
                raise SessionFinishedError(session_id)
            record = session.log.trials[-1]
            cells = self._validate_clicks(session.current_task, clicks)
            outcome = score_trial(session.current_task, cells)
            record.clicks = outcome.clicks
            record.correct = outcome.correct
            record.score = outcome.score
            record.win = outcome.win
            record.reward = compute_reward(self.reward_spec, outcome.score,
                                           record.actual_difficulty)
            record.submitted_at = self.clock()
            self._append_event(session, record.completed_event())
            targets = set(record.targets)
            response = {
                "trial": record.trial,
                "outcome": {
                    "correct": outcome.correct,
                    "score": outcome.score,
                    "win": outcome.win,
                },
                "correct_flags": [c in targets for c in outcome.clicks],
            }
            if record.trial >= session.log.n_trials:
                session.phase = "finished"
                session.current_task = None
                response["summary"] = self._summary_payload(session)
            else:
                self._issue_trial(session)
                response["next_trial"] = self._trial_payload(session)
            return response

    def _summary_payload(self, session: LiveSession) -> dict:
        log = session.log
        done = log.completed_trials
        scores = [t.score for t in done]
        trajectory = [t.actual_difficulty for t in done]
        decline = None
        if len(scores) >= 2:
            from ..experiment import pearson_r

            r = pearson_r(np.arange(1, len(scores) + 1, dtype=float),
                          np.array(scores))
            decline = None if np.isnan(r) else float(r)
        return {
            "session_id": log.session_id,
            "method": log.method,
            "trials_completed": len(done),
            "finished": session.phase == "finished",
            "mean_score": (float(np.mean(scores)) if scores else None),
            "win_rate": (float(np.mean([t.win for t in done])) if done else None),
            "difficulty_trajectory": trajectory,
            "decline_correlation": decline,
        }

    def summary(self, session_id: str) -> dict:
        session = self._get(session_id)
        with session.lock:
            return self._summary_payload(session)

    def session_state(self, session_id: str) -> dict:
        """Current trial payload, so an interrupted client can resume."""
        session = self._get(session_id)
        with session.lock:
            payload = {
                "session_id": session_id,
                "method": session.log.method,
                "phase": session.phase,
                "grid": self.grid.layout_descriptor(),
            }
            if session.phase == "awaiting_recall":
                payload["trial"] = self._trial_payload(session)
            else:
                payload["summary"] = self._summary_payload(session)
            return payload

    # -- crash recovery -------------------------------------------------------

    def _restore(self, session_id: str) -> LiveSession | None:
        path = self._log_path(session_id)
        if not os.path.exists(path):
            return None
        from ..sessionlog import read_session_log

        log = read_session_log(path)
        controller = self._make_controller(log.method)
        session = LiveSession(
            log=SessionLog(session_id=log.session_id, method=log.method,
                           player_id=log.player_id, seed=log.seed,
                           n_trials=log.n_trials, reward_kind=log.reward_kind,
                           weights=log.weights, created_at=log.created_at),
            controller=controller,
            state=controller.init(),
            select_rng=np.random.default_rng(log.seed),
            log_path=path,
        )
        # Re-execute the controller against the logged outcomes; selections are
        # deterministic per session seed, so divergence means the log does not
        # belong to this configuration (different policy, weights, or database).
        for logged in log.trials:
            if logged.trial > 1:
                prev = session.log.trials[-1]
                session.state = session.controller.next_difficulty(
                    session.state, prev.score)
            selected = session.controller.select_task(session.state, self.db,
                                                      session.select_rng)
            if selected.task.targets != logged.targets:
                raise RuntimeError(
                    f"session {session_id}: replay diverged at trial "
                    f"{logged.trial}; the service configuration does not match "
                    "the one that produced this log")
            session.current_task = selected.task
            session.log.trials.append(logged)
        completed = len(session.log.completed_trials)
        if completed >= log.n_trials:
            session.phase = "finished"
            session.current_task = None
        elif session.log.trials and session.log.trials[-1].completed:
            # crashed between completing a trial and issuing the next
            self._issue_trial(session)
        return session


class CreateSessionBody(BaseModel):
    method: str | None = None
    player_id: str = "human"


class RecallBody(BaseModel):
    clicks: list[int]


def create_app(service: SessionService):
    """FastAPI wrapper around the service; errors map to protocol codes."""
    app = FastAPI(title="hexmem session service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    @app.exception_handler(UnknownSessionError)
    async def unknown_session(request: Request, exc: UnknownSessionError):
        return JSONResponse(status_code=404, content={"error": "unknown_session"})

    @app.exception_handler(SessionFinishedError)
    async def finished_session(request: Request, exc: SessionFinishedError):
        return JSONResponse(status_code=409, content={"error": "session_finished"})

    @app.exception_handler(RecallProtocolError)
    async def protocol_error(request: Request, exc: RecallProtocolError):
        return JSONResponse(status_code=400,
                            content={"error": exc.code, "detail": str(exc)})

    @app.exception_handler(PolicyUnavailableError)
    async def policy_unavailable(request: Request, exc: PolicyUnavailableError):
        return JSONResponse(status_code=503, content={"error": "policy_unavailable"})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "tasks": len(service.db)}

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        return service.create_session(body.method, body.player_id)

    @app.post("/sessions/{session_id}/recall")
    def submit_recall(session_id: str, body: RecallBody):
        return service.submit_recall(session_id, body.clicks)

    @app.get("/sessions/{session_id}/summary")
    def summary(session_id: str):
        return service.summary(session_id)

    @app.get("/sessions/{session_id}")
    def session_state(session_id: str):
        return service.session_state(session_id)

    return app

// Session flow state machine, free of DOM so the whole game logic is
// testable with a fake frame clock and a scripted server.
//
// Phases:  idle -> memorize -> recall -> feedback -> memorize ... -> done
// Timed transitions (memorize end, feedback end) happen on frame(now)
// calls with frame timestamps, mirroring requestAnimationFrame.
//
// Anti-cheat invariant: target cells live in the machine only during the
// memorize phase; the transition to recall deletes them, so nothing in
// client state reveals the answer. Correctness flags come from the server
// verbatim; the client never scores.

import type {
  GridDescriptor,
  RecallResponse,
  SessionApi,
  SessionSummary,
  TrialPayload,
} from "./api.js";

export type Phase =
  | "idle"
  | "memorize"
  | "recall"
  | "feedback"
  | "finishing"
  | "done"
  | "error";

export interface FeedbackCell {
  cell: number;
  correct: boolean;
}

export interface ViewModel {
  phase: Phase;
  trial: number | null;
  nTrials: number | null;
  nTargets: number | null;
  memorizeTargets: number[]; // populated only in the memorize phase
  selected: number[]; // recall click buffer, in click order
  feedback: FeedbackCell[]; // server-reported per-click correctness
  lastScore: number | null;
  scores: number[];
  summary: SessionSummary | null;
  errorMessage: string | null;
  canSubmit: boolean;
  memorizeRemainingMs: number | null;
}

interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const STORAGE_KEY = "hexmem.session";
const FEEDBACK_MS = 1200;

export class SessionMachine {
  phase: Phase = "idle";
  grid: GridDescriptor | null = null;
  sessionId: string | null = null;
  method: string | null = null;
  readonly scores: number[] = [];
  // measured memorize-phase durations (frame timestamps), for conformance
  readonly memorizeDurations: number[] = [];

  private trial: TrialPayload | null = null;
  private memorizeTargets: number[] = [];
  private memorizeStart: number | null = null;
  private feedbackStart: number | null = null;
  private selected: number[] = [];
  private feedbackCells: FeedbackCell[] = [];
  private lastResponse: RecallResponse | null = null;
  private summaryData: SessionSummary | null = null;
  private errorMessage: string | null = null;
  private inFlight = false;
  private lastScore: number | null = null;

  constructor(
    private readonly api: SessionApi,
    private readonly opts: {
      feedbackMs?: number;
      storage?: StorageLike | null;
      onChange?: () => void;
    } = {},
  ) {}

  private notify(): void {
    this.opts.onChange?.();
  }

  private get storage(): StorageLike | null {
    return this.opts.storage ?? null;
  }

  private get feedbackMs(): number {
    return this.opts.feedbackMs ?? FEEDBACK_MS;
  }

  async start(method?: string): Promise<void> {
    const created = await this.api.createSession(method);
    this.sessionId = created.session_id;
    this.method = created.method;
    this.grid = created.grid;
    this.storage?.setItem(STORAGE_KEY, created.session_id);
    this.scores.length = 0;
    this.memorizeDurations.length = 0;
    this.summaryData = null;
    this.lastScore = null;
    this.enterMemorize(created.trial);
    this.notify();
  }

  /** Pick up an interrupted session at the server's recorded trial.
   * Returns false when there is nothing to resume. */
  async resume(sessionId?: string): Promise<boolean> {
    const id = sessionId ?? this.storage?.getItem(STORAGE_KEY) ?? null;
    if (!id) {
      return false;
    }
    let state;
    try {
      state = await this.api.state(id);
    } catch {
      this.storage?.removeItem(STORAGE_KEY);
      return false;
    }
    this.sessionId = id;
    this.method = state.method;
    this.grid = state.grid;
    if (state.phase === "awaiting_recall" && state.trial) {
      this.enterMemorize(state.trial); // re-memorize the open trial
    } else {
      this.summaryData = state.summary ?? (await this.api.summary(id));
      this.phase = "done";
    }
    this.notify();
    return true;
  }

  private enterMemorize(trial: TrialPayload): void {
    this.trial = trial;
    this.memorizeTargets = [...trial.targets];
    this.memorizeStart = null;
    this.feedbackStart = null;
    this.selected = [];
    this.feedbackCells = [];
    this.errorMessage = null;
    this.phase = "memorize";
  }

  /** Advance timed phases; `now` is a frame timestamp in ms. */
  frame(now: number): void {
    if (this.phase === "memorize" && this.trial) {
      if (this.memorizeStart === null) {
        this.memorizeStart = now;
      } else if (now - this.memorizeStart >= this.trial.memorize_ms) {
        this.memorizeDurations.push(now - this.memorizeStart);
        this.memorizeTargets = []; // targets must not survive into recall
        this.memorizeStart = null;
        this.phase = "recall";
        this.notify();
      }
    } else if (this.phase === "feedback") {
      if (this.feedbackStart === null) {
        this.feedbackStart = now;
      } else if (now - this.feedbackStart >= this.feedbackMs) {
        this.feedbackStart = null;
        this.advanceAfterFeedback();
      }
    }
  }

  private advanceAfterFeedback(): void {
    const response = this.lastResponse;
    this.lastResponse = null;
    if (response?.next_trial) {
      this.enterMemorize(response.next_trial);
      this.notify();
      return;
    }
    this.phase = "finishing";
    this.notify();
    void this.finish();
  }

  private async finish(): Promise<void> {
    if (!this.sessionId) {
      return;
    }
    try {
      // the done screen always shows the server's summary endpoint verbatim
      this.summaryData = await this.api.summary(this.sessionId);
      this.phase = "done";
    } catch (err) {
      this.errorMessage = `could not fetch the session summary: ${String(err)}`;
      this.phase = "error";
    }
    this.notify();
  }

  /** Toggle a cell in the recall buffer (re-clicking deselects). */
  click(cell: number): void {
    if (this.phase !== "recall" || this.inFlight || !this.trial) {
      return;
    }
    const at = this.selected.indexOf(cell);
    if (at >= 0) {
      this.selected.splice(at, 1);
    } else if (this.selected.length < this.trial.n_targets) {
      this.selected.push(cell);
    }
    this.notify();
  }

  get canSubmit(): boolean {
    return (
      this.phase === "recall" &&
      !this.inFlight &&
      this.trial !== null &&
      this.selected.length === this.trial.n_targets
    );
  }

  /** Submit the recall; on network failure the click buffer is kept and the
   * machine stays in recall with an error message (retry = submit again). */
  async submit(): Promise<void> {
    if (!this.canSubmit || !this.sessionId) {
      return;
    }
    this.inFlight = true;
    this.errorMessage = null;
    this.notify();
    let response: RecallResponse;
    try {
      response = await this.api.submitRecall(this.sessionId, [...this.selected]);
    } catch (err) {
      this.inFlight = false;
      this.errorMessage = `submission failed, check the connection and retry: ${String(err)}`;
      this.notify();
      return;
    }
    this.inFlight = false;
    this.lastResponse = response;
    this.lastScore = response.outcome.score;
    this.scores.push(response.outcome.score);
    this.feedbackCells = this.selected.map((cell, i) => ({
      cell,
      correct: response.correct_flags[i] ?? false,
    }));
    this.selected = [];
    this.phase = "feedback";
    this.notify();
  }

  view(): ViewModel {
    return {
      phase: this.phase,
      trial: this.trial?.trial ?? null,
      nTrials: this.trial?.n_trials ?? null,
      nTargets: this.trial?.n_targets ?? null,
      memorizeTargets: this.phase === "memorize" ? [...this.memorizeTargets] : [],
      selected: [...this.selected],
      feedback: this.phase === "feedback" ? [...this.feedbackCells] : [],
      lastScore: this.lastScore,
      scores: [...this.scores],
      summary: this.summaryData,
      errorMessage: this.errorMessage,
      canSubmit: this.canSubmit,
      memorizeRemainingMs: null,
    };
  }
}

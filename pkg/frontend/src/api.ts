// Typed client for the session service. The server is authoritative for
// scoring; this module only moves JSON.

export interface GridDescriptor {
  rows: number;
  cols: number;
  layout: string; // "odd-r": odd rows shifted half a cell right
  orientation: string; // "pointy"
  indexing: string; // "row-major"
}

export interface TrialPayload {
  trial: number;
  n_trials: number;
  n_targets: number;
  targets: number[];
  memorize_ms: number;
}

export interface CreateSessionResponse {
  session_id: string;
  method: string;
  grid: GridDescriptor;
  trial: TrialPayload;
}

export interface TrialOutcome {
  correct: number;
  score: number;
  win: boolean;
}

export interface SessionSummary {
  session_id: string;
  method: string;
  trials_completed: number;
  finished: boolean;
  mean_score: number | null;
  win_rate: number | null;
  difficulty_trajectory: number[];
  decline_correlation: number | null;
}

export interface RecallResponse {
  trial: number;
  outcome: TrialOutcome;
  correct_flags: boolean[];
  next_trial?: TrialPayload;
  summary?: SessionSummary;
}

export interface SessionState {
  session_id: string;
  method: string;
  phase: "awaiting_recall" | "finished";
  grid: GridDescriptor;
  trial?: TrialPayload;
  summary?: SessionSummary;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail?: string,
  ) {
    super(detail ? `${code}: ${detail}` : code);
  }
}

export interface SessionApi {
  createSession(method?: string): Promise<CreateSessionResponse>;
  submitRecall(sessionId: string, clicks: number[]): Promise<RecallResponse>;
  summary(sessionId: string): Promise<SessionSummary>;
  state(sessionId: string): Promise<SessionState>;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class HexmemClient implements SessionApi {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      throw new ApiError(resp.status, body.error ?? `http_${resp.status}`, body.detail);
    }
    return body as T;
  }

  createSession(method?: string): Promise<CreateSessionResponse> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(method ? { method } : {}),
    });
  }

  submitRecall(sessionId: string, clicks: number[]): Promise<RecallResponse> {
    return this.request(`/sessions/${sessionId}/recall`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ clicks }),
    });
  }

  summary(sessionId: string): Promise<SessionSummary> {
    return this.request(`/sessions/${sessionId}/summary`);
  }

  state(sessionId: string): Promise<SessionState> {
    return this.request(`/sessions/${sessionId}`);
  }

  async healthy(): Promise<boolean> {
    try {
      await this.request("/healthz");
      return true;
    } catch {
      return false;
    }
  }
}

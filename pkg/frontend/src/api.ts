// Typed client for the gateway HTTP API. The console is a pure client:
// every displayed fact comes from these responses.

export interface EventLine {
  seq: number;
  at: number;
  timestamp: string;
  source: string;
  tags: string[];
  text: string;
}

export interface EventsResponse {
  events: EventLine[];
  last_seq: number;
  status: string;
}

export interface ApprovalRow {
  id: string;
  agent: string;
  command: string;
  reason: string;
  status: string;
  created_at: number;
}

export interface PlanStep {
  id: string;
  assignee: string;
  instruction: string;
}

export interface PlanView {
  goal: string;
  steps: PlanStep[];
}

export interface StateResponse {
  clock_ms: number;
  signals: Record<string, boolean | number | string>;
  workpieces: Array<Record<string, unknown>>;
  plan: PlanView | null;
  status: string;
}

export interface SessionInfo {
  id: string;
  scenario: string;
  status: string;
}

export interface ResolveResult {
  ok: boolean;
  conflict: boolean;
  execution?: { status: string; detail: string };
}

export class GatewayClient {
  constructor(private base: string) {}

  private async get<T>(path: string): Promise<T> {
    const response = await fetch(this.base + path);
    if (!response.ok) {
      throw new Error(`GET ${path} -> ${response.status}`);
    }
    return (await response.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) {
      throw new Error(`POST ${path} -> ${response.status}`);
    }
    return (await response.json()) as T;
  }

  startSession(scenario: string, approvalMode?: string, backend?: string):
      Promise<SessionInfo> {
    return this.post<SessionInfo>("/sessions", {
      scenario,
      approval_mode: approvalMode,
      backend,
    });
  }

  sessionStatus(sessionId: string): Promise<SessionInfo & { clock_ms: number }> {
    return this.get(`/sessions/${sessionId}`);
  }

  events(sessionId: string, since: number): Promise<EventsResponse> {
    return this.get(`/sessions/${sessionId}/events?since=${since}`);
  }

  state(sessionId: string): Promise<StateResponse> {
    return this.get(`/sessions/${sessionId}/state`);
  }

  approvals(sessionId: string): Promise<ApprovalRow[]> {
    return this.get<{ approvals: ApprovalRow[] }>(
      `/sessions/${sessionId}/approvals`).then((body) => body.approvals);
  }

  async resolve(approvalId: string, verdict: "approved" | "rejected"):
      Promise<ResolveResult> {
    const response = await fetch(`${this.base}/approvals/${approvalId}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ verdict, actor: "console" }),
    });
    if (response.status === 409) {
      return { ok: false, conflict: true };
    }
    if (!response.ok) {
      throw new Error(`resolve ${approvalId} -> ${response.status}`);
    }
    const body = await response.json();
    return { ok: true, conflict: false, execution: body.execution };
  }

  async submitTask(sessionId: string, text: string):
      Promise<{ plan: PlanView | null; message?: string }> {
    return this.post(`/sessions/${sessionId}/task`, { text });
  }
}

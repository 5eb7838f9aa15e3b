// Typed client for the workbench HTTP JSON API. All UI state derives from
// these endpoints; the fetch implementation is injectable for tests.

export type TurnKind =
  | 'chat'
  | 'tool_call'
  | 'tool_result'
  | 'execution_feedback'
  | 'human_input'
  | 'status';

export interface ToolCallInfo {
  name: string;
  arguments: Record<string, unknown>;
}

export interface ToolResultInfo {
  call_seq: number;
  name: string;
  content: string;
}

export interface Turn {
  seq: number;
  speaker: string;
  content: string;
  kind: TurnKind;
  tool_call?: ToolCallInfo;
  tool_result?: ToolResultInfo;
}

export interface EventEnvelope {
  seq: number;
  session_id: string;
  turn: Turn;
}

export type SessionState =
  | 'running'
  | 'awaiting_human'
  | 'terminated'
  | 'max_rounds'
  | 'human_ended'
  | 'failed';

export interface SessionRecord {
  id: string;
  scenario: string;
  transcript_path: string;
  state: SessionState;
  created_at: string;
}

export interface AskResult {
  answer: string;
  provenance: string[];
  keywords?: string[];
  sequence_text?: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class WorkbenchApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (response.status >= 400) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { error?: string };
        if (body.error) detail = body.error;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return response;
  }

  async ask(question: string, mode: string): Promise<AskResult> {
    const response = await this.request('/api/ask', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ question, mode }),
    });
    return (await response.json()) as AskResult;
  }

  async createSession(scenario: string, initialMessage: string): Promise<string> {
    const response = await this.request('/api/sessions', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ scenario, initial_message: initialMessage }),
    });
    const body = (await response.json()) as { id: string };
    return body.id;
  }

  async listSessions(): Promise<SessionRecord[]> {
    const response = await this.request('/api/sessions');
    return (await response.json()) as SessionRecord[];
  }

  async sessionState(sessionId: string): Promise<SessionState> {
    const records = await this.listSessions();
    const record = records.find((r) => r.id === sessionId);
    if (!record) throw new ApiError(404, `unknown session ${sessionId}`);
    return record.state;
  }

  /** Turns with seq strictly greater than `since`, in seq order. */
  async pollEvents(sessionId: string, since: number): Promise<EventEnvelope[]> {
    const response = await this.request(
      `/api/sessions/${sessionId}/events?since=${since}`,
    );
    return (await response.json()) as EventEnvelope[];
  }

  /** Resolves on 204; throws ApiError(409) when the session is not awaiting input. */
  async submitInput(sessionId: string, text: string): Promise<void> {
    await this.request(`/api/sessions/${sessionId}/input`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ text }),
    });
  }

  async graphExport(format: string = 'jsonl'): Promise<string> {
    const response = await this.request(`/api/graph?format=${format}`);
    return await response.text();
  }
}

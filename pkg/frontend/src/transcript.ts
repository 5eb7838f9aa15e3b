// Transcript view state: cursor-based polling that never drops or repeats a
// turn, the awaiting-human flag gating the input box, and a draft that
// survives rejected submissions.

import { ApiError, SessionState, Turn, WorkbenchApi } from './api.js';

export type SubmitOutcome = 'accepted' | 'not_awaiting' | 'network_error';

export interface TranscriptListener {
  (view: TranscriptStore): void;
}

export class TranscriptStore {
  readonly turns: Turn[] = [];
  awaitingHuman = false;
  sessionState: SessionState = 'running';
  sessionGone = false;
  draft = '';
  notice = '';
  private cursor = -1;
  private pollInFlight = false;
  private listeners: TranscriptListener[] = [];

  constructor(
    private readonly api: WorkbenchApi,
    readonly sessionId: string,
  ) {}

  onChange(listener: TranscriptListener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this);
  }

  /** Highest sequence number rendered so far; -1 before the first turn. */
  get lastSeq(): number {
    return this.cursor;
  }

  /**
   * One poll: append turns past the cursor and refresh the awaiting flag.
   * At most one poll is in flight at a time; overlapping calls no-op.
   */
  async poll(): Promise<void> {
    if (this.pollInFlight || this.sessionGone) return;
    this.pollInFlight = true;
    try {
      const events = await this.api.pollEvents(this.sessionId, this.cursor);
      for (const event of events) {
        if (event.seq <= this.cursor) continue; // server must not, but never double-render
        this.turns.push(event.turn);
        this.cursor = event.seq;
      }
      this.sessionState = await this.api.sessionState(this.sessionId);
      this.awaitingHuman = this.sessionState === 'awaiting_human';
      this.emit();
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        this.sessionGone = true;
        this.emit();
      }
      // other failures: keep state, next poll retries
    } finally {
      this.pollInFlight = false;
    }
  }

  /**
   * Submit the draft. On 204 the draft clears and the box disables until the
   * next awaiting_human; on 409 (or a network failure) the draft survives so
   * nothing typed is lost.
   */
  async submit(): Promise<SubmitOutcome> {
    const text = this.draft;
    try {
      await this.api.submitInput(this.sessionId, text);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this.notice = 'Session is not awaiting input';
        this.emit();
        return 'not_awaiting';
      }
      this.notice = 'Network error; input kept, try again';
      this.emit();
      return 'network_error';
    }
    this.draft = '';
    this.notice = '';
    this.awaitingHuman = false;
    this.emit();
    return 'accepted';
  }
}

export function startPolling(
  store: TranscriptStore,
  intervalMs = 1000,
): () => void {
  let alive = true;
  const tick = async () => {
    if (!alive) return;
    await store.poll();
  };
  void tick();
  const interval = setInterval(tick, intervalMs);
  return () => {
    alive = false;
    clearInterval(interval);
  };
}

import { ApiError, DialogueClient } from './api.js';
import type { ServerError, StagedMedia, UiSessionState } from './types.js';

type Listener = (state: UiSessionState) => void;

function initialState(): UiSessionState {
  return {
    sessionId: null,
    rounds: [],
    status: 'disconnected',
    pending: false,
    health: null,
    lastError: null,
  };
}

/**
 * Client-side session state. The server transcript is the source of
 * truth: rounds are rebuilt from GET /v1/sessions/{id} after every
 * reply, never mutated locally. At most one turn is in flight; sends
 * arriving while pending are queued in order.
 */
export class SessionController {
  private state: UiSessionState = initialState();
  private queue: StagedMedia[] = [];
  private latencies = new Map<number, number>();
  private audioLabels = new Map<number, string>();
  private listeners: Listener[] = [];

  constructor(private readonly client: DialogueClient) {}

  getState(): UiSessionState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    listener(this.state);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(patch: Partial<UiSessionState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  async start(): Promise<void> {
    this.update({ status: 'connecting', lastError: null });
    try {
      const health = await this.client.health();
      const sessionId = await this.client.createSession();
      this.latencies.clear();
      this.audioLabels.clear();
      this.queue = [];
      this.update({ sessionId, health, rounds: [], status: 'ready', pending: false });
    } catch (err) {
      this.update({ status: 'error', lastError: toServerError(err) });
    }
  }

  /** Queue-or-run: only one request per session is ever in flight. */
  send(media: StagedMedia): void {
    if (this.state.pending) {
      this.queue.push(media);
      return;
    }
    void this.run(media);
  }

  get queuedCount(): number {
    return this.queue.length;
  }

  private async run(media: StagedMedia): Promise<void> {
    if (!this.state.sessionId) {
      this.update({ lastError: { code: 'NoSession', message: 'start a session first' } });
      return;
    }
    this.update({ pending: true, lastError: null });
    const started = performance.now();
    try {
      const reply = await this.client.postTurn(this.state.sessionId, media);
      this.latencies.set(reply.round_index, Math.round(performance.now() - started));
      this.audioLabels.set(reply.round_index, media.audioName);
      await this.syncTranscript();
    } catch (err) {
      // a failed turn must not touch rendered history
      this.update({ lastError: toServerError(err) });
    } finally {
      this.update({ pending: false });
      const next = this.queue.shift();
      if (next) {
        void this.run(next);
      }
    }
  }

  async syncTranscript(): Promise<void> {
    if (!this.state.sessionId) {
      return;
    }
    const transcript = await this.client.transcript(this.state.sessionId);
    this.update({
      rounds: transcript.rounds.map((r) => ({
        roundIndex: r.round_index,
        emotion: r.emotion,
        text: r.text,
        dropped: r.dropped,
        latencyMs: this.latencies.get(r.round_index) ?? 0,
        audioLabel: this.audioLabels.get(r.round_index) ?? '',
      })),
    });
  }
}

function toServerError(err: unknown): ServerError {
  if (err instanceof ApiError) {
    return err.body;
  }
  return { code: 'NetworkError', message: err instanceof Error ? err.message : String(err) };
}

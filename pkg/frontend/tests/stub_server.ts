import type { FetchLike } from '../src/api.js';
import type { TranscriptRound } from '../src/types.js';

interface StubOptions {
  replies?: Array<{ emotion: string; text: string }>;
  failNextTurn?: { status: number; code: string; message: string };
}

/** In-memory stand-in for the dialogue service, driving the real client. */
export class StubServer {
  sessions = new Map<string, TranscriptRound[]>();
  private counter = 0;
  private options: StubOptions;
  requests: string[] = [];

  constructor(options: StubOptions = {}) {
    this.options = options;
  }

  failNext(status: number, code: string, message: string): void {
    this.options.failNextTurn = { status, code, message };
  }

  fetch: FetchLike = async (input, init) => {
    const method = init?.method ?? 'GET';
    const url = new URL(input, 'http://stub');
    const path = url.pathname;
    this.requests.push(`${method} ${path}`);

    const json = (status: number, body: unknown) =>
      new Response(JSON.stringify(body), {
        status,
        headers: { 'content-type': 'application/json' },
      });

    if (method === 'GET' && path === '/v1/health') {
      return json(200, {
        status: 'ok',
        checkpoint_hash: 'c0ffee00'.repeat(8),
        prompt_set_hash: 'ab12cd34'.repeat(8),
      });
    }
    if (method === 'POST' && path === '/v1/sessions') {
      this.counter += 1;
      const id = `sess-${this.counter}`;
      this.sessions.set(id, []);
      return json(200, { session_id: id });
    }
    const turnMatch = path.match(/^\/v1\/sessions\/([^/]+)\/turns$/);
    if (method === 'POST' && turnMatch) {
      const id = turnMatch[1] ?? '';
      const rounds = this.sessions.get(id);
      if (!rounds) {
        return json(404, { code: 'UnknownSession', message: `no session ${id}` });
      }
      if (this.options.failNextTurn) {
        const failure = this.options.failNextTurn;
        this.options.failNextTurn = undefined;
        return json(failure.status, { code: failure.code, message: failure.message });
      }
      if (!(init?.body instanceof FormData) || !init.body.get('audio')) {
        return json(400, { code: 'DecodeError', message: 'missing audio part' });
      }
      const reply = this.options.replies?.[rounds.length] ?? {
        emotion: 'happy',
        text: 'glad to hear it!',
      };
      const round: TranscriptRound = {
        round_index: rounds.length + 1,
        emotion: reply.emotion,
        text: reply.text,
        created_at: Date.now() / 1000,
        dropped: false,
      };
      rounds.push(round);
      return json(200, { ...reply, round_index: round.round_index, warnings: [] });
    }
    const sessionMatch = path.match(/^\/v1\/sessions\/([^/]+)$/);
    if (sessionMatch) {
      const id = sessionMatch[1] ?? '';
      const rounds = this.sessions.get(id);
      if (!rounds) {
        return json(404, { code: 'UnknownSession', message: `no session ${id}` });
      }
      if (method === 'DELETE') {
        this.sessions.delete(id);
        return json(200, { deleted: true });
      }
      return json(200, { session_id: id, rounds });
    }
    return json(404, { code: 'NotFound', message: path });
  };
}

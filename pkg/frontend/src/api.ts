import type { HealthInfo, ServerError, StagedMedia, Transcript, TurnReply } from './types.js';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ServerError,
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/**
 * Thin client over the dialogue service HTTP API. The fetch function is
 * injectable so tests can run against a stub server.
 */
export class DialogueClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => globalThis.fetch(input, init),
  ) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, '')}${path}`;
  }

  private async parse<T>(resp: Response): Promise<T> {
    if (!resp.ok) {
      let body: ServerError;
      try {
        body = (await resp.json()) as ServerError;
      } catch {
        body = { code: `HTTP${resp.status}`, message: resp.statusText };
      }
      throw new ApiError(resp.status, body);
    }
    return (await resp.json()) as T;
  }

  async health(): Promise<HealthInfo> {
    return this.parse(await this.fetchFn(this.url('/v1/health')));
  }

  async createSession(): Promise<string> {
    const resp = await this.fetchFn(this.url('/v1/sessions'), { method: 'POST' });
    const body = await this.parse<{ session_id: string }>(resp);
    return body.session_id;
  }

  async postTurn(sessionId: string, media: StagedMedia): Promise<TurnReply> {
    const form = new FormData();
    form.append('audio', media.audio, media.audioName);
    if (media.video) {
      form.append('video', media.video, media.videoName ?? 'clip.mp4');
    }
    const resp = await this.fetchFn(this.url(`/v1/sessions/${sessionId}/turns`), {
      method: 'POST',
      body: form,
    });
    return this.parse(resp);
  }

  async transcript(sessionId: string): Promise<Transcript> {
    return this.parse(await this.fetchFn(this.url(`/v1/sessions/${sessionId}`)));
  }

  async deleteSession(sessionId: string): Promise<void> {
    await this.parse(await this.fetchFn(this.url(`/v1/sessions/${sessionId}`), { method: 'DELETE' }));
  }
}

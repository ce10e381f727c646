// HTTP + realtime transport. The socket factory is injectable so tests and
// node environments can supply their own WebSocket implementation.

import type {
  AdminStateView,
  ChartSpec,
  JoinGrant,
  PlayerStateView,
  RenderedView,
  ServerPush,
  ValidationReport,
} from './types.js';

export interface SocketLike {
  send(data: string): void;
  close(): void;
  readyState?: number;
  onopen?: (() => void) | null;
  onmessage?: ((ev: { data: unknown }) => void) | null;
  onclose?: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export class ApiError extends Error {
  constructor(public status: number, public body: unknown) {
    super(`HTTP ${status}: ${JSON.stringify(body)}`);
  }
}

export class GameApi {
  constructor(
    private base: string,
    private token: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async request(method: string, path: string, body?: unknown): Promise<unknown> {
    const resp = await this.fetchFn(`${this.base}${path}`, {
      method,
      headers: { 'x-token': this.token, 'content-type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await resp.text();
    const parsed = text ? safeJson(text) : null;
    if (!resp.ok) throw new ApiError(resp.status, parsed ?? text);
    return parsed;
  }

  async join(session: string, code: string): Promise<JoinGrant> {
    return await this.request('POST', `/sessions/${session}/join`, { code }) as JoinGrant;
  }

  async state(session: string): Promise<PlayerStateView | AdminStateView> {
    return await this.request('GET', `/sessions/${session}/state`) as
      PlayerStateView | AdminStateView;
  }

  async preview(session: string, puzzle: string, spec: ChartSpec):
      Promise<{ ok: true; view: RenderedView } | { ok: false; report: ValidationReport }> {
    const resp = await this.fetchFn(`${this.base}/preview`, {
      method: 'POST',
      headers: { 'x-token': this.token, 'content-type': 'application/json' },
      body: JSON.stringify({ session, puzzle, spec }),
    });
    const body = safeJson(await resp.text());
    if (resp.status === 422) return { ok: false, report: body as ValidationReport };
    if (!resp.ok) throw new ApiError(resp.status, body);
    return { ok: true, view: body as RenderedView };
  }

  /** Evaluate a chart already visible in the caller's mailbox. */
  async renderMessageChart(session: string, seq: number, chart = 0):
      Promise<RenderedView> {
    return await this.request('POST', `/sessions/${session}/render`,
      { seq, chart }) as RenderedView;
  }

  async datasetCsv(puzzle: string, session: string): Promise<string> {
    const resp = await this.fetchFn(
      `${this.base}/puzzles/${puzzle}/dataset.csv?session=${session}`,
      { headers: { 'x-token': this.token } });
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return await resp.text();
  }

  async exportLog(session: string, seed = 0): Promise<string> {
    const resp = await this.fetchFn(
      `${this.base}/sessions/${session}/export?seed=${seed}`,
      { headers: { 'x-token': this.token } });
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return await resp.text();
  }

  async scoreRound(session: string, group: number, round: number): Promise<unknown[]> {
    return await this.request('POST', `/sessions/${session}/score`,
      { group, round }) as unknown[];
  }

  async createSession(session: string, puzzles: string[], roster: string[],
                      rotationSeed = 0): Promise<{ session: string; join_codes: Record<string, string> }> {
    return await this.request('POST', '/sessions', {
      session,
      config: { puzzles, rotation_seed: rotationSeed },
      roster,
    }) as { session: string; join_codes: Record<string, string> };
  }
}

function safeJson(text: string): unknown {
  try {
    return JSON.parse(text);
  } catch {
    return text;
  }
}

/** Realtime channel: sends game events, resolves each with its ack, and
 * funnels every push through one ordered handler. */
export class GameChannel {
  private socket: SocketLike;
  private pending: { resolve: (v: ServerPush) => void; reject: (e: Error) => void }[] = [];
  private nextKey = 1;
  private open: boolean;
  private outbox: string[] = [];

  constructor(
    wsBase: string,
    session: string,
    token: string,
    private onPush: (msg: ServerPush) => void,
    factory: SocketFactory,
    private keyPrefix = `c${Math.floor(Math.random() * 1e9)}`,
  ) {
    this.socket = factory(`${wsBase}/ws?token=${token}&session=${session}`);
    this.session = session;
    this.socket.onmessage = (ev) => this.handle(String(ev.data));
    // readyState 1 = OPEN; sockets without readyState are treated as open
    this.open = this.socket.readyState === undefined || this.socket.readyState === 1;
    this.socket.onopen = () => {
      this.open = true;
      for (const raw of this.outbox.splice(0)) this.socket.send(raw);
    };
  }

  private session: string;

  private dispatch(raw: string): void {
    if (this.open) this.socket.send(raw);
    else this.outbox.push(raw);
  }

  private handle(raw: string) {
    const msg = JSON.parse(raw) as ServerPush;
    if (msg.type === 'ack' || msg.type === 'error') {
      const waiter = this.pending.shift();
      if (waiter) {
        if (msg.type === 'ack') waiter.resolve(msg);
        else waiter.reject(new Error(`${msg.reason}: ${msg.detail ?? ''}`));
        return;
      }
    }
    this.onPush(msg);
  }

  submit(type: string, payload: Record<string, unknown>): Promise<ServerPush> {
    return new Promise((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.dispatch(JSON.stringify({
        type,
        session: this.session,
        idempotency_key: `${this.keyPrefix}-${this.nextKey++}`,
        payload,
      }));
    });
  }

  close() {
    this.socket.close();
  }
}

// HTTP bridge client. One POST per outgoing message; one long-lived NDJSON
// stream for events. Replies come back in the POST response and are never
// replayed on the stream, so stream sequence numbers stay gapless.

import { LineBuffer } from "./ndjson.js";
import { parseServerLine } from "./wire.js";
import type { ClientMessage, ServerMessage } from "./wire.js";

export type ConnectionStatus = "connecting" | "live" | "paused" | "closed";

export interface GatewayEvents {
  onMessage: (msg: ServerMessage) => void;
  onStatus: (status: ConnectionStatus) => void;
  onProtocolError?: (detail: string) => void;
}

const BACKOFF_START_MS = 500;
const BACKOFF_CAP_MS = 10_000;

export class GatewayClient {
  private sessionId: string | null = null;
  private closed = false;
  private abort: AbortController | null = null;

  constructor(
    private baseUrl: string,
    private events: GatewayEvents,
    private fetchFn: typeof fetch = fetch,
    private delay: (ms: number) => Promise<void> = (ms) => new Promise((r) => setTimeout(r, ms)),
  ) {}

  get session(): string | null {
    return this.sessionId;
  }

  async connect(sessionId?: string): Promise<Record<string, unknown>> {
    this.events.onStatus("connecting");
    const msg: ClientMessage =
      sessionId === undefined ? { type: "hello" } : { type: "hello", session: sessionId };
    const welcome = await this.post(msg);
    this.sessionId = String(welcome.session);
    void this.streamLoop();
    return welcome;
  }

  async send(msg: ClientMessage): Promise<Record<string, unknown>> {
    if (this.sessionId === null) throw new Error("not connected");
    return this.post({ ...msg, session: this.sessionId });
  }

  close(): void {
    this.closed = true;
    this.abort?.abort();
    this.events.onStatus("closed");
  }

  private async post(msg: object): Promise<Record<string, unknown>> {
    const res = await this.fetchFn(`${this.baseUrl}/api/msg`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(msg),
    });
    const body = (await res.json()) as Record<string, unknown>;
    if (!res.ok || body.ok !== true) {
      throw new Error(typeof body.error === "string" ? body.error : `http ${res.status}`);
    }
    return body;
  }

  private async streamLoop(): Promise<void> {
    let backoffMs = BACKOFF_START_MS;
    while (!this.closed) {
      try {
        this.abort = new AbortController();
        const res = await this.fetchFn(`${this.baseUrl}/api/stream/${this.sessionId}`, {
          signal: this.abort.signal,
        });
        if (!res.ok || res.body === null) throw new Error(`stream http ${res.status}`);
        this.events.onStatus("live");
        backoffMs = BACKOFF_START_MS;
        await this.pump(res.body);
      } catch {
        // drop through to the retry path
      }
      if (this.closed) break;
      this.events.onStatus("paused");
      await this.delay(backoffMs);
      backoffMs = Math.min(backoffMs * 2, BACKOFF_CAP_MS);
    }
  }

  private async pump(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    const lines = new LineBuffer();
    for (;;) {
      const { done, value } = await reader.read();
      if (done) return;
      for (const line of lines.feed(decoder.decode(value, { stream: true }))) {
        this.deliver(line);
      }
    }
  }

  private deliver(line: string): void {
    try {
      this.events.onMessage(parseServerLine(line));
    } catch (err) {
      this.events.onProtocolError?.(err instanceof Error ? err.message : String(err));
    }
  }
}

/** Server-sent event consumption with sequence tracking and auto-resume.
 *
 * The stream enforces the per-session sequence contract: events arrive in
 * order with no gaps. Duplicates (at-least-once delivery) are dropped; a
 * detected gap or a broken connection triggers a reconnect from the last
 * seen sequence number, so nothing is ever silently skipped.
 */

import type { ConnectionState, UiEventWire } from "./types.js";
import type { FetchLike } from "./client.js";

export interface StreamCallbacks {
  onEvent(event: UiEventWire): void;
  onStatus(state: ConnectionState): void;
}

/** Incremental SSE frame parser; feed it chunks, it emits `data:` payloads. */
export class SseParser {
  private buffer = "";

  push(chunk: string): string[] {
    this.buffer += chunk;
    const payloads: string[] = [];
    let boundary = this.buffer.indexOf("\n\n");
    while (boundary >= 0) {
      const frame = this.buffer.slice(0, boundary);
      this.buffer = this.buffer.slice(boundary + 2);
      const data = frame
        .split("\n")
        .filter((line) => line.startsWith("data:"))
        .map((line) => line.slice(5).trimStart())
        .join("\n");
      if (data) {
        payloads.push(data);
      }
      boundary = this.buffer.indexOf("\n\n");
    }
    return payloads;
  }
}

export interface EventStreamOptions {
  fetchFn?: FetchLike;
  retryDelayMs?: number;
  /** Called to schedule a reconnect; injectable for tests. */
  schedule?: (fn: () => void, delayMs: number) => void;
}

export class EventStream {
  private lastSeq: number;
  private closed = false;
  private abort: AbortController | null = null;
  private readonly fetchFn: FetchLike;
  private readonly retryDelayMs: number;
  private readonly schedule: (fn: () => void, delayMs: number) => void;

  constructor(
    private readonly urlFor: (since: number) => string,
    since: number,
    private readonly callbacks: StreamCallbacks,
    options: EventStreamOptions = {},
  ) {
    this.lastSeq = since;
    this.fetchFn = options.fetchFn ?? ((url, init) => fetch(url, init));
    this.retryDelayMs = options.retryDelayMs ?? 1000;
    this.schedule = options.schedule ?? ((fn, delay) => setTimeout(fn, delay));
  }

  get lastEventSeq(): number {
    return this.lastSeq;
  }

  start(): void {
    void this.connect();
  }

  close(): void {
    this.closed = true;
    this.abort?.abort();
    this.callbacks.onStatus("closed");
  }

  private async connect(): Promise<void> {
    if (this.closed) {
      return;
    }
    this.callbacks.onStatus("connecting");
    this.abort = new AbortController();
    try {
      const response = await this.fetchFn(this.urlFor(this.lastSeq), {
        signal: this.abort.signal,
        headers: { Accept: "text/event-stream" },
      });
      if (!response.ok || !response.body) {
        throw new Error(`event stream failed with status ${response.status}`);
      }
      this.callbacks.onStatus("live");
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      const parser = new SseParser();
      for (;;) {
        const { done, value } = await reader.read();
        if (done) {
          break;
        }
        for (const payload of parser.push(decoder.decode(value, { stream: true }))) {
          if (!this.deliver(payload)) {
            reader.cancel().catch(() => undefined);
            return; // gap detected; a reconnect is already scheduled
          }
        }
      }
    } catch {
      // fall through to reconnect below
    }
    if (!this.closed) {
      this.reconnect();
    }
  }

  /** Returns false when a sequence gap forces a reconnect. */
  private deliver(payload: string): boolean {
    let event: UiEventWire;
    try {
      event = JSON.parse(payload) as UiEventWire;
    } catch {
      return true; // not an event frame; ignore
    }
    if (typeof event.seq !== "number") {
      return true;
    }
    if (event.seq <= this.lastSeq) {
      return true; // duplicate from an at-least-once boundary
    }
    if (event.seq > this.lastSeq + 1) {
      this.reconnect(); // gap: resume from lastSeq replays the missing span
      return false;
    }
    this.lastSeq = event.seq;
    this.callbacks.onEvent(event);
    return true;
  }

  private reconnect(): void {
    if (this.closed) {
      return;
    }
    this.abort?.abort();
    this.callbacks.onStatus("reconnecting");
    this.schedule(() => void this.connect(), this.retryDelayMs);
  }
}

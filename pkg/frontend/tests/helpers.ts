/** A scripted in-memory stand-in for the session service, speaking the same
 * wire formats (JSON bodies, problem details, SSE frames) over an injected
 * fetch. Behavior is driven by fixtures captured from the real engine.
 */

import type { FetchLike } from "../src/client.js";
import type { PanelsWire, UiEventWire } from "../src/types.js";

interface StreamPort {
  enqueue(frame: string): void;
  close(): void;
}

export class FakeService {
  panels: PanelsWire;
  events: UiEventWire[];
  requests: string[] = [];
  panelsRequests = 0;
  /** Scripted reaction to DELETE /needs/{id}. */
  onDelete: ((needId: string) => void) | null = null;
  /** When set, the next DELETE fails with this problem document. */
  failNextDelete: { status: number; code: string; detail: string } | null = null;
  private ports: StreamPort[] = [];

  constructor(panels: PanelsWire, events: UiEventWire[] = []) {
    this.panels = panels;
    this.events = [...events];
  }

  /** Push one event to history and to every connected stream. */
  emit(event: UiEventWire): void {
    this.events.push(event);
    const frame = sseFrame(event);
    for (const port of [...this.ports]) {
      port.enqueue(frame);
    }
  }

  /** Push a burst of events as one network chunk, as a single flush would. */
  emitBatch(events: UiEventWire[]): void {
    this.events.push(...events);
    const chunk = events.map(sseFrame).join("");
    for (const port of [...this.ports]) {
      port.enqueue(chunk);
    }
  }

  /** Sever every open event stream, as a dropped connection would. */
  disconnectStreams(): void {
    for (const port of [...this.ports]) {
      port.close();
    }
    this.ports = [];
  }

  get openStreams(): number {
    return this.ports.length;
  }

  readonly fetchFn: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const parsed = new URL(url);
    const path = parsed.pathname;
    this.requests.push(`${method} ${path}${parsed.search}`);

    if (method === "GET" && path.endsWith("/panels")) {
      this.panelsRequests += 1;
      return jsonResponse(200, this.panels);
    }
    if (method === "GET" && path.endsWith("/events")) {
      const since = Number(parsed.searchParams.get("since") ?? "0");
      return this.streamResponse(since, init?.signal ?? null);
    }
    if (method === "POST" && path.endsWith("/messages")) {
      return jsonResponse(202, { accepted: true, seq: 1 });
    }
    if (method === "POST" && path.endsWith("/needs")) {
      return jsonResponse(200, { revision: this.panels.needs.revision + 1 });
    }
    if (method === "DELETE") {
      const needId = path.split("/").pop() ?? "";
      if (this.failNextDelete) {
        const problem = this.failNextDelete;
        this.failNextDelete = null;
        return jsonResponse(problem.status, {
          title: problem.code,
          status: problem.status,
          code: problem.code,
          detail: problem.detail,
        });
      }
      if (!(needId in this.panels.needs.slots)) {
        return jsonResponse(404, {
          title: "UnknownNeedId",
          status: 404,
          code: "UnknownNeedId",
          detail: `no slot with id ${needId}`,
        });
      }
      this.onDelete?.(needId);
      return jsonResponse(200, { revision: this.panels.needs.revision });
    }
    if (method === "PATCH") {
      return jsonResponse(200, { revision: this.panels.needs.revision + 1 });
    }
    return jsonResponse(404, {
      title: "NotFound",
      status: 404,
      code: "NotFound",
      detail: `no route ${method} ${path}`,
    });
  };

  private streamResponse(since: number, signal: AbortSignal | null): Response {
    const ports = this.ports;
    const backlog = this.events.filter((event) => event.seq > since).map(sseFrame);
    let port: StreamPort;
    const encoder = new TextEncoder();
    const stream = new ReadableStream<Uint8Array>({
      start: (controller) => {
        port = {
          enqueue: (frame) => {
            try {
              controller.enqueue(encoder.encode(frame));
            } catch {
              // stream already closed
            }
          },
          close: () => {
            try {
              controller.close();
            } catch {
              // already closed
            }
          },
        };
        for (const frame of backlog) {
          port.enqueue(frame);
        }
        ports.push(port);
        signal?.addEventListener("abort", () => {
          port.close();
          this.ports = this.ports.filter((candidate) => candidate !== port);
        });
      },
      cancel: () => {
        this.ports = this.ports.filter((candidate) => candidate !== port);
      },
    });
    return new Response(stream, {
      status: 200,
      headers: { "Content-Type": "text/event-stream" },
    });
  }
}

export function sseFrame(event: UiEventWire): string {
  return `id: ${event.seq}\nevent: ${event.kind}\ndata: ${JSON.stringify(event)}\n\n`;
}

function jsonResponse(status: number, payload: unknown): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": status >= 400 ? "application/problem+json" : "application/json" },
  });
}

/** Let queued tasks, stream reads, and microtasks drain. */
export async function settle(turns = 6): Promise<void> {
  for (let i = 0; i < turns; i += 1) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

export function emptyPanels(): PanelsWire {
  return {
    chat: [],
    solution: null,
    needs: { slots: {}, revision: 0 },
    phase: "AwaitUserQuery",
    last_event_seq: 0,
    question_batch: null,
    asked_need_ids: [],
  };
}

/** Application shell: wires the service client, the event stream, the pure
 * model, and the renderer into one live view.
 */

import { ServiceClient, ServiceError, type FetchLike } from "./client.js";
import { renderView, type ViewBindings } from "./render.js";
import {
  addNotice,
  appendUserMessage,
  applyEvent,
  applyPanels,
  highlightNeed,
  modelFromPanels,
  optimisticAdd,
  optimisticDelete,
  optimisticUpdate,
  setConnection,
  type PanelModel,
} from "./state.js";
import { EventStream, type EventStreamOptions } from "./stream.js";
import type { UiEventWire } from "./types.js";

export interface AppOptions {
  fetchFn?: FetchLike;
  streamOptions?: EventStreamOptions;
}

export class CoplanApp {
  readonly client: ServiceClient;
  private model: PanelModel | null = null;
  private stream: EventStream | null = null;
  private refetchQueued = false;

  constructor(
    private readonly root: HTMLElement,
    baseUrl: string,
    private readonly options: AppOptions = {},
  ) {
    this.client = new ServiceClient(baseUrl, options.fetchFn);
  }

  get state(): PanelModel | null {
    return this.model;
  }

  /** Create a new session from a query and bind the view to it. */
  async start(query: string, mode: "care" | "baseline" = "care"): Promise<string> {
    const handle = await this.client.createSession(query, mode);
    await this.attach(handle.session_id);
    return handle.session_id;
  }

  /** Bind the view to an existing session. */
  async attach(sessionId: string): Promise<void> {
    const panels = await this.client.getPanels(sessionId);
    this.model = modelFromPanels(sessionId, panels);
    this.render();
    this.stream = new EventStream(
      (since) => this.client.eventsUrl(sessionId, since),
      panels.last_event_seq,
      {
        onEvent: (event) => this.onEvent(event),
        onStatus: (status) => this.update((m) => setConnection(m, status)),
      },
      { fetchFn: this.options.fetchFn, ...this.options.streamOptions },
    );
    this.stream.start();
  }

  close(): void {
    this.stream?.close();
  }

  private update(fn: (model: PanelModel) => PanelModel): void {
    if (!this.model) {
      return;
    }
    this.model = fn(this.model);
    this.render();
  }

  private onEvent(event: UiEventWire): void {
    this.update((model) => applyEvent(model, event));
    if (this.model?.stale) {
      this.queueRefetch();
    }
  }

  /** Coalesce refetches so one burst of events causes one panels request. */
  private queueRefetch(): void {
    if (this.refetchQueued || !this.model) {
      return;
    }
    this.refetchQueued = true;
    queueMicrotask(() => {
      this.refetchQueued = false;
      const sessionId = this.model?.sessionId;
      if (!sessionId) {
        return;
      }
      this.client
        .getPanels(sessionId)
        .then((panels) => this.update((m) => applyPanels(m, panels)))
        .catch((error: unknown) => this.surface(error));
    });
  }

  private surface(error: unknown): void {
    const text =
      error instanceof ServiceError
        ? `${error.problem.code}: ${error.problem.detail}`
        : String(error);
    this.update((m) => addNotice(m, text));
  }

  private readonly bindings: ViewBindings = {
    onSendMessage: (text) => {
      const sessionId = this.model?.sessionId;
      if (!sessionId) {
        return;
      }
      this.update((m) => appendUserMessage(m, text));
      this.client.postMessage(sessionId, text).catch((error: unknown) => this.surface(error));
    },
    onAddNeed: (text) => {
      const sessionId = this.model?.sessionId;
      if (!sessionId) {
        return;
      }
      this.update((m) => optimisticAdd(m, text));
      this.client.addNeed(sessionId, text).catch((error: unknown) => {
        this.surface(error);
        this.queueRefetchNow();
      });
    },
    onUpdateNeed: (needId, text) => {
      const sessionId = this.model?.sessionId;
      if (!sessionId) {
        return;
      }
      this.update((m) => optimisticUpdate(m, needId, text));
      this.client.updateNeed(sessionId, needId, text).catch((error: unknown) => {
        this.surface(error);
        this.queueRefetchNow();
      });
    },
    onDeleteNeed: (needId) => {
      const sessionId = this.model?.sessionId;
      if (!sessionId) {
        return;
      }
      this.update((m) => optimisticDelete(m, needId));
      this.client.deleteNeed(sessionId, needId).catch((error: unknown) => {
        this.surface(error);
        this.queueRefetchNow();
      });
    },
    onAnchorClick: (needId) => {
      this.update((m) => highlightNeed(m, needId));
    },
  };

  /** Rollback path for failed optimistic edits: fetch authoritative panels. */
  private queueRefetchNow(): void {
    if (this.model) {
      this.model = { ...this.model, stale: true };
      this.queueRefetch();
    }
  }

  private render(): void {
    if (this.model) {
      renderView(this.root, this.model, this.bindings);
    }
  }
}

/** Boot helper for the static page: reads ?api=…&session=…|query=…&mode=…. */
export async function boot(root: HTMLElement, search: string): Promise<CoplanApp> {
  const params = new URLSearchParams(search);
  const api = params.get("api") ?? "http://127.0.0.1:8787";
  const app = new CoplanApp(root, api);
  const existing = params.get("session");
  if (existing) {
    await app.attach(existing);
  } else {
    const query = params.get("query") ?? "Plan a 5-day trip to Hawaii";
    const mode = params.get("mode") === "baseline" ? "baseline" : "care";
    await app.start(query, mode);
  }
  return app;
}

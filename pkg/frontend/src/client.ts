/** Thin JSON client for the session service; errors carry problem details. */

import type { PanelsWire, ProblemWire, SessionHandleWire } from "./types.js";

export class ServiceError extends Error {
  readonly problem: ProblemWire;

  constructor(problem: ProblemWire) {
    super(`${problem.code}: ${problem.detail}`);
    this.name = "ServiceError";
    this.problem = problem;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const payload = (await response.json()) as unknown;
    if (!response.ok) {
      throw new ServiceError(payload as ProblemWire);
    }
    return payload as T;
  }

  createSession(query: string, mode: "care" | "baseline"): Promise<SessionHandleWire> {
    return this.request("POST", "/sessions", { query, mode });
  }

  postMessage(sessionId: string, text: string): Promise<{ accepted: boolean; seq: number }> {
    return this.request("POST", `/sessions/${sessionId}/messages`, { text });
  }

  getPanels(sessionId: string): Promise<PanelsWire> {
    return this.request("GET", `/sessions/${sessionId}/panels`);
  }

  addNeed(sessionId: string, text: string): Promise<{ revision: number }> {
    return this.request("POST", `/sessions/${sessionId}/needs`, { text });
  }

  updateNeed(sessionId: string, needId: string, text: string): Promise<{ revision: number }> {
    return this.request("PATCH", `/sessions/${sessionId}/needs/${needId}`, { text });
  }

  deleteNeed(sessionId: string, needId: string): Promise<{ revision: number }> {
    return this.request("DELETE", `/sessions/${sessionId}/needs/${needId}`);
  }

  eventsUrl(sessionId: string, since: number): string {
    return `${this.baseUrl}/sessions/${sessionId}/events?since=${since}`;
  }
}

/** Wire types for the session service API and its event stream. */

export interface ChatEntry {
  seq: number;
  source: string;
  text: string;
}

export interface NeedSlotWire {
  need: string;
  clarify: boolean;
  user_want: "true" | "false" | null;
  origin: string;
}

export interface NeedRefWire {
  id: string;
  /** Byte offsets into the UTF-8 encoding of the solution body. */
  start: number;
  end: number;
}

export interface SolutionWire {
  body: string;
  refs: NeedRefWire[];
  revision_basis: number;
}

export interface NeedsWire {
  slots: Record<string, NeedSlotWire>;
  revision: number;
}

export interface QuestionBatchWire {
  topic: string;
  questions: QuestionWire[];
}

export interface PanelsWire {
  chat: ChatEntry[];
  solution: SolutionWire | null;
  needs: NeedsWire;
  phase: string;
  last_event_seq: number;
  /** The batch currently awaiting answers, when the session is inquiring. */
  question_batch: QuestionBatchWire | null;
  /** Every need id whose clarification question has been posted so far. */
  asked_need_ids: string[];
}

export interface QuestionWire {
  need_id: string;
  question: string;
}

/** One server-sent event; `kind` discriminates the payload fields. */
export interface UiEventWire {
  seq: number;
  kind: string;
  source?: string;
  text?: string;
  topic?: string;
  questions?: QuestionWire[];
  revision?: number;
  revision_basis?: number;
  phase?: string;
  dangling?: string[];
}

export interface ProblemWire {
  title: string;
  status: number;
  code: string;
  detail: string;
}

export interface SessionHandleWire {
  session_id: string;
  mode: string;
  created_at: number;
}

export type ConnectionState = "connecting" | "live" | "reconnecting" | "closed";

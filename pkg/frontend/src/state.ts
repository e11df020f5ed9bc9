/** The panel model and its pure reducers.
 *
 * The view is a function of this model alone, and the model is a function of
 * (initial panels, event history, in-flight user input): replaying the same
 * events over the same snapshot reproduces the same model, which the tests
 * assert directly.
 */

import type {
  ChatEntry,
  ConnectionState,
  NeedSlotWire,
  PanelsWire,
  QuestionWire,
  SolutionWire,
  UiEventWire,
} from "./types.js";

export interface QuestionBatch {
  topic: string;
  questions: QuestionWire[];
}

export interface NeedRow {
  id: string;
  need: string;
  status: "wanted" | "declined" | "pending";
  clarify: boolean;
}

export interface PanelModel {
  sessionId: string;
  chat: ChatEntry[];
  /** Set when the engine is waiting on answers to a posted batch. */
  questionBatch: QuestionBatch | null;
  /** Ids whose clarification question has been posted to the user. */
  asked: readonly string[];
  solution: SolutionWire | null;
  needs: { slots: Record<string, NeedSlotWire>; revision: number };
  phase: string;
  lastEventSeq: number;
  connection: ConnectionState;
  notices: string[];
  highlightedNeedId: string | null;
  /** True when a needs/solution event outran the snapshot; refetch panels. */
  stale: boolean;
}

export function modelFromPanels(sessionId: string, panels: PanelsWire): PanelModel {
  return {
    sessionId,
    chat: [...panels.chat],
    questionBatch: panels.question_batch
      ? { topic: panels.question_batch.topic, questions: [...panels.question_batch.questions] }
      : null,
    asked: [...(panels.asked_need_ids ?? [])],
    solution: panels.solution,
    needs: { slots: { ...panels.needs.slots }, revision: panels.needs.revision },
    phase: panels.phase,
    lastEventSeq: panels.last_event_seq,
    connection: "connecting",
    notices: [],
    highlightedNeedId: null,
    stale: false,
  };
}

function appendChat(model: PanelModel, source: string, text: string): ChatEntry[] {
  return [...model.chat, { seq: model.chat.length + 1, source, text }];
}

export function applyEvent(model: PanelModel, event: UiEventWire): PanelModel {
  const next: PanelModel = { ...model, lastEventSeq: event.seq };
  switch (event.kind) {
    case "agent_message":
      next.chat = appendChat(model, event.source ?? "agent", event.text ?? "");
      return next;
    case "questions_posted": {
      const questions = event.questions ?? [];
      next.questionBatch = { topic: event.topic ?? "", questions };
      next.asked = [...new Set([...model.asked, ...questions.map((q) => q.need_id)])];
      // mirror the transcript entry the engine records for the batch
      const lines = [
        `Questions posted to the user (topic: ${event.topic ?? ""}):`,
        ...questions.map((q, i) => `${i + 1}. [${q.need_id}] ${q.question}`),
      ];
      next.chat = appendChat(model, "engine", lines.join("\n"));
      return next;
    }
    case "needs_updated":
      if (event.revision !== undefined && event.revision !== model.needs.revision) {
        next.stale = true;
      }
      return next;
    case "solution_updated":
      next.stale = true;
      return next;
    case "phase_changed":
      next.phase = event.phase ?? model.phase;
      if (next.phase !== "Inquiring") {
        next.questionBatch = null;
      }
      return next;
    case "solution_ready_notice":
      next.notices = [...model.notices, "The solution is ready — see the Solution Panel."];
      return next;
    case "grounding_failure":
      next.notices = [
        ...model.notices,
        `Warning: the solution cites unknown needs: ${(event.dangling ?? []).join(", ")}`,
      ];
      return next;
    default:
      return next;
  }
}

/** Fold a fresh panels snapshot into the model after a refetch. */
export function applyPanels(model: PanelModel, panels: PanelsWire): PanelModel {
  return {
    ...model,
    chat: [...panels.chat],
    solution: panels.solution,
    needs: { slots: { ...panels.needs.slots }, revision: panels.needs.revision },
    phase: panels.phase,
    lastEventSeq: Math.max(model.lastEventSeq, panels.last_event_seq),
    asked: [...new Set([...model.asked, ...(panels.asked_need_ids ?? [])])],
    questionBatch:
      panels.phase === "Inquiring"
        ? model.questionBatch ?? panels.question_batch
        : null,
    stale: false,
  };
}

export function setConnection(model: PanelModel, connection: ConnectionState): PanelModel {
  return model.connection === connection ? model : { ...model, connection };
}

export function addNotice(model: PanelModel, notice: string): PanelModel {
  return { ...model, notices: [...model.notices, notice] };
}

export function highlightNeed(model: PanelModel, needId: string | null): PanelModel {
  return { ...model, highlightedNeedId: needId };
}

export function appendUserMessage(model: PanelModel, text: string): PanelModel {
  return { ...model, chat: appendChat(model, "user", text), questionBatch: null };
}

/** Optimistic local edits, reconciled by the next panels refetch. */
export function optimisticAdd(model: PanelModel, text: string): PanelModel {
  const numeric = Object.keys(model.needs.slots).map((id) => parseInt(id, 10));
  const nextId = String(numeric.length ? Math.max(...numeric) + 1 : 0).padStart(3, "0");
  return {
    ...model,
    needs: {
      revision: model.needs.revision + 1,
      slots: {
        ...model.needs.slots,
        [nextId]: { need: text, clarify: false, user_want: "true", origin: "UserManual" },
      },
    },
  };
}

export function optimisticUpdate(model: PanelModel, needId: string, text: string): PanelModel {
  const slot = model.needs.slots[needId];
  if (!slot) {
    return model;
  }
  return {
    ...model,
    needs: {
      revision: model.needs.revision + 1,
      slots: { ...model.needs.slots, [needId]: { ...slot, need: text } },
    },
  };
}

export function optimisticDelete(model: PanelModel, needId: string): PanelModel {
  if (!(needId in model.needs.slots)) {
    return model;
  }
  const slots = { ...model.needs.slots };
  delete slots[needId];
  return { ...model, needs: { revision: model.needs.revision + 1, slots } };
}

const STATUS_BY_WANT: Record<string, NeedRow["status"]> = {
  true: "wanted",
  false: "declined",
};

/** Rows the needs panel shows: un-asked clarification questions stay hidden. */
export function visibleNeedRows(model: PanelModel): NeedRow[] {
  const asked = new Set(model.asked);
  return Object.entries(model.needs.slots)
    .filter(([id, slot]) => !slot.clarify || asked.has(id))
    .sort(([a], [b]) => parseInt(a, 10) - parseInt(b, 10))
    .map(([id, slot]) => ({
      id,
      need: slot.need,
      status: slot.user_want === null ? "pending" : STATUS_BY_WANT[slot.user_want] ?? "pending",
      clarify: slot.clarify,
    }));
}

import { describe, expect, it } from "vitest";

import {
  applyEvent,
  applyPanels,
  appendUserMessage,
  modelFromPanels,
  optimisticDelete,
  visibleNeedRows,
  type PanelModel,
} from "../src/state.js";
import type { PanelsWire, UiEventWire } from "../src/types.js";
import { emptyPanels } from "./helpers.js";
import hawaii from "./fixtures/hawaii.json";

const fixtureEvents = hawaii.events_before as UiEventWire[];
const fixturePanels = hawaii.panels_before as PanelsWire;

function foldAll(initial: PanelsWire, events: UiEventWire[]): PanelModel {
  let model = modelFromPanels("s", initial);
  for (const event of events) {
    model = applyEvent(model, event);
  }
  return model;
}

describe("panel model reducers", () => {
  it("replaying the same events reproduces the same model", () => {
    const first = foldAll(emptyPanels(), fixtureEvents);
    const second = foldAll(emptyPanels(), fixtureEvents);
    expect(JSON.parse(JSON.stringify(second))).toEqual(JSON.parse(JSON.stringify(first)));
  });

  it("reducers never mutate their input", () => {
    const initial = modelFromPanels("s", emptyPanels());
    const snapshot = JSON.parse(JSON.stringify(initial));
    for (const event of fixtureEvents) {
      applyEvent(initial, event);
    }
    appendUserMessage(initial, "hello");
    optimisticDelete(initial, "000");
    expect(JSON.parse(JSON.stringify(initial))).toEqual(snapshot);
  });

  it("tracks sequence numbers and phase transitions", () => {
    const model = foldAll(emptyPanels(), fixtureEvents);
    expect(model.lastEventSeq).toBe(fixtureEvents[fixtureEvents.length - 1]!.seq);
    expect(model.phase).toBe("SolutionReady");
    expect(model.questionBatch).toBeNull(); // cleared when questioning ended
  });

  it("notes needs and solution staleness for the refetch path", () => {
    let model = modelFromPanels("s", emptyPanels());
    model = applyEvent(model, { seq: 1, kind: "needs_updated", revision: 3 });
    expect(model.stale).toBe(true);
    model = applyPanels(model, fixturePanels);
    expect(model.stale).toBe(false);
    expect(model.needs.revision).toBe(fixturePanels.needs.revision);
    expect(model.lastEventSeq).toBeGreaterThanOrEqual(fixturePanels.last_event_seq);
  });

  it("hides un-asked clarification questions until they are posted", () => {
    const panels: PanelsWire = {
      ...emptyPanels(),
      needs: {
        revision: 2,
        slots: {
          "000": { need: "The destination is Hawaii.", clarify: false, user_want: "true", origin: "UserExplicit" },
          "001": { need: "Budget range?", clarify: true, user_want: null, origin: "AgentInferred" },
        },
      },
    };
    let model = modelFromPanels("s", panels);
    expect(visibleNeedRows(model).map((row) => row.id)).toEqual(["000"]);
    model = applyEvent(model, {
      seq: 1,
      kind: "questions_posted",
      topic: "Budget",
      questions: [{ need_id: "001", question: "Budget range?" }],
    });
    const rows = visibleNeedRows(model);
    expect(rows.map((row) => row.id)).toEqual(["000", "001"]);
    expect(rows[1]!.status).toBe("pending");
  });

  it("badges rows by want status", () => {
    const panels: PanelsWire = {
      ...emptyPanels(),
      needs: {
        revision: 3,
        slots: {
          "000": { need: "a", clarify: false, user_want: "true", origin: "UserExplicit" },
          "001": { need: "b", clarify: false, user_want: "false", origin: "AgentInferred" },
        },
      },
    };
    const rows = visibleNeedRows(modelFromPanels("s", panels));
    expect(rows.map((row) => row.status)).toEqual(["wanted", "declined"]);
  });

  it("grounding failures and ready notices surface as notices", () => {
    let model = modelFromPanels("s", emptyPanels());
    model = applyEvent(model, { seq: 1, kind: "grounding_failure", dangling: ["042"] });
    model = applyEvent(model, { seq: 2, kind: "solution_ready_notice" });
    expect(model.notices.some((notice) => notice.includes("042"))).toBe(true);
    expect(model.notices.some((notice) => notice.includes("ready"))).toBe(true);
  });
});

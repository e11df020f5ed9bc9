/** DOM renderer for the three panels. Renders the whole view from the model
 * on every state change; the model is small enough that diffing would be
 * ceremony. All user text reaches the DOM through textContent.
 */

import { renderSolutionBody } from "./anchors.js";
import { visibleNeedRows, type PanelModel } from "./state.js";

export interface ViewBindings {
  onSendMessage(text: string): void;
  onAddNeed(text: string): void;
  onUpdateNeed(needId: string, text: string): void;
  onDeleteNeed(needId: string): void;
  onAnchorClick(needId: string): void;
}

function el(
  doc: Document,
  tag: string,
  className?: string,
  text?: string,
): HTMLElement {
  const node = doc.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function renderHeader(doc: Document, model: PanelModel): HTMLElement {
  const header = el(doc, "header", "coplan-header");
  header.appendChild(el(doc, "span", "phase-badge", model.phase));
  header.appendChild(el(doc, "span", `connection connection-${model.connection}`, model.connection));
  for (const notice of model.notices.slice(-3)) {
    header.appendChild(el(doc, "div", "notice", notice));
  }
  return header;
}

function renderChatPanel(doc: Document, model: PanelModel, bindings: ViewBindings): HTMLElement {
  const panel = el(doc, "section", "panel chat-panel");
  panel.appendChild(el(doc, "h2", "panel-title", "Chat"));
  const log = el(doc, "div", "chat-log");
  for (const entry of model.chat) {
    const row = el(doc, "div", `chat-entry chat-${entry.source === "user" ? "user" : "agent"}`);
    row.appendChild(el(doc, "span", "chat-source", entry.source));
    row.appendChild(el(doc, "span", "chat-text", entry.text));
    log.appendChild(row);
  }
  panel.appendChild(log);

  if (model.questionBatch) {
    const card = el(doc, "div", "question-batch");
    card.appendChild(el(doc, "h3", "batch-topic", model.questionBatch.topic));
    const list = el(doc, "ol", "batch-questions");
    for (const question of model.questionBatch.questions) {
      const item = el(doc, "li", "batch-question", question.question);
      item.setAttribute("data-need-id", question.need_id);
      list.appendChild(item);
    }
    card.appendChild(list);
    panel.appendChild(card);
  }

  const form = el(doc, "form", "chat-form") as HTMLFormElement;
  const input = el(doc, "input", "chat-input") as HTMLInputElement;
  input.setAttribute("type", "text");
  input.setAttribute("placeholder", "Answer here, or describe what you need…");
  const send = el(doc, "button", "chat-send", "Send") as HTMLButtonElement;
  send.setAttribute("type", "submit");
  form.append(input, send);
  form.addEventListener("submit", (raised) => {
    raised.preventDefault();
    const text = input.value.trim();
    if (text) {
      input.value = "";
      bindings.onSendMessage(text);
    }
  });
  panel.appendChild(form);
  return panel;
}

function renderSolutionPanel(doc: Document, model: PanelModel, bindings: ViewBindings): HTMLElement {
  const panel = el(doc, "section", "panel solution-panel");
  panel.appendChild(el(doc, "h2", "panel-title", "Solution"));
  const container = el(doc, "div", "solution-body");
  if (model.solution) {
    container.appendChild(renderSolutionBody(doc, model.solution.body, model.solution.refs));
    container.addEventListener("click", (raised) => {
      const target = raised.target as HTMLElement | null;
      const anchor = target?.closest?.(".need-anchor") as HTMLElement | null;
      if (anchor) {
        raised.preventDefault();
        bindings.onAnchorClick(anchor.getAttribute("data-need-id") ?? "");
      }
    });
  } else {
    container.appendChild(el(doc, "p", "solution-empty", "No solution yet — answer a few questions first."));
  }
  panel.appendChild(container);
  return panel;
}

function renderNeedsPanel(doc: Document, model: PanelModel, bindings: ViewBindings): HTMLElement {
  const panel = el(doc, "section", "panel needs-panel");
  panel.appendChild(el(doc, "h2", "panel-title", `Needs (rev ${model.needs.revision})`));
  const table = el(doc, "table", "needs-table");
  const body = el(doc, "tbody");
  for (const row of visibleNeedRows(model)) {
    const tr = el(doc, "tr", `needs-row status-${row.status}`);
    tr.setAttribute("data-need-id", row.id);
    tr.id = `need-${row.id}`;
    if (model.highlightedNeedId === row.id) {
      tr.classList.add("highlighted");
    }
    tr.appendChild(el(doc, "td", "need-id", row.id));
    tr.appendChild(el(doc, "td", `need-status badge-${row.status}`, row.status));
    const textCell = el(doc, "td", "need-text", row.need);
    tr.appendChild(textCell);

    const actions = el(doc, "td", "need-actions");
    const editButton = el(doc, "button", "need-edit", "edit") as HTMLButtonElement;
    editButton.setAttribute("type", "button");
    editButton.addEventListener("click", () => {
      const input = el(doc, "input", "need-edit-input") as HTMLInputElement;
      input.value = row.need;
      textCell.textContent = "";
      textCell.appendChild(input);
      const commit = () => {
        const text = input.value.trim();
        if (text && text !== row.need) {
          bindings.onUpdateNeed(row.id, text);
        } else {
          textCell.textContent = row.need;
        }
      };
      input.addEventListener("keydown", (key) => {
        if ((key as KeyboardEvent).key === "Enter") {
          commit();
        }
      });
      input.addEventListener("blur", commit);
    });
    const deleteButton = el(doc, "button", "need-delete", "delete") as HTMLButtonElement;
    deleteButton.setAttribute("type", "button");
    deleteButton.addEventListener("click", () => bindings.onDeleteNeed(row.id));
    actions.append(editButton, deleteButton);
    tr.appendChild(actions);
    body.appendChild(tr);
  }
  table.appendChild(body);
  panel.appendChild(table);

  const form = el(doc, "form", "need-add-form") as HTMLFormElement;
  const input = el(doc, "input", "need-add-input") as HTMLInputElement;
  input.setAttribute("type", "text");
  input.setAttribute("placeholder", "Add a need…");
  const add = el(doc, "button", "need-add", "Add") as HTMLButtonElement;
  add.setAttribute("type", "submit");
  form.append(input, add);
  form.addEventListener("submit", (raised) => {
    raised.preventDefault();
    const text = input.value.trim();
    if (text) {
      input.value = "";
      bindings.onAddNeed(text);
    }
  });
  panel.appendChild(form);
  return panel;
}

export function renderView(root: HTMLElement, model: PanelModel, bindings: ViewBindings): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  root.appendChild(renderHeader(doc, model));
  const panels = el(doc, "div", "panels");
  panels.appendChild(renderChatPanel(doc, model, bindings));
  panels.appendChild(renderSolutionPanel(doc, model, bindings));
  panels.appendChild(renderNeedsPanel(doc, model, bindings));
  root.appendChild(panels);
  if (model.highlightedNeedId) {
    const row = root.querySelector(`tr[data-need-id="${model.highlightedNeedId}"]`);
    if (row && typeof (row as HTMLElement).scrollIntoView === "function") {
      (row as HTMLElement).scrollIntoView({ block: "nearest" });
    }
  }
}

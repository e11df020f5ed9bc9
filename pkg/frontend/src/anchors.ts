/** Need-citation anchor injection from service-provided spans.
 *
 * The service reports each citation as byte offsets into the UTF-8 encoding
 * of the solution body; the client never re-parses the citation grammar.
 * Spans are converted to string indices, swapped for private-use sentinel
 * markers that survive markdown rendering as plain text, and finally
 * replaced with anchor elements in the rendered DOM.
 */

import { renderMarkdown } from "./markdown.js";
import type { NeedRefWire } from "./types.js";

const MARK_START = "";
const MARK_END = "";
const MARK = /(\d+)/g;

interface CharSpan {
  id: string;
  start: number;
  end: number;
}

function utf8Length(codePoint: number): number {
  if (codePoint < 0x80) return 1;
  if (codePoint < 0x800) return 2;
  if (codePoint < 0x10000) return 3;
  return 4;
}

/** Map the byte offsets used by ref spans onto string (UTF-16) indices. */
export function byteSpansToCharSpans(body: string, refs: NeedRefWire[]): CharSpan[] {
  const wanted = new Set<number>();
  for (const ref of refs) {
    wanted.add(ref.start);
    wanted.add(ref.end);
  }
  const mapping = new Map<number, number>();
  let byte = 0;
  let unit = 0;
  if (wanted.has(0)) {
    mapping.set(0, 0);
  }
  for (const cp of body) {
    byte += utf8Length(cp.codePointAt(0) ?? 0);
    unit += cp.length;
    if (wanted.has(byte)) {
      mapping.set(byte, unit);
    }
  }
  return refs
    .map((ref) => {
      const start = mapping.get(ref.start);
      const end = mapping.get(ref.end);
      return start === undefined || end === undefined
        ? null
        : { id: ref.id, start, end };
    })
    .filter((span): span is CharSpan => span !== null)
    .sort((a, b) => a.start - b.start);
}

/** Render the solution body with one clickable anchor per citation. */
export function renderSolutionBody(
  doc: Document,
  body: string,
  refs: NeedRefWire[],
): DocumentFragment {
  const spans = byteSpansToCharSpans(body, refs);
  const labels: { id: string; text: string }[] = [];
  let annotated = "";
  let cursor = 0;
  for (const span of spans) {
    if (span.start < cursor) {
      continue; // overlapping spans are invalid; keep the earlier one
    }
    annotated += body.slice(cursor, span.start);
    annotated += `${MARK_START}${labels.length}${MARK_END}`;
    labels.push({ id: span.id, text: body.slice(span.start, span.end) });
    cursor = span.end;
  }
  annotated += body.slice(cursor);

  const fragment = renderMarkdown(doc, annotated);
  substituteMarks(doc, fragment, labels);
  return fragment;
}

function substituteMarks(
  doc: Document,
  root: Node,
  labels: { id: string; text: string }[],
): void {
  const textNodes: Text[] = [];
  const walk = (node: Node): void => {
    if (node.nodeType === 3) {
      textNodes.push(node as Text);
      return;
    }
    node.childNodes.forEach(walk);
  };
  walk(root);
  for (const textNode of textNodes) {
    const value = textNode.nodeValue ?? "";
    if (!value.includes(MARK_START)) {
      continue;
    }
    const replacement = doc.createDocumentFragment();
    let cursor = 0;
    MARK.lastIndex = 0;
    for (const match of value.matchAll(MARK)) {
      const index = match.index ?? 0;
      if (index > cursor) {
        replacement.appendChild(doc.createTextNode(value.slice(cursor, index)));
      }
      const label = labels[Number(match[1])];
      if (label) {
        const anchor = doc.createElement("a");
        anchor.className = "need-anchor";
        anchor.setAttribute("data-need-id", label.id);
        anchor.setAttribute("href", `#need-${label.id}`);
        anchor.textContent = label.text;
        replacement.appendChild(anchor);
      }
      cursor = index + match[0].length;
    }
    if (cursor < value.length) {
      replacement.appendChild(doc.createTextNode(value.slice(cursor)));
    }
    textNode.parentNode?.replaceChild(replacement, textNode);
  }
}

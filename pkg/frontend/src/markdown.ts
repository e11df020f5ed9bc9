/** Minimal sanitized rich-text renderer for solution bodies.
 *
 * The subset matches what solutions actually use: headings, emphasis,
 * inline code, lists, blockquotes, tables, rules, links, and emoji (which
 * need no handling — they are just text). Sanitization is by construction:
 * every piece of input lands in the DOM via textContent, never innerHTML,
 * and only http(s) link targets are honored.
 */

const HEADING = /^(#{1,6})\s+(.*)$/;
const ORDERED = /^\s*\d+[.)]\s+(.*)$/;
const UNORDERED = /^\s*[-*+]\s+(.*)$/;
const RULE = /^\s*([-*_])\s*(?:\1\s*){2,}$/;
const TABLE_DIVIDER = /^\s*\|?\s*:?-+:?\s*(\|\s*:?-+:?\s*)*\|?\s*$/;
const INLINE = /(`[^`]+`)|(\*\*[^*]+\*\*)|(\*[^*\s][^*]*\*)|(_[^_\s][^_]*_)|(\[[^\]]+\]\([^)\s]+\))/;
const LINK = /^\[([^\]]+)\]\(([^)\s]+)\)$/;

function renderInline(doc: Document, text: string, target: Node): void {
  let rest = text;
  for (;;) {
    const match = INLINE.exec(rest);
    if (!match || match.index === undefined) {
      break;
    }
    if (match.index > 0) {
      target.appendChild(doc.createTextNode(rest.slice(0, match.index)));
    }
    const token = match[0];
    if (token.startsWith("`")) {
      const code = doc.createElement("code");
      code.textContent = token.slice(1, -1);
      target.appendChild(code);
    } else if (token.startsWith("**")) {
      const strong = doc.createElement("strong");
      renderInline(doc, token.slice(2, -2), strong);
      target.appendChild(strong);
    } else if (token.startsWith("*") || token.startsWith("_")) {
      const em = doc.createElement("em");
      renderInline(doc, token.slice(1, -1), em);
      target.appendChild(em);
    } else {
      const link = LINK.exec(token);
      if (link && /^https?:\/\//.test(link[2] ?? "")) {
        const anchor = doc.createElement("a");
        anchor.setAttribute("href", link[2] ?? "");
        anchor.setAttribute("rel", "noopener noreferrer");
        anchor.textContent = link[1] ?? "";
        target.appendChild(anchor);
      } else {
        target.appendChild(doc.createTextNode(token));
      }
    }
    rest = rest.slice(match.index + token.length);
  }
  if (rest) {
    target.appendChild(doc.createTextNode(rest));
  }
}

function splitTableRow(line: string): string[] {
  let cells = line.trim();
  if (cells.startsWith("|")) {
    cells = cells.slice(1);
  }
  if (cells.endsWith("|")) {
    cells = cells.slice(0, -1);
  }
  return cells.split("|").map((cell) => cell.trim());
}

export function renderMarkdown(doc: Document, body: string): DocumentFragment {
  const fragment = doc.createDocumentFragment();
  const lines = body.split("\n");
  let i = 0;

  const isTableStart = (index: number): boolean => {
    const line = lines[index];
    const divider = lines[index + 1];
    return (
      line !== undefined &&
      divider !== undefined &&
      line.includes("|") &&
      TABLE_DIVIDER.test(divider)
    );
  };

  while (i < lines.length) {
    const line = lines[i] ?? "";
    if (!line.trim()) {
      i += 1;
      continue;
    }
    const heading = HEADING.exec(line);
    if (heading) {
      const element = doc.createElement(`h${heading[1]?.length ?? 1}`);
      renderInline(doc, heading[2] ?? "", element);
      fragment.appendChild(element);
      i += 1;
      continue;
    }
    if (RULE.test(line)) {
      fragment.appendChild(doc.createElement("hr"));
      i += 1;
      continue;
    }
    if (line.trimStart().startsWith(">")) {
      const quote = doc.createElement("blockquote");
      const collected: string[] = [];
      while (i < lines.length && (lines[i] ?? "").trimStart().startsWith(">")) {
        collected.push((lines[i] ?? "").trimStart().replace(/^>\s?/, ""));
        i += 1;
      }
      renderInline(doc, collected.join(" "), quote);
      fragment.appendChild(quote);
      continue;
    }
    if (isTableStart(i)) {
      const table = doc.createElement("table");
      const head = doc.createElement("thead");
      const headRow = doc.createElement("tr");
      for (const cell of splitTableRow(line)) {
        const th = doc.createElement("th");
        renderInline(doc, cell, th);
        headRow.appendChild(th);
      }
      head.appendChild(headRow);
      table.appendChild(head);
      const tbody = doc.createElement("tbody");
      i += 2;
      while (i < lines.length && (lines[i] ?? "").includes("|") && (lines[i] ?? "").trim()) {
        const tr = doc.createElement("tr");
        for (const cell of splitTableRow(lines[i] ?? "")) {
          const td = doc.createElement("td");
          renderInline(doc, cell, td);
          tr.appendChild(td);
        }
        tbody.appendChild(tr);
        i += 1;
      }
      table.appendChild(tbody);
      fragment.appendChild(table);
      continue;
    }
    const unordered = UNORDERED.exec(line);
    const ordered = ORDERED.exec(line);
    if (unordered || ordered) {
      const kind = unordered ? "ul" : "ol";
      const matcher = unordered ? UNORDERED : ORDERED;
      const list = doc.createElement(kind);
      while (i < lines.length) {
        const item = matcher.exec(lines[i] ?? "");
        if (!item) {
          // continuation lines (indented) attach to the previous item
          const current = lines[i] ?? "";
          if (current.startsWith("   ") && current.trim() && list.lastChild) {
            list.lastChild.appendChild(doc.createTextNode(" "));
            renderInline(doc, current.trim(), list.lastChild);
            i += 1;
            continue;
          }
          break;
        }
        const li = doc.createElement("li");
        renderInline(doc, item[1] ?? "", li);
        list.appendChild(li);
        i += 1;
      }
      fragment.appendChild(list);
      continue;
    }
    // paragraph: consume until a blank line or a structural line
    const paragraph = doc.createElement("p");
    const collected: string[] = [];
    while (i < lines.length) {
      const current = lines[i] ?? "";
      if (
        !current.trim() ||
        HEADING.test(current) ||
        RULE.test(current) ||
        current.trimStart().startsWith(">") ||
        UNORDERED.test(current) ||
        ORDERED.test(current) ||
        isTableStart(i)
      ) {
        break;
      }
      collected.push(current.trim());
      i += 1;
    }
    renderInline(doc, collected.join(" "), paragraph);
    fragment.appendChild(paragraph);
  }
  return fragment;
}

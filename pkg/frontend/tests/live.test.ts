/** Cross-stack integration: the real session service runs as a subprocess
 * with scripted backend fixtures, and the app drives it over actual HTTP —
 * creation, questioning, solution grounding, anchor highlighting, and the
 * needs-row deletion round trip.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { CoplanApp } from "../src/app.js";
import { settle } from "./helpers.js";

// vitest runs with cwd at the frontend root
const fixturePath = resolve(process.cwd(), "tests/fixtures/manual_delete.fixtures.jsonl");

const pythonAvailable =
  spawnSync("python3", ["-c", "import coplan"], { timeout: 20000 }).status === 0;

const HAWAII_QUERY = "Plan a 5-day trip to Hawaii";
const ANSWER_LODGING = "We'd like a beachfront hotel, and our budget is about $3,000.";
const ANSWER_ACTIVITIES = "Snorkeling and hiking for sure.";

describe.skipIf(!pythonAvailable)("app against the real scripted service", () => {
  let child: ChildProcess;
  let base = "";
  let storage = "";

  beforeAll(async () => {
    storage = mkdtempSync(join(tmpdir(), "coplan-ui-"));
    child = spawn(
      "python3",
      [
        "-u",
        "-m", "coplan.cli",
        "--backend-mode", "scripted",
        "--fixtures", fixturePath,
        "--session-tag", "manual-delete",
        "--storage", storage,
        "--listen", "127.0.0.1:0",
        "serve",
      ],
      { stdio: ["ignore", "pipe", "pipe"] },
    );
    base = await new Promise<string>((resolveUrl, reject) => {
      const timer = setTimeout(() => reject(new Error("service did not start")), 20000);
      let buffer = "";
      child.stdout?.on("data", (chunk: Buffer) => {
        buffer += chunk.toString();
        const match = /listening on (http:\/\/[\d.]+:\d+)/.exec(buffer);
        if (match) {
          clearTimeout(timer);
          resolveUrl(match[1] ?? "");
        }
      });
      child.on("exit", (code) => reject(new Error(`service exited early (${code})`)));
    });
  }, 30000);

  afterAll(() => {
    child?.kill("SIGTERM");
    if (storage) {
      rmSync(storage, { recursive: true, force: true });
    }
  });

  it("runs the whole conversation and grounds the solution", async () => {
    const root = document.createElement("div");
    document.body.appendChild(root);
    const app = new CoplanApp(root, base, {
      streamOptions: { retryDelayMs: 50 },
    });
    await app.start(HAWAII_QUERY, "care");
    await waitFor(() => root.querySelectorAll(".batch-question").length > 0);
    expect(root.querySelector(".phase-badge")?.textContent).toBe("Inquiring");

    await app.client.postMessage(app.state!.sessionId, ANSWER_LODGING);
    await waitFor(() =>
      [...root.querySelectorAll(".batch-question")].some((node) =>
        (node.textContent ?? "").includes("activities"),
      ),
    );
    await app.client.postMessage(app.state!.sessionId, ANSWER_ACTIVITIES);
    await waitFor(() => root.querySelector(".phase-badge")?.textContent === "SolutionReady");
    await waitFor(() => root.querySelectorAll("a.need-anchor").length >= 5);

    // clicking an anchor highlights exactly the matching row
    const anchor = root.querySelector('a.need-anchor[data-need-id="002"]') as HTMLElement;
    expect(anchor).not.toBeNull();
    anchor.dispatchEvent(new MouseEvent("click", { bubbles: true }));
    await settle();
    const highlighted = [...root.querySelectorAll("tr.highlighted")];
    expect(highlighted).toHaveLength(1);
    expect(highlighted[0]?.getAttribute("data-need-id")).toBe("002");

    // deleting a cited row round-trips: replan events + refreshed panels
    const deleteButton = root.querySelector(
      'tr[data-need-id="004"] button.need-delete',
    ) as HTMLButtonElement;
    deleteButton.click();
    await waitFor(() =>
      (root.querySelector(".solution-body")?.textContent ?? "").includes("Hawaii, Revised"),
    );
    const ids = [...root.querySelectorAll("tr.needs-row")].map((row) =>
      row.getAttribute("data-need-id"),
    );
    expect(ids).not.toContain("004");
    const anchorIds = [...root.querySelectorAll("a.need-anchor")].map((node) =>
      node.getAttribute("data-need-id"),
    );
    expect(anchorIds).not.toContain("004");
    expect(app.state?.lastEventSeq).toBeGreaterThan(0);
    expect(app.state?.connection).toBe("live");
    app.close();
    document.body.removeChild(root);
  }, 30000);
});

async function waitFor(predicate: () => boolean, timeoutMs = 15000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (predicate()) {
      return;
    }
    await new Promise((resolveTick) => setTimeout(resolveTick, 40));
  }
  throw new Error("condition not met in time");
}

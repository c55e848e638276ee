// Round trip against a real session service: typing "don't put it
// there" mid-run must produce a new repulsion glyph and a visibly
// re-routed end-effector polyline within two poll cycles.
import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SessionApi } from "../src/api.js";
import { buildShapes, polylineChanged } from "../src/view.js";

const PORT = 18731;
const HOST = `http://127.0.0.1:${PORT}`;
const POLL_MS = 200;
const REPO = join(__dirname, "..", "..");

let server: ChildProcess;

async function waitForHealth(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const r = await fetch(`${HOST}/healthz`);
      if (r.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((res) => setTimeout(res, 250));
  }
  throw new Error("server never became healthy");
}

beforeAll(async () => {
  const work = mkdtempSync(join(tmpdir(), "verbaplan-e2e-"));
  const corpus = join(work, "corpus.jsonl");
  const model = join(work, "model.json");
  execFileSync("python3", ["-m", "verbaplan.cli", "datagen", "--scenario", "laptop", "--n", "600", "--seed", "21", "--out", corpus], { cwd: REPO, stdio: "inherit" });
  execFileSync("python3", ["-m", "verbaplan.cli", "train", "--corpus", corpus, "--out", model], { cwd: REPO, stdio: "inherit" });
  server = spawn("python3", ["-m", "verbaplan.cli", "serve", "--port", String(PORT), "--model", model], {
    cwd: REPO,
    stdio: "inherit",
  });
  await waitForHealth();
}, 180_000);

afterAll(() => {
  server?.kill();
});

describe("console round trip on the laptop-avoid scenario", () => {
  it("re-routes the polyline and shows a repulsion glyph within 2 polls", async () => {
    const api = await SessionApi.create(HOST, { scenario: "laptop", seed: 77, restarts: 8 });

    await api.command("put the cube on the table");
    let state = await api.state();
    expect(state.status).toBe("executing");
    const vp = { width: 480, height: 480 };
    expect(buildShapes(state, "side", vp).filter((s) => s.label === "repulsion").length).toBe(0);
    const pathBefore = state.ee_path;

    // run 1.2 s of execution, then correct mid-flight
    for (let i = 0; i < 24; i++) await api.tick(0.05);
    await api.command("don't put it there");

    // within two poll cycles the view must show the new plan
    let found = false;
    let polls = 0;
    let after = state;
    while (polls < 2 && !found) {
      await new Promise((res) => setTimeout(res, POLL_MS));
      after = await api.state();
      polls += 1;
      const discs = buildShapes(after, "side", vp).filter((s) => s.label === "repulsion");
      found = discs.length >= 1 && polylineChanged(pathBefore, after.ee_path);
    }
    expect(found).toBe(true);
    expect(after.problem?.terms.some((t) => t.kind === "repulsion")).toBe(true);
  }, 240_000);

  it("stop halts execution", async () => {
    const api = await SessionApi.create(HOST, { scenario: "laptop", seed: 80, restarts: 4 });
    await api.command("put the cube on the table");
    await api.tick(0.3);
    await api.command("stop");
    const state = await api.state();
    expect(state.status).toBe("stopped");
  }, 240_000);
});

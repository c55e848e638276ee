// Console bootstrap: one poll loop at 5 Hz (single in-flight request),
// a command box, and two projected scene views.

import { SessionApi } from "./api.js";
import { paint } from "./render.js";
import type { CostTermPayload, StatePayload } from "./types.js";
import { buildShapes, costBars, diffTerms, groundingTreeLines, statusBadge } from "./view.js";

const POLL_MS = 200;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function boot() {
  const params = new URLSearchParams(window.location.search);
  const host = params.get("host") ?? "";
  const sessionParam = params.get("session");

  let api: SessionApi;
  if (sessionParam) {
    api = new SessionApi(host, Number(sessionParam));
  } else {
    api = await SessionApi.create(host, { scenario: params.get("scenario") ?? "laptop", seed: Number(params.get("seed") ?? 3) });
    params.set("session", String(api.id));
    window.history.replaceState(null, "", `${window.location.pathname}?${params}`);
  }

  const topCanvas = el<HTMLCanvasElement>("top-view");
  const sideCanvas = el<HTMLCanvasElement>("side-view");
  const badge = el<HTMLSpanElement>("status-badge");
  const stale = el<HTMLSpanElement>("stale");
  const clock = el<HTMLSpanElement>("clock");
  const tree = el<HTMLPreElement>("grounding-tree");
  const bars = el<HTMLDivElement>("cost-bars");
  const diffBox = el<HTMLDivElement>("term-diff");
  const input = el<HTMLInputElement>("command-input");
  const send = el<HTMLButtonElement>("send");
  const errors = el<HTMLDivElement>("errors");

  let lastTerms: CostTermPayload[] | null = null;
  let inFlight = false;

  function render(state: StatePayload) {
    const vp = { width: topCanvas.width, height: topCanvas.height };
    paint(topCanvas.getContext("2d")!, buildShapes(state, "top", vp), vp.width, vp.height);
    paint(sideCanvas.getContext("2d")!, buildShapes(state, "side", vp), vp.width, vp.height);
    const b = statusBadge(state);
    badge.textContent = b.text;
    badge.style.background = b.color;
    clock.textContent = `t=${state.exec_clock.toFixed(2)}s`;
    tree.textContent = groundingTreeLines(state.grounding_tree).join("\n") || "(no command yet)";
    bars.innerHTML = costBars(state)
      .map(
        (c) =>
          `<div class="bar-row"><span class="bar-label">${c.kind}</span>` +
          `<div class="bar" style="width:${Math.round(c.frac * 160)}px"></div>` +
          `<span class="bar-val">${c.weighted.toFixed(3)}</span></div>`
      )
      .join("");
  }

  async function poll() {
    if (inFlight) {
      stale.hidden = false;
      return;
    }
    inFlight = true;
    try {
      const state = await api.state();
      stale.hidden = true;
      errors.textContent = "";
      await api.tick(POLL_MS / 1000);
      render(state);
    } catch (e) {
      stale.hidden = false;
      errors.textContent = `connection lost: ${e}`;
    } finally {
      inFlight = false;
    }
  }

  input.addEventListener("input", () => {
    send.disabled = input.value.trim().length === 0;
  });
  send.disabled = true;

  async function submit() {
    const text = input.value.trim();
    if (!text) return;
    send.disabled = true;
    try {
      const resp = await api.command(text);
      const d = diffTerms(lastTerms, resp.problem.terms);
      lastTerms = resp.problem.terms;
      diffBox.innerHTML =
        (d.added.length ? `<span class="added">+ ${d.added.join(", ")}</span>` : "") +
        (d.removed.length ? ` <span class="removed">- ${d.removed.join(", ")}</span>` : "") +
        (d.changed.length ? ` <span class="changed">~ ${d.changed.join(", ")}</span>` : "");
      errors.textContent = "";
      input.value = "";
    } catch (e) {
      errors.textContent = String(e);
    }
    send.disabled = input.value.trim().length === 0;
  }

  send.addEventListener("click", submit);
  input.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") submit();
  });

  setInterval(poll, POLL_MS);
  poll();
}

boot().catch((e) => {
  document.body.innerHTML = `<pre>failed to start console: ${e}</pre>`;
});

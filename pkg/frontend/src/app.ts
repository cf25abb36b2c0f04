// Browser entry point: one WebSocket in, one state object, rAF-paced
// rendering decoupled from message ingestion (the UI never slows the
// 50Hz stream; it always paints the newest state).

import { buildBar, renderBar } from "./bars.js";
import { buildControls } from "./controls.js";
import { ControlMsg, parseLine } from "./protocol.js";
import { UiState, initialState, isStale, reduce } from "./state.js";
import { drawTimeline } from "./timeline.js";

function serverUrl(): string {
  const params = new URLSearchParams(window.location.search);
  const target = params.get("server") ?? `${window.location.hostname || "127.0.0.1"}:7070`;
  return `ws://${target}`;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function main(): void {
  let state: UiState = initialState();
  let socket: WebSocket | null = null;
  let dirty = true;

  const banner = el<HTMLElement>("banner");
  const stageLabel = el<HTMLElement>("stage");
  const cuePrompt = el<HTMLElement>("cue-prompt");
  const handLabel = el<HTMLElement>("hand");
  const motorLabel = el<HTMLElement>("motor");
  const staleLabel = el<HTMLElement>("stale");
  const openBar = buildBar(el<HTMLElement>("bar-open"), "OPEN", "open");
  const closeBar = buildBar(el<HTMLElement>("bar-close"), "CLOSE", "close");
  const canvas = el<HTMLCanvasElement>("timeline");
  const reportsBody = el<HTMLElement>("reports-body");
  const toasts = el<HTMLElement>("toasts");
  const rawToggle = el<HTMLInputElement>("show-raw");

  const send = (msg: ControlMsg) => {
    if (socket && socket.readyState === WebSocket.OPEN) {
      socket.send(JSON.stringify(msg));
    }
  };
  buildControls(el<HTMLElement>("controls"), send);
  rawToggle.addEventListener("change", () => {
    dirty = true;
  });

  const apply = (event: Parameters<typeof reduce>[1]) => {
    state = reduce(state, event);
    dirty = true;
  };

  const connect = () => {
    apply({ kind: "connection", state: "connecting", atMs: Date.now() });
    socket = new WebSocket(serverUrl());
    socket.addEventListener("open", () =>
      apply({ kind: "connection", state: "open", atMs: Date.now() }),
    );
    socket.addEventListener("message", (event) => {
      const msg = parseLine(String(event.data));
      if (msg) apply({ msg, atMs: Date.now() });
    });
    socket.addEventListener("close", () => {
      apply({ kind: "connection", state: "closed", atMs: Date.now() });
      setTimeout(connect, 1000);
    });
    socket.addEventListener("error", () => socket?.close());
  };
  connect();

  setInterval(() => {
    dirty = true; // staleness can change without new messages
  }, 250);

  const render = () => {
    requestAnimationFrame(render);
    if (!dirty) return;
    dirty = false;

    const disconnected = state.connection !== "open";
    banner.hidden = !disconnected;
    banner.textContent =
      state.connection === "connecting" ? "connecting…" : "connection lost — retrying";

    const stale = isStale(state, Date.now());
    staleLabel.hidden = !(stale && !disconnected && state.stage !== "idle");

    renderBar(openBar, state.barOpen, disconnected);
    renderBar(closeBar, state.barClose, disconnected);

    stageLabel.textContent = `iteration ${state.iteration} — ${state.stage}`;
    cuePrompt.textContent = state.cue ? state.cue.toUpperCase() : "";
    cuePrompt.className = state.cue ? `cue ${state.cue}` : "cue";
    handLabel.textContent = state.hand;
    motorLabel.textContent = state.motorEngaged ? "motor on" : "motor off";
    motorLabel.classList.toggle("off", !state.motorEngaged);

    drawTimeline(canvas, state.timeline, rawToggle.checked);

    reportsBody.innerHTML = state.reports
      .map(
        (r) =>
          `<tr><td>${r.iteration}</td><td>${r.testAccuracy.toFixed(3)}</td>` +
          `<td>${r.rawAccuracy.toFixed(3)}</td>` +
          `<td>${r.weightVarianceOpen.toExponential(1)}</td>` +
          `<td>${r.silhouette.toFixed(3)}</td></tr>`,
      )
      .join("");

    toasts.innerHTML = state.toasts.map((t) => `<div class="toast">${t}</div>`).join("");
  };
  requestAnimationFrame(render);
}

window.addEventListener("load", main);

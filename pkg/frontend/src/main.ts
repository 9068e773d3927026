import { GatewayClient } from "./client.js";
import type { ConnectionStatus } from "./client.js";
import { MISSING, fixed, pct, secs } from "./format.js";
import { HoverController } from "./hover.js";
import { renderScene, targetAt } from "./render.js";
import type { Canvas2D, Rect } from "./render.js";
import { activeWindow, applyWelcome, initialState, reduce } from "./state.js";
import type { UiSessionState } from "./state.js";
import type { WelcomePayload } from "./wire.js";
import { NPC_COLORS } from "./render.js";
import { SeqAudit, attend, endScene, startPhase } from "./wire.js";
import type { ServerMessage, TextureKind } from "./wire.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("stage");
const ctx = canvas.getContext("2d") as unknown as Canvas2D;

let state: UiSessionState = initialState();
let status: ConnectionStatus = "connecting";
let seqWarn = false;
let layout: Rect[] = [];
let dirty = true;

const queue: ServerMessage[] = [];
const audit = new SeqAudit();

const client = new GatewayClient("", {
  onMessage: (msg) => queue.push(msg),
  onStatus: (s) => {
    if (s === "live" && status === "paused") audit.rebase();
    status = s;
    dirty = true;
  },
  onProtocolError: (detail) => {
    state = { ...state, errors: [...state.errors, detail].slice(-5) };
    dirty = true;
  },
});

const hover = new HoverController(
  (target) => {
    client.send(attend(target)).catch((err) => pushError(String(err)));
  },
  () => performance.now(),
);

function pushError(message: string): void {
  state = { ...state, errors: [...state.errors, message].slice(-5) };
  dirty = true;
}

function drainQueue(): void {
  while (queue.length > 0) {
    const msg = queue.shift() as ServerMessage;
    if ("seq" in msg && typeof msg.seq === "number" && audit.check(msg.seq) !== "ok") {
      seqWarn = true;
    }
    state = reduce(state, msg);
    dirty = true;
  }
}

function statusLabel(): string {
  if (seqWarn) return `${status} (stream desync)`;
  return status;
}

function renderPanels(): void {
  el("status").textContent = statusLabel();
  el("status").className = `chip ${status === "live" ? "ok" : "warn"}`;
  el("session").textContent = state.sessionId ?? MISSING;
  el("phase").textContent = state.phase;

  const eng = state.engine;
  el("engine").textContent =
    eng === null
      ? MISSING
      : `v${eng.engineVersion} · ${eng.fs} Hz · gate ${eng.threshold} / ${eng.dwellS * 1000} ms`;

  const bars = el("confidence");
  const n = state.confidence.length;
  while (bars.children.length < n) {
    const row = document.createElement("div");
    row.className = "bar-row";
    row.innerHTML = `<span class="bar-label"></span><div class="bar-track"><div class="bar-fill"></div></div><span class="bar-value"></span>`;
    bars.appendChild(row);
  }
  while (bars.children.length > n) bars.removeChild(bars.lastChild as Node);
  for (let i = 0; i < n; i++) {
    const row = bars.children[i] as HTMLElement;
    const fill = row.querySelector(".bar-fill") as HTMLElement;
    const p = state.confidence[i];
    (row.querySelector(".bar-label") as HTMLElement).textContent = String(i);
    fill.style.width = `${Math.min(100, 100 * p).toFixed(1)}%`;
    fill.style.background = state.scene?.kind === "complex" ? NPC_COLORS[i % NPC_COLORS.length] : "#5c9ded";
    (row.querySelector(".bar-value") as HTMLElement).textContent = p.toFixed(2);
  }

  const cal = state.calibration;
  el("calibration").innerHTML =
    cal === null
      ? `<span class="dim">not calibrated</span>`
      : `grade <span class="grade ${cal.grade}">${cal.grade}</span> · CV ${pct(cal.cvAccuracy)} · ${cal.nTarget}/${cal.nNontarget} epochs`;

  const banner = el("banner");
  if (state.scene === null) {
    banner.textContent = "start calibration, then play a run";
  } else if (state.scene.kind === "calibration") {
    banner.textContent = `calibration: hold the marked target ${state.scene.cue ?? ""}`;
  } else if (state.scene.kind === "complex") {
    const w = activeWindow(state);
    banner.textContent = w === null ? "complex run: wait for a window" : `focus color ${w.color}`;
  } else {
    banner.textContent = state.cue === null ? "speller run" : `spell target ${state.cue}`;
  }

  const body = el("summaries");
  body.innerHTML = state.summaries
    .map(
      (row) =>
        `<tr><td>${row.runId}</td><td>${row.taskType}</td><td>${row.correct}/${row.nTrials}</td>` +
        `<td>${pct(row.accuracy)}</td><td>${secs(row.taskTimeS)}</td>` +
        `<td>${fixed(row.bitsPerSelection)}</td><td>${fixed(row.bitsPerMin, 1)}</td></tr>`,
    )
    .join("");

  el("errors").textContent = state.errors.join(" · ");
  el("overlay").style.display = status === "paused" ? "flex" : "none";
}

function frame(): void {
  drainQueue();
  hover.tick();
  layout = renderScene(ctx, canvas.width, canvas.height, state);
  if (dirty) {
    renderPanels();
    dirty = false;
  } else {
    const countdownOn = state.scene !== null && state.scene.deadlineT !== null;
    if (countdownOn) renderPanels();
  }
  requestAnimationFrame(frame);
}

canvas.addEventListener("pointermove", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const x = ((ev.clientX - rect.left) / rect.width) * canvas.width;
  const y = ((ev.clientY - rect.top) / rect.height) * canvas.height;
  hover.pointerAt(targetAt(layout, x, y));
});
canvas.addEventListener("pointerleave", () => hover.pointerAt(null));

function textureChoice(): TextureKind {
  return (el<HTMLSelectElement>("texture").value as TextureKind) ?? "checkerboard";
}

el("btn-calibrate").addEventListener("click", () => {
  client.send(startPhase("calibration", { texture: textureChoice() })).catch((e) => pushError(String(e)));
});
el("btn-speller").addEventListener("click", () => {
  client.send(startPhase("speller", { texture: textureChoice() })).catch((e) => pushError(String(e)));
});
el("btn-timed").addEventListener("click", () => {
  client
    .send(startPhase("speller", { texture: textureChoice(), deadlineS: 90 }))
    .catch((e) => pushError(String(e)));
});
el("btn-complex").addEventListener("click", () => {
  client.send(startPhase("complex", { texture: textureChoice() })).catch((e) => pushError(String(e)));
});
el("btn-end").addEventListener("click", () => {
  client.send(endScene()).catch((e) => pushError(String(e)));
});

client
  .connect()
  .then((welcome) => {
    // the bridge returns the welcome in the POST reply, outside the stream;
    // seed the reducer with it and let the stream take over from seq 0
    state = applyWelcome(state, welcome as unknown as WelcomePayload, String(welcome.session));
    dirty = true;
  })
  .catch((err) => pushError(`connect failed: ${err}`));

requestAnimationFrame(frame);

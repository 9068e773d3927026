// Canvas scene renderer. Each target is one tile of the engine-provided
// texture bit-grid; the flashed target is drawn with the palette inverted.
// Drawn strictly from UiSessionState, so whatever the last flash message
// said is what appears on the next frame.

import type { UiSessionState } from "./state.js";
import { activeWindow, countdownS, outlineActive } from "./state.js";

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

// subset of CanvasRenderingContext2D the renderer touches; tests substitute a
// recording stub
export interface Canvas2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  font: string;
  textAlign: string;
  textBaseline: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

export const STAGE_BG = "#111318";
export const TILE_BG = "#d9d5cb";
export const TILE_FG = "#24221e";
export const OUTLINE_OK = "#2fbf71";
export const OUTLINE_BAD = "#e4572e";
export const CUE_MARK = "#ffd166";
export const ACTIVATION_RING = "#f5f5f5";
export const NPC_COLORS = ["#e4572e", "#29b6f6", "#ffd166", "#9b5de5", "#06d6a0"];

const PAD = 14;
const ACTIVATION_PULSE_S = 0.3;

export function layoutTargets(n: number, width: number, height: number): Rect[] {
  const cols = Math.min(n, 5);
  const rows = Math.ceil(n / cols);
  const tile = Math.min(
    (width - PAD * (cols + 1)) / cols,
    (height - PAD * (rows + 1)) / rows,
  );
  const ox = (width - (cols * tile + (cols + 1) * PAD)) / 2;
  const oy = (height - (rows * tile + (rows + 1) * PAD)) / 2;
  const out: Rect[] = [];
  for (let i = 0; i < n; i++) {
    const c = i % cols;
    const r = Math.floor(i / cols);
    out.push({
      x: ox + PAD + c * (tile + PAD),
      y: oy + PAD + r * (tile + PAD),
      w: tile,
      h: tile,
    });
  }
  return out;
}

export function targetAt(layout: Rect[], x: number, y: number): number | null {
  for (let i = 0; i < layout.length; i++) {
    const r = layout[i];
    if (x >= r.x && x <= r.x + r.w && y >= r.y && y <= r.y + r.h) return i;
  }
  return null;
}

function drawTile(ctx: Canvas2D, rect: Rect, cells: number[][], inverted: boolean): void {
  const bg = inverted ? TILE_FG : TILE_BG;
  const fg = inverted ? TILE_BG : TILE_FG;
  ctx.fillStyle = bg;
  ctx.fillRect(rect.x, rect.y, rect.w, rect.h);
  const n = cells.length;
  if (n === 0) return;
  const ch = rect.h / n;
  for (let r = 0; r < n; r++) {
    const row = cells[r];
    const cw = rect.w / row.length;
    for (let c = 0; c < row.length; c++) {
      if (row[c]) {
        ctx.fillStyle = fg;
        ctx.fillRect(rect.x + c * cw, rect.y + r * ch, cw, ch);
      }
    }
  }
}

export function renderScene(
  ctx: Canvas2D,
  width: number,
  height: number,
  state: UiSessionState,
): Rect[] {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = STAGE_BG;
  ctx.fillRect(0, 0, width, height);

  const scene = state.scene;
  if (scene === null) {
    ctx.fillStyle = "#8a8f98";
    ctx.font = "16px system-ui, sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.fillText("no active scene", width / 2, height / 2);
    return [];
  }

  const layout = layoutTargets(scene.nTargets, width, height);
  const flashTarget = state.flash === null || scene.done ? null : state.flash.target;
  const window_ = activeWindow(state);

  for (let i = 0; i < layout.length; i++) {
    drawTile(ctx, layout[i], scene.cells, i === flashTarget);
    if (scene.kind === "complex") {
      ctx.strokeStyle = NPC_COLORS[i % NPC_COLORS.length];
      ctx.lineWidth = window_ !== null && window_.color === i ? 6 : 2;
      ctx.strokeRect(layout[i].x - 4, layout[i].y - 4, layout[i].w + 8, layout[i].h + 8);
    }
  }

  ctx.font = "13px system-ui, sans-serif";
  ctx.textAlign = "center";
  ctx.textBaseline = "top";
  for (let i = 0; i < layout.length; i++) {
    ctx.fillStyle = "#8a8f98";
    ctx.fillText(String(i), layout[i].x + layout[i].w / 2, layout[i].y + layout[i].h + 4);
  }

  const cue = scene.kind === "calibration" ? scene.cue : state.cue;
  if (cue !== null && cue < layout.length && !scene.done) {
    const r = layout[cue];
    ctx.fillStyle = CUE_MARK;
    ctx.textBaseline = "bottom";
    ctx.fillText("▼", r.x + r.w / 2, r.y - 6);
  }

  const act = state.activation;
  if (act !== null && state.tServer - act.t < ACTIVATION_PULSE_S && act.target < layout.length) {
    const r = layout[act.target];
    ctx.strokeStyle = ACTIVATION_RING;
    ctx.lineWidth = 2;
    ctx.strokeRect(r.x - 10, r.y - 10, r.w + 20, r.h + 20);
  }

  const outline = outlineActive(state);
  if (outline !== null && outline.target < layout.length) {
    const r = layout[outline.target];
    ctx.strokeStyle = outline.correct ? OUTLINE_OK : OUTLINE_BAD;
    ctx.lineWidth = 6;
    ctx.strokeRect(r.x - 6, r.y - 6, r.w + 12, r.h + 12);
  }

  const remaining = countdownS(state);
  if (remaining !== null) {
    ctx.fillStyle = remaining < 10 ? OUTLINE_BAD : "#e8e6e1";
    ctx.font = "20px system-ui, sans-serif";
    ctx.textAlign = "right";
    ctx.textBaseline = "top";
    ctx.fillText(`${remaining.toFixed(1)} s`, width - 16, 12);
  }

  return layout;
}

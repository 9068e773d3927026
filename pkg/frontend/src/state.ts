// Session state reducer. The UI is stateless with respect to game rules:
// every number shown to the player (accuracy, ITR, tallies, grades) is copied
// verbatim from a server message. Nothing in here counts or scores.

import type {
  CalibrationMsg,
  Phase,
  RunSummaryMsg,
  SceneMsg,
  ServerMessage,
  WelcomePayload,
} from "./wire.js";

export interface EngineInfo {
  engineVersion: string;
  fs: number;
  tickS: number;
  threshold: number;
  dwellS: number;
}

export interface ComplexWindow {
  color: number;
  start: number;
  end: number;
}

export interface SceneState {
  kind: Phase;
  nTargets: number;
  cells: number[][];
  textureKind: string;
  t0: number;
  deadlineT: number | null;
  nCues: number | null;
  cue: number | null;
  cycles: number | null;
  schedule: ComplexWindow[];
  done: boolean;
}

export interface RunSummaryRow {
  runId: string;
  taskType: string;
  correct: number;
  incorrect: number;
  nTrials: number;
  accuracy: number | null;
  taskTimeS: number;
  bitsPerSelection: number;
  bitsPerMin: number;
  t: number;
}

export interface CalibrationResult {
  cue: number;
  cvAccuracy: number;
  grade: string;
  nTarget: number;
  nNontarget: number;
  t: number;
}

export interface UiSessionState {
  sessionId: string | null;
  engine: EngineInfo | null;
  phase: string;
  tServer: number;
  scene: SceneState | null;
  flash: { target: number; t: number; cycle: number } | null;
  cue: number | null;
  confidence: number[];
  activation: { target: number; confidence: number; forced: boolean; t: number } | null;
  outline: { target: number; correct: boolean; until: number } | null;
  calibration: CalibrationResult | null;
  summaries: RunSummaryRow[];
  errors: string[];
}

export function initialState(): UiSessionState {
  return {
    sessionId: null,
    engine: null,
    phase: "idle",
    tServer: 0,
    scene: null,
    flash: null,
    cue: null,
    confidence: [],
    activation: null,
    outline: null,
    calibration: null,
    summaries: [],
    errors: [],
  };
}

const OUTLINE_S = 0.5;
const MAX_ERRORS = 5;

export function applyWelcome(
  state: UiSessionState,
  welcome: WelcomePayload,
  sessionId: string,
): UiSessionState {
  return {
    ...state,
    sessionId,
    engine: {
      engineVersion: welcome.engine_version,
      fs: welcome.fs,
      tickS: welcome.tick_s,
      threshold: welcome.threshold,
      dwellS: welcome.dwell_s,
    },
  };
}

function sceneState(msg: SceneMsg): SceneState {
  return {
    kind: msg.scene,
    nTargets: msg.n_targets,
    cells: msg.texture.grid,
    textureKind: msg.texture.kind,
    t0: msg.t,
    deadlineT: msg.deadline_s === null || msg.deadline_s === undefined ? null : msg.t + msg.deadline_s,
    nCues: msg.n_cues ?? null,
    cue: msg.cue ?? null,
    cycles: msg.cycles ?? null,
    schedule: (msg.schedule ?? []).map(([color, start, end]) => ({
      color,
      start: msg.t + start,
      end: msg.t + end,
    })),
    done: false,
  };
}

function summaryRow(msg: RunSummaryMsg): RunSummaryRow {
  return {
    runId: msg.run_id,
    taskType: msg.task_type,
    correct: msg.correct,
    incorrect: msg.incorrect,
    nTrials: msg.n_trials,
    accuracy: msg.accuracy,
    taskTimeS: msg.task_time_s,
    bitsPerSelection: msg.itr_bits_per_selection,
    bitsPerMin: msg.itr_bits_per_min,
    t: msg.t,
  };
}

function calibrationResult(msg: CalibrationMsg): CalibrationResult {
  return {
    cue: msg.cue,
    cvAccuracy: msg.cv_accuracy,
    grade: msg.grade,
    nTarget: msg.n_target,
    nNontarget: msg.n_nontarget,
    t: msg.t,
  };
}

export function reduce(state: UiSessionState, msg: ServerMessage): UiSessionState {
  const t = "t" in msg && typeof msg.t === "number" ? msg.t : state.tServer;
  const next: UiSessionState = { ...state, tServer: Math.max(state.tServer, t) };
  if ("session" in msg && typeof msg.session === "string") next.sessionId = msg.session;

  switch (msg.type) {
    case "welcome":
      return applyWelcome(next, msg, msg.session);
    case "scene":
      return {
        ...next,
        phase: msg.scene,
        scene: sceneState(msg),
        flash: null,
        cue: msg.cue ?? null,
        confidence: [],
        activation: null,
        outline: null,
      };
    case "flash":
      return { ...next, flash: { target: msg.target, t: msg.t, cycle: msg.cycle } };
    case "cue":
      return { ...next, cue: msg.target };
    case "confidence":
      return { ...next, confidence: msg.distribution.map(Number) };
    case "activation":
      return {
        ...next,
        activation: { target: msg.target, confidence: msg.confidence, forced: msg.forced, t: msg.t },
      };
    case "feedback": {
      // outline the symbol the player actually spelled when the activation is
      // from this tick; window-expiry feedback has no activation to point at
      const act = next.activation;
      const target = act !== null && act.t === msg.t ? act.target : msg.cue;
      return { ...next, outline: { target, correct: msg.correct, until: msg.t + OUTLINE_S } };
    }
    case "calibration":
      return { ...next, calibration: calibrationResult(msg), scene: null, phase: "idle", flash: null, cue: null };
    case "run_summary":
      return { ...next, summaries: [...next.summaries, summaryRow(msg)] };
    case "task_complete":
      return next.scene === null ? next : { ...next, scene: { ...next.scene, done: true }, flash: null };
    case "phase":
      if (msg.name === "idle") {
        return { ...next, phase: "idle", scene: null, flash: null, cue: null, confidence: [], activation: null };
      }
      return { ...next, phase: msg.name };
    case "error":
      return { ...next, errors: [...next.errors, msg.message].slice(-MAX_ERRORS) };
    default:
      return next;
  }
}

export function outlineActive(state: UiSessionState): { target: number; correct: boolean } | null {
  const o = state.outline;
  if (o === null || state.tServer >= o.until) return null;
  return { target: o.target, correct: o.correct };
}

export function countdownS(state: UiSessionState): number | null {
  const s = state.scene;
  if (s === null || s.deadlineT === null) return null;
  return Math.max(0, s.deadlineT - state.tServer);
}

export function activeWindow(state: UiSessionState): ComplexWindow | null {
  const s = state.scene;
  if (s === null) return null;
  for (const w of s.schedule) {
    if (w.start <= state.tServer && state.tServer <= w.end) return w;
  }
  return null;
}

// Wire protocol: newline-delimited JSON records, each stamped with a protocol
// version, a session id, and a per-session monotone sequence number.

export const PROTOCOL_V = 1;

export type TextureKind = "checkerboard" | "grain";
export type Phase = "calibration" | "speller" | "complex";

export interface TextureInfo {
  kind: TextureKind;
  density: number;
  seed: number;
}

interface Envelope {
  v: number;
  session: string;
  seq: number;
}

export interface WelcomePayload {
  type: "welcome";
  resumed: boolean;
  engine_version: string;
  fs: number;
  tick_s: number;
  threshold: number;
  dwell_s: number;
  texture: TextureInfo & { grid: number };
}

export type WelcomeMsg = Envelope & WelcomePayload;

export interface SceneMsg extends Envelope {
  type: "scene";
  t: number;
  scene: Phase;
  n_targets: number;
  texture: TextureInfo & { grid: number[][] };
  deadline_s: number | null;
  n_cues?: number;
  cue?: number;
  cycles?: number;
  schedule?: [number, number, number][];
}

export interface FlashMsg extends Envelope {
  type: "flash";
  t: number;
  target: number;
  cycle: number;
  context: string;
}

export interface CueMsg extends Envelope {
  type: "cue";
  t: number;
  target: number;
}

export interface ConfidenceMsg extends Envelope {
  type: "confidence";
  t: number;
  distribution: number[];
}

export interface ActivationMsg extends Envelope {
  type: "activation";
  t: number;
  target: number;
  confidence: number;
  forced: boolean;
}

export interface FeedbackMsg extends Envelope {
  type: "feedback";
  t: number;
  correct: boolean;
  cue: number;
}

export interface PhaseMsg extends Envelope {
  type: "phase";
  t: number;
  name: string;
}

export interface CalibrationMsg extends Envelope {
  type: "calibration";
  t: number;
  cue: number;
  cv_accuracy: number;
  grade: "red" | "yellow" | "green";
  n_target: number;
  n_nontarget: number;
}

export interface RunSummaryMsg extends Envelope {
  type: "run_summary";
  t: number;
  run_id: string;
  task_type: string;
  correct: number;
  incorrect: number;
  n_classes: number;
  n_trials: number;
  accuracy: number | null;
  task_time_s: number;
  itr_bits_per_selection: number;
  itr_bits_per_sec: number;
  itr_bits_per_min: number;
}

export interface TaskCompleteMsg extends Envelope {
  type: "task_complete";
  t: number;
  task_type: string;
}

export interface PongMsg extends Envelope {
  type: "pong";
  t: number;
}

export interface ErrorMsg {
  v: number;
  session?: string;
  seq?: number;
  type: "error";
  message: string;
}

export interface AckMsg extends Envelope {
  type: "ack";
  of?: string;
}

export type ServerMessage =
  | WelcomeMsg
  | SceneMsg
  | FlashMsg
  | CueMsg
  | ConfidenceMsg
  | ActivationMsg
  | FeedbackMsg
  | PhaseMsg
  | CalibrationMsg
  | RunSummaryMsg
  | TaskCompleteMsg
  | PongMsg
  | ErrorMsg
  | AckMsg;

export type ClientMessage =
  | { type: "hello"; session?: string }
  | { type: "attend"; target: number | null }
  | { type: "start_phase"; phase: Phase; n_cues?: number; texture?: TextureKind; deadline_s?: number }
  | { type: "configure"; profile: Record<string, number> }
  | { type: "end_scene" }
  | { type: "ping" };

export const hello = (session?: string): ClientMessage =>
  session === undefined ? { type: "hello" } : { type: "hello", session };

export const attend = (target: number | null): ClientMessage => ({ type: "attend", target });

export const startPhase = (
  phase: Phase,
  opts: { nCues?: number; texture?: TextureKind; deadlineS?: number } = {},
): ClientMessage => {
  const msg: Extract<ClientMessage, { type: "start_phase" }> = { type: "start_phase", phase };
  if (opts.nCues !== undefined) msg.n_cues = opts.nCues;
  if (opts.texture !== undefined) msg.texture = opts.texture;
  if (opts.deadlineS !== undefined) msg.deadline_s = opts.deadlineS;
  return msg;
};

export const endScene = (): ClientMessage => ({ type: "end_scene" });
export const ping = (): ClientMessage => ({ type: "ping" });

export class WireFormatError extends Error {}

const SERVER_TYPES = new Set([
  "welcome",
  "scene",
  "flash",
  "cue",
  "confidence",
  "activation",
  "feedback",
  "phase",
  "calibration",
  "run_summary",
  "task_complete",
  "pong",
  "error",
  "ack",
]);

function need(msg: Record<string, unknown>, field: string, kind: string): void {
  const value = msg[field];
  const ok =
    kind === "number"
      ? typeof value === "number" && Number.isFinite(value)
      : kind === "string"
        ? typeof value === "string"
        : kind === "boolean"
          ? typeof value === "boolean"
          : Array.isArray(value);
  if (!ok) throw new WireFormatError(`bad field "${field}" in ${String(msg.type)} message`);
}

const REQUIRED: Record<string, [string, string][]> = {
  scene: [["t", "number"], ["scene", "string"], ["n_targets", "number"]],
  flash: [["t", "number"], ["target", "number"]],
  cue: [["t", "number"], ["target", "number"]],
  confidence: [["t", "number"], ["distribution", "array"]],
  activation: [["t", "number"], ["target", "number"], ["confidence", "number"], ["forced", "boolean"]],
  feedback: [["t", "number"], ["correct", "boolean"], ["cue", "number"]],
  phase: [["t", "number"], ["name", "string"]],
  calibration: [["t", "number"], ["cue", "number"], ["cv_accuracy", "number"], ["grade", "string"]],
  run_summary: [["t", "number"], ["run_id", "string"], ["correct", "number"], ["incorrect", "number"]],
  task_complete: [["t", "number"]],
  error: [["message", "string"]],
  welcome: [["fs", "number"], ["tick_s", "number"], ["threshold", "number"], ["dwell_s", "number"]],
};

export function parseServerLine(line: string): ServerMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    throw new WireFormatError("line is not valid JSON");
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new WireFormatError("line is not a JSON object");
  }
  const msg = raw as Record<string, unknown>;
  if (msg.v !== PROTOCOL_V) {
    throw new WireFormatError(`bad field "v": expected ${PROTOCOL_V}, got ${String(msg.v)}`);
  }
  const type = msg.type;
  if (typeof type !== "string" || !SERVER_TYPES.has(type)) {
    throw new WireFormatError(`bad field "type": ${String(type)}`);
  }
  if (type !== "error") {
    // unattached error replies are the one record the gateway sends without
    // a session stamp
    if (typeof msg.session !== "string") throw new WireFormatError('bad field "session"');
    if (typeof msg.seq !== "number" || !Number.isInteger(msg.seq) || msg.seq < 0) {
      throw new WireFormatError('bad field "seq"');
    }
  }
  for (const [field, kind] of REQUIRED[type] ?? []) need(msg, field, kind);
  return msg as unknown as ServerMessage;
}

export class SeqAudit {
  private next: number | null = null;

  check(seq: number): "ok" | "gap" | "replay" {
    if (this.next === null || seq === this.next) {
      this.next = seq + 1;
      return "ok";
    }
    const verdict = seq > this.next ? "gap" : "replay";
    this.next = seq + 1;
    return verdict;
  }

  rebase(): void {
    this.next = null;
  }
}

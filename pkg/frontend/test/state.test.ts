import { describe, expect, it } from "vitest";
import {
  activeWindow,
  applyWelcome,
  countdownS,
  initialState,
  outlineActive,
  reduce,
} from "../src/state.js";
import type { UiSessionState } from "../src/state.js";
import { parseServerLine } from "../src/wire.js";
import type { ServerMessage, WelcomePayload } from "../src/wire.js";

let seq = 0;

function wm(body: object): ServerMessage {
  return parseServerLine(JSON.stringify({ v: 1, session: "s1", seq: seq++, ...body }));
}

const GRID = [
  [1, 0],
  [0, 1],
];

function spellerScene(extra: object = {}): ServerMessage {
  return wm({
    type: "scene",
    t: 2.0,
    scene: "speller",
    n_targets: 10,
    n_cues: 3,
    texture: { kind: "checkerboard", density: 0.5, seed: 0, grid: GRID },
    deadline_s: null,
    ...extra,
  });
}

function play(state: UiSessionState, msgs: ServerMessage[]): UiSessionState {
  return msgs.reduce(reduce, state);
}

const WELCOME: WelcomePayload = {
  type: "welcome",
  resumed: false,
  engine_version: "0.1.0",
  fs: 250.0,
  tick_s: 0.1,
  threshold: 0.95,
  dwell_s: 0.5,
  texture: { kind: "checkerboard", density: 0.5, seed: 0, grid: 16 },
};

describe("welcome", () => {
  it("captures the engine contract from the bridge reply", () => {
    const state = applyWelcome(initialState(), WELCOME, "s1");
    expect(state.sessionId).toBe("s1");
    expect(state.engine).toEqual({
      engineVersion: "0.1.0",
      fs: 250.0,
      tickS: 0.1,
      threshold: 0.95,
      dwellS: 0.5,
    });
  });
});

describe("scene and flash", () => {
  it("builds the target layout from the scene record", () => {
    const state = reduce(initialState(), spellerScene());
    expect(state.phase).toBe("speller");
    expect(state.scene?.nTargets).toBe(10);
    expect(state.scene?.cells).toEqual(GRID);
    expect(state.scene?.nCues).toBe(3);
    expect(state.tServer).toBe(2.0);
  });

  it("always shows the last flash message's target", () => {
    let state = reduce(initialState(), spellerScene());
    state = reduce(state, wm({ type: "flash", t: 2.1, target: 4, cycle: 0, context: "task_b" }));
    expect(state.flash?.target).toBe(4);
    state = reduce(state, wm({ type: "flash", t: 2.2, target: 7, cycle: 0, context: "task_b" }));
    expect(state.flash?.target).toBe(7);
  });

  it("a new scene clears stale flash, cue, and confidence", () => {
    let state = play(initialState(), [
      spellerScene(),
      wm({ type: "flash", t: 2.1, target: 4, cycle: 0, context: "task_b" }),
      wm({ type: "cue", t: 2.1, target: 5 }),
      wm({ type: "confidence", t: 2.2, distribution: [0.5, 0.5] }),
    ]);
    state = reduce(state, spellerScene({ t: 9.0 }));
    expect(state.flash).toBeNull();
    expect(state.cue).toBeNull();
    expect(state.confidence).toEqual([]);
  });

  it("calibration scenes carry their cue and cycle count", () => {
    const state = reduce(
      initialState(),
      wm({
        type: "scene",
        t: 0.0,
        scene: "calibration",
        n_targets: 10,
        cue: 6,
        cycles: 60,
        texture: { kind: "grain", density: 0.5, seed: 0, grid: GRID },
        deadline_s: null,
      }),
    );
    expect(state.scene?.kind).toBe("calibration");
    expect(state.scene?.cue).toBe(6);
    expect(state.scene?.cycles).toBe(60);
  });
});

describe("cue and confidence", () => {
  it("tracks the current cue and posterior distribution", () => {
    const dist = [0.01, 0.02, 0.9, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01];
    const state = play(initialState(), [
      spellerScene(),
      wm({ type: "cue", t: 2.1, target: 2 }),
      wm({ type: "confidence", t: 2.2, distribution: dist }),
    ]);
    expect(state.cue).toBe(2);
    expect(state.confidence).toEqual(dist);
    const total = state.confidence.reduce((a, b) => a + b, 0);
    expect(Math.abs(total - 1)).toBeLessThan(0.01);
  });
});

describe("feedback outline", () => {
  it("outlines the activated target for 500 ms of server time", () => {
    let state = play(initialState(), [
      spellerScene(),
      wm({ type: "activation", t: 6.0, target: 3, confidence: 0.97, forced: false }),
      wm({ type: "feedback", t: 6.0, correct: true, cue: 3 }),
    ]);
    expect(outlineActive(state)).toEqual({ target: 3, correct: true });
    state = reduce(state, wm({ type: "confidence", t: 6.4, distribution: [1.0] }));
    expect(outlineActive(state)).toEqual({ target: 3, correct: true });
    state = reduce(state, wm({ type: "confidence", t: 6.5, distribution: [1.0] }));
    expect(outlineActive(state)).toBeNull();
  });

  it("points the outline at the spelled symbol, not the cue, on a miss", () => {
    const state = play(initialState(), [
      spellerScene(),
      wm({ type: "activation", t: 6.0, target: 8, confidence: 0.96, forced: false }),
      wm({ type: "feedback", t: 6.0, correct: false, cue: 3 }),
    ]);
    expect(outlineActive(state)).toEqual({ target: 8, correct: false });
  });

  it("falls back to the cue for window-expiry feedback with no activation", () => {
    const state = play(initialState(), [
      spellerScene(),
      wm({ type: "feedback", t: 12.0, correct: false, cue: 2 }),
    ]);
    expect(outlineActive(state)).toEqual({ target: 2, correct: false });
  });
});

describe("server-computed tallies only", () => {
  it("keeps no running score: feedback events change no displayed totals", () => {
    const base = play(initialState(), [spellerScene()]);
    const after = play(base, [
      wm({ type: "activation", t: 5.0, target: 1, confidence: 0.96, forced: false }),
      wm({ type: "feedback", t: 5.0, correct: true, cue: 1 }),
      wm({ type: "activation", t: 9.0, target: 2, confidence: 0.96, forced: false }),
      wm({ type: "feedback", t: 9.0, correct: true, cue: 2 }),
    ]);
    expect(after.summaries).toEqual([]);
    const scrubbed = JSON.parse(JSON.stringify({ ...after, activation: null, outline: null, tServer: 0 }));
    const baseline = JSON.parse(JSON.stringify({ ...base, tServer: 0 }));
    expect(scrubbed).toEqual(baseline);
  });

  it("copies run_summary records verbatim, including absent accuracy", () => {
    let state = play(initialState(), [spellerScene()]);
    state = reduce(
      state,
      wm({
        type: "run_summary",
        t: 30.0,
        run_id: "live_01_speller",
        task_type: "speller",
        correct: 5,
        incorrect: 1,
        n_classes: 10,
        n_trials: 6,
        accuracy: 0.8333333333333334,
        task_time_s: 28.0,
        itr_bits_per_selection: 2.12,
        itr_bits_per_sec: 0.45,
        itr_bits_per_min: 27.3,
      }),
    );
    state = reduce(
      state,
      wm({
        type: "run_summary",
        t: 31.0,
        run_id: "live_02_speller",
        task_type: "speller",
        correct: 0,
        incorrect: 0,
        n_classes: 10,
        n_trials: 0,
        accuracy: null,
        task_time_s: 0.0,
        itr_bits_per_selection: 0.0,
        itr_bits_per_sec: 0.0,
        itr_bits_per_min: 0.0,
      }),
    );
    expect(state.summaries).toHaveLength(2);
    expect(state.summaries[0].correct).toBe(5);
    expect(state.summaries[0].accuracy).toBeCloseTo(0.8333, 3);
    expect(state.summaries[0].bitsPerMin).toBe(27.3);
    expect(state.summaries[1].accuracy).toBeNull();
  });
});

describe("phase transitions", () => {
  it("calibration result ends the scene and stores the server grade", () => {
    let state = play(initialState(), [
      wm({
        type: "scene",
        t: 0.0,
        scene: "calibration",
        n_targets: 10,
        cue: 4,
        cycles: 60,
        texture: { kind: "checkerboard", density: 0.5, seed: 0, grid: GRID },
        deadline_s: null,
      }),
    ]);
    state = reduce(
      state,
      wm({
        type: "calibration",
        t: 60.0,
        cue: 4,
        cv_accuracy: 0.93,
        grade: "green",
        n_target: 60,
        n_nontarget: 540,
      }),
    );
    expect(state.scene).toBeNull();
    expect(state.phase).toBe("idle");
    expect(state.calibration?.grade).toBe("green");
    expect(state.calibration?.cvAccuracy).toBe(0.93);
  });

  it("task_complete marks the scene done; phase idle clears it", () => {
    let state = play(initialState(), [
      spellerScene(),
      wm({ type: "flash", t: 2.1, target: 1, cycle: 0, context: "task_b" }),
      wm({ type: "task_complete", t: 20.0, task_type: "speller" }),
    ]);
    expect(state.scene?.done).toBe(true);
    expect(state.flash).toBeNull();
    state = reduce(state, wm({ type: "phase", t: 20.0, name: "idle" }));
    expect(state.scene).toBeNull();
    expect(state.phase).toBe("idle");
  });

  it("accumulates error messages with a bounded backlog", () => {
    let state = initialState();
    for (let i = 0; i < 8; i++) {
      state = reduce(state, wm({ type: "error", message: `e${i}` }));
    }
    expect(state.errors).toEqual(["e3", "e4", "e5", "e6", "e7"]);
  });
});

describe("countdown and complex windows", () => {
  it("counts down to a deadline as server time advances", () => {
    let state = reduce(initialState(), spellerScene({ deadline_s: 90.0 }));
    expect(countdownS(state)).toBeCloseTo(90.0, 6);
    state = reduce(state, wm({ type: "confidence", t: 10.0, distribution: [1.0] }));
    const later = countdownS(state);
    expect(later).toBeCloseTo(82.0, 6);
    state = reduce(state, wm({ type: "confidence", t: 500.0, distribution: [1.0] }));
    expect(countdownS(state)).toBe(0);
  });

  it("selects the scheduled window that spans server time", () => {
    let state = reduce(
      initialState(),
      wm({
        type: "scene",
        t: 10.0,
        scene: "complex",
        n_targets: 5,
        schedule: [
          [2, 0.0, 6.0],
          [0, 8.0, 14.0],
        ],
        texture: { kind: "checkerboard", density: 0.5, seed: 0, grid: GRID },
        deadline_s: null,
      }),
    );
    expect(activeWindow(state)?.color).toBe(2);
    state = reduce(state, wm({ type: "confidence", t: 20.0, distribution: [1, 0, 0, 0, 0] }));
    expect(activeWindow(state)?.color).toBe(0);
    state = reduce(state, wm({ type: "confidence", t: 30.0, distribution: [1, 0, 0, 0, 0] }));
    expect(activeWindow(state)).toBeNull();
  });
});

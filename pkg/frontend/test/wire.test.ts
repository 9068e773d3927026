import { describe, expect, it } from "vitest";
import {
  PROTOCOL_V,
  SeqAudit,
  WireFormatError,
  attend,
  endScene,
  hello,
  parseServerLine,
  ping,
  startPhase,
} from "../src/wire.js";

const line = (body: object) => JSON.stringify({ v: PROTOCOL_V, session: "s1", seq: 0, ...body });

describe("parseServerLine", () => {
  it("accepts a stamped flash record", () => {
    const msg = parseServerLine(line({ type: "flash", t: 1.5, target: 4, cycle: 2, context: "task_b" }));
    expect(msg.type).toBe("flash");
    if (msg.type === "flash") {
      expect(msg.target).toBe(4);
      expect(msg.seq).toBe(0);
    }
  });

  it("rejects malformed JSON", () => {
    expect(() => parseServerLine("{nope")).toThrow(WireFormatError);
  });

  it("rejects non-object payloads", () => {
    expect(() => parseServerLine("[1,2]")).toThrow(/JSON object/);
  });

  it("rejects a missing or wrong protocol version, naming the field", () => {
    expect(() => parseServerLine(JSON.stringify({ session: "s1", seq: 0, type: "pong", t: 0 }))).toThrow(
      /"v"/,
    );
    expect(() => parseServerLine(line({ type: "pong", t: 0 }).replace('"v":1', '"v":2'))).toThrow(/"v"/);
  });

  it("rejects unknown types", () => {
    expect(() => parseServerLine(line({ type: "mystery" }))).toThrow(/"type"/);
  });

  it("rejects a missing sequence number", () => {
    const raw = JSON.stringify({ v: PROTOCOL_V, session: "s1", type: "pong", t: 0 });
    expect(() => parseServerLine(raw)).toThrow(/"seq"/);
  });

  it("rejects records missing a required payload field", () => {
    expect(() => parseServerLine(line({ type: "flash", t: 1.0 }))).toThrow(/"target"/);
    expect(() => parseServerLine(line({ type: "confidence", t: 1.0, distribution: 3 }))).toThrow(
      /"distribution"/,
    );
  });

  it("accepts an unattached error record without session or seq", () => {
    const msg = parseServerLine(JSON.stringify({ v: PROTOCOL_V, type: "error", message: "boom" }));
    expect(msg.type).toBe("error");
  });
});

describe("client message builders", () => {
  it("shapes hello with and without a session id", () => {
    expect(hello()).toEqual({ type: "hello" });
    expect(hello("s3")).toEqual({ type: "hello", session: "s3" });
  });

  it("shapes attend for a target and for release", () => {
    expect(attend(7)).toEqual({ type: "attend", target: 7 });
    expect(attend(null)).toEqual({ type: "attend", target: null });
  });

  it("shapes start_phase with only the requested options", () => {
    expect(startPhase("calibration")).toEqual({ type: "start_phase", phase: "calibration" });
    expect(startPhase("speller", { nCues: 4, texture: "grain", deadlineS: 90 })).toEqual({
      type: "start_phase",
      phase: "speller",
      n_cues: 4,
      texture: "grain",
      deadline_s: 90,
    });
  });

  it("shapes end_scene and ping", () => {
    expect(endScene()).toEqual({ type: "end_scene" });
    expect(ping()).toEqual({ type: "ping" });
  });
});

describe("SeqAudit", () => {
  it("accepts a gapless monotone stream from any base", () => {
    const audit = new SeqAudit();
    expect(audit.check(5)).toBe("ok");
    expect(audit.check(6)).toBe("ok");
    expect(audit.check(7)).toBe("ok");
  });

  it("flags gaps and replays, then resynchronizes", () => {
    const audit = new SeqAudit();
    expect(audit.check(0)).toBe("ok");
    expect(audit.check(3)).toBe("gap");
    expect(audit.check(4)).toBe("ok");
    expect(audit.check(2)).toBe("replay");
    expect(audit.check(3)).toBe("ok");
  });

  it("rebase starts a fresh baseline after a reconnect", () => {
    const audit = new SeqAudit();
    audit.check(0);
    audit.rebase();
    expect(audit.check(40)).toBe("ok");
    expect(audit.check(41)).toBe("ok");
  });
});

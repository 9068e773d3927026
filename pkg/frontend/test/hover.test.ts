import { describe, expect, it } from "vitest";
import { HoverController } from "../src/hover.js";

interface Sent {
  value: number | null;
  at: number;
}

function rig() {
  let t = 0;
  const sent: Sent[] = [];
  const hover = new HoverController((value) => sent.push({ value, at: t }), () => t);
  const advance = (ms: number, step = 5) => {
    const until = t + ms;
    while (t < until) {
      t = Math.min(until, t + step);
      hover.tick();
    }
  };
  return { hover, sent, advance, now: () => t };
}

describe("HoverController", () => {
  it("does not declare focus before the dwell time", () => {
    const { hover, sent, advance } = rig();
    hover.pointerAt(3);
    advance(150);
    expect(sent).toEqual([]);
  });

  it("declares focus after 200 ms of continuous hover", () => {
    const { hover, sent, advance } = rig();
    hover.pointerAt(3);
    advance(200);
    expect(sent).toEqual([{ value: 3, at: 200 }]);
    advance(500);
    expect(sent).toHaveLength(1);
  });

  it("moving between targets restarts the dwell clock", () => {
    const { hover, sent, advance } = rig();
    hover.pointerAt(1);
    advance(150);
    hover.pointerAt(2);
    advance(150);
    expect(sent).toEqual([]);
    advance(50);
    expect(sent).toEqual([{ value: 2, at: 350 }]);
  });

  it("leaving releases focus without a dwell wait", () => {
    const { hover, sent, advance } = rig();
    hover.pointerAt(5);
    advance(250);
    advance(100);
    hover.pointerAt(null);
    advance(10);
    expect(sent.map((s) => s.value)).toEqual([5, null]);
  });

  it("rate-limits a release that follows a send too closely", () => {
    const { hover, sent, advance } = rig();
    hover.pointerAt(5);
    advance(200);
    hover.pointerAt(null);
    advance(40);
    expect(sent.map((s) => s.value)).toEqual([5]);
    advance(60);
    expect(sent).toEqual([
      { value: 5, at: 200 },
      { value: null, at: 300 },
    ]);
  });

  it("never exceeds one message per 100 ms under pointer jitter", () => {
    const { hover, sent, advance } = rig();
    let x = 12345;
    const rand = () => {
      x = (1103515245 * x + 12345) % 2147483648;
      return x / 2147483648;
    };
    const spots: (number | null)[] = [0, 1, 2, null];
    for (let i = 0; i < 400; i++) {
      const r = rand();
      if (r < 0.3) hover.pointerAt(spots[Math.floor(rand() * spots.length)]);
      advance(10);
    }
    for (let i = 1; i < sent.length; i++) {
      expect(sent[i].at - sent[i - 1].at).toBeGreaterThanOrEqual(100);
    }
    const seconds = 4;
    expect(sent.length).toBeLessThanOrEqual(10 * seconds);
    for (let i = 1; i < sent.length; i++) {
      expect(sent[i].value).not.toBe(sent[i - 1].value);
    }
  });

  it("collapses a queued release when the pointer returns in time", () => {
    const { hover, sent, advance } = rig();
    hover.pointerAt(4);
    advance(200);
    hover.pointerAt(null);
    advance(20);
    hover.pointerAt(4);
    advance(300);
    expect(sent.map((s) => s.value)).toEqual([4]);
  });
});

// Pointer hover is the attention proxy: dwelling on a target for 200 ms
// declares focus, leaving declares none. Sends are throttled to one per
// 100 ms with latest-wins queueing so rapid jitter cannot flood the wire.

export type AttendSend = (target: number | null) => void;

export class HoverController {
  private over: number | null = null;
  private since = 0;
  private sent: number | null = null;
  private queued: number | null | undefined = undefined;
  private lastSendAt = -Infinity;

  constructor(
    private send: AttendSend,
    private now: () => number,
    private dwellMs = 200,
    private minGapMs = 100,
  ) {}

  pointerAt(target: number | null): void {
    if (target === this.over) return;
    this.over = target;
    this.since = this.now();
    if (target === null) {
      this.request(null);
    } else if (target === this.sent) {
      // back on the declared target before a queued change went out: the
      // declared state already matches, so drop the stale send
      this.queued = undefined;
    }
  }

  tick(): void {
    if (this.over !== null && this.over !== this.sent && this.now() - this.since >= this.dwellMs) {
      this.request(this.over);
    }
    if (this.queued !== undefined && this.now() - this.lastSendAt >= this.minGapMs) {
      const value = this.queued;
      this.queued = undefined;
      this.dispatch(value);
    }
  }

  private request(value: number | null): void {
    if (this.now() - this.lastSendAt < this.minGapMs) {
      this.queued = value;
      return;
    }
    this.queued = undefined;
    this.dispatch(value);
  }

  private dispatch(value: number | null): void {
    if (value === this.sent) return;
    this.sent = value;
    this.lastSendAt = this.now();
    this.send(value);
  }
}

// Trailing-edge rate limiter for marker drags: at most maxPerSecond sends,
// and the most recent value always goes out eventually.

export class RateLimiter<T> {
  private lastSent = -Infinity;
  private pending: T | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  readonly minIntervalMs: number;

  constructor(
    maxPerSecond: number,
    private send: (value: T) => void,
    private now: () => number = () => performance.now(),
  ) {
    this.minIntervalMs = 1000 / maxPerSecond;
  }

  push(value: T): void {
    const t = this.now();
    if (t - this.lastSent >= this.minIntervalMs) {
      this.lastSent = t;
      this.send(value);
      return;
    }
    this.pending = value;
    if (this.timer === null) {
      const wait = this.minIntervalMs - (t - this.lastSent);
      this.timer = setTimeout(() => this.flush(), wait);
    }
  }

  private flush(): void {
    this.timer = null;
    if (this.pending === null) return;
    this.lastSent = this.now();
    const value = this.pending;
    this.pending = null;
    this.send(value);
  }

  dispose(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    this.pending = null;
  }
}

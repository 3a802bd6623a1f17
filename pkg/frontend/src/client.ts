// Socket client: connect/reconnect, snapshot inbox, cue + marker sending.
//
// The transport is injected (browser WebSocket by default, `ws` in node
// tests). All server state lands in `latest`; the UI is a pure function
// of it plus the connection status.

import {
  ClientMessage,
  CueKind,
  EventEntry,
  HelloMessage,
  SnapshotMessage,
  parseServerMessage,
} from "./protocol.js";
import { RateLimiter } from "./throttle.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface StageClientOptions {
  socketFactory?: SocketFactory;
  markerRateHz?: number;
  reconnectBaseMs?: number;
  reconnectMaxMs?: number;
  now?: () => number;
}

export class StageClient {
  status: ConnectionStatus = "disconnected";
  hello: HelloMessage | null = null;
  latest: SnapshotMessage | null = null;
  lastSnapshotAt = -Infinity;
  events: EventEntry[] = [];
  errors: string[] = [];
  markerSendCount = 0;

  onupdate: (() => void) | null = null;
  ontoast: ((message: string) => void) | null = null;

  private socket: SocketLike | null = null;
  private url = "";
  private attempts = 0;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private disposed = false;
  private readonly factory: SocketFactory;
  private readonly marker: RateLimiter<[number, number]>;
  private readonly baseMs: number;
  private readonly maxMs: number;
  private readonly now: () => number;

  constructor(opts: StageClientOptions = {}) {
    this.factory =
      opts.socketFactory ??
      ((url) => new WebSocket(url) as unknown as SocketLike);
    this.baseMs = opts.reconnectBaseMs ?? 500;
    this.maxMs = opts.reconnectMaxMs ?? 8000;
    this.now = opts.now ?? (() => Date.now());
    this.marker = new RateLimiter(
      opts.markerRateHz ?? 20,
      ([x, y]) => {
        this.sendRaw({ v: 1, type: "marker", x, y });
        this.markerSendCount += 1;
      },
      this.now,
    );
  }

  connect(url: string): void {
    this.url = url;
    this.disposed = false;
    this.open();
  }

  private open(): void {
    if (this.disposed) return;
    this.status = "connecting";
    this.notify();
    let sock: SocketLike;
    try {
      sock = this.factory(this.url);
    } catch {
      this.scheduleReconnect();
      return;
    }
    this.socket = sock;
    sock.onopen = () => {
      this.attempts = 0;
      this.status = "connected";
      this.notify();
    };
    sock.onmessage = (ev) => this.handleMessage(String(ev.data));
    sock.onerror = () => {
      /* onclose follows; nothing to do here */
    };
    sock.onclose = () => {
      this.socket = null;
      this.status = "disconnected";
      this.notify();
      this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    if (this.disposed || this.reconnectTimer !== null) return;
    const delay = Math.min(this.maxMs, this.baseMs * 2 ** this.attempts);
    this.attempts += 1;
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      this.open();
    }, delay);
  }

  private handleMessage(text: string): void {
    const msg = parseServerMessage(text);
    if (msg === null) return;
    if (msg.type === "hello") {
      this.hello = msg;
    } else if (msg.type === "snapshot") {
      this.latest = msg;
      this.lastSnapshotAt = this.now();
      if (msg.events.length) this.events.push(...msg.events);
    } else {
      this.errors.push(msg.message);
      this.ontoast?.(msg.message);
    }
    this.notify();
  }

  get stale(): boolean {
    return (
      this.latest !== null && this.now() - this.lastSnapshotAt > 2000
    );
  }

  private sendRaw(msg: ClientMessage): void {
    if (this.socket === null || this.status !== "connected") return;
    this.socket.send(JSON.stringify(msg));
  }

  sendCue(kind: CueKind, program?: string, swarm?: string): void {
    const msg: ClientMessage = { v: 1, type: "command", kind };
    if (program !== undefined) msg.program = program;
    if (swarm !== undefined) msg.swarm = swarm;
    this.sendRaw(msg);
  }

  // Coordinates are clamped to the venue before anything goes on the wire.
  dragMarker(x: number, y: number): void {
    const venue = this.hello?.venue ?? [6, 12];
    const cx = Math.min(Math.max(x, 0), venue[0]);
    const cy = Math.min(Math.max(y, 0), venue[1]);
    this.marker.push([cx, cy]);
  }

  pause(): void {
    this.sendRaw({ v: 1, type: "pause" });
  }

  resume(): void {
    this.sendRaw({ v: 1, type: "resume" });
  }

  dispose(): void {
    this.disposed = true;
    this.marker.dispose();
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.reconnectTimer = null;
    this.socket?.close();
    this.socket = null;
  }

  private notify(): void {
    this.onupdate?.();
  }
}

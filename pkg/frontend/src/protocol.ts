// Message schema of the simulator's websocket API (v1).

export interface RobotState {
  id: number;
  class: "tabletop" | "aerial" | "human_scale";
  x: number;
  y: number;
  z: number;
  yaw: number;
  phase: number;
  program: number;
  active: boolean;
}

export interface EventEntry {
  t: number;
  kind: string;
  detail: string;
}

export interface BandwidthWindow {
  t: number;
  total_Bps: number;
  gossip_Bps: number;
  transfer_Bps: number;
  events: string[];
}

export interface HelloMessage {
  v: number;
  type: "hello";
  venue: [number, number];
  programs: Record<string, number>;
  paused: boolean;
  duration: number;
}

export interface SnapshotMessage {
  v: number;
  type: "snapshot";
  t: number;
  robots: RobotState[];
  marker: [number, number] | null;
  events: EventEntry[];
  bandwidth_window: BandwidthWindow;
  paused: boolean;
}

export interface ErrorMessage {
  v: number;
  type: "error";
  message: string;
}

export type ServerMessage = HelloMessage | SnapshotMessage | ErrorMessage;

export type CueKind = "launch" | "switch" | "stop";

export interface CommandMessage {
  v: 1;
  type: "command";
  kind: CueKind;
  program?: string;
  swarm?: string;
}

export interface MarkerMessage {
  v: 1;
  type: "marker";
  x: number;
  y: number;
}

export type ClientMessage =
  | CommandMessage
  | MarkerMessage
  | { v: 1; type: "pause" }
  | { v: 1; type: "resume" }
  | { v: 1; type: "set_seed"; seed: number };

export function parseServerMessage(text: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const t = (doc as { type?: unknown }).type;
  if (t === "hello" || t === "snapshot" || t === "error") {
    return doc as ServerMessage;
  }
  return null;
}

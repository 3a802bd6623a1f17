// Pure derivation of everything the stage draws from the latest
// acknowledged snapshot. No client-side physics: positions are shown
// where the server last said they are (the renderer may interpolate
// toward them for smoothness, never ahead of them).

import { StageClient } from "./client.js";
import { RobotState } from "./protocol.js";

export interface RobotGlyph {
  id: number;
  x: number;
  y: number;
  yaw: number;
  glyph: "square" | "ring" | "arrow"; // tabletop / aerial / human-scale
  altitude: number;
  phaseColor: string;
  active: boolean;
}

export interface StageViewModel {
  venue: [number, number];
  robots: RobotGlyph[];
  marker: [number, number] | null;
  t: number;
  paused: boolean;
  connection: string;
  stale: boolean;
  programNames: Record<number, string>;
  selectedProgram: string | null;
  bandwidth: { t: number; total: number; events: string[] } | null;
  toasts: string[];
}

const PHASE_COLORS = [
  "#4dd0e1", "#ffb74d", "#aed581", "#ba68c8",
  "#f06292", "#fff176", "#90a4ae", "#ff8a65",
];

function glyphFor(cls: RobotState["class"]): RobotGlyph["glyph"] {
  if (cls === "tabletop") return "square";
  if (cls === "aerial") return "ring";
  return "arrow";
}

export function buildViewModel(
  client: StageClient,
  selectedProgram: string | null,
  toasts: string[] = [],
): StageViewModel {
  const venue = client.hello?.venue ?? [6, 12];
  const snap = client.latest;
  const programNames: Record<number, string> = {};
  for (const [name, id] of Object.entries(client.hello?.programs ?? {})) {
    programNames[id] = name;
  }
  return {
    venue,
    robots: (snap?.robots ?? []).map((r) => ({
      id: r.id,
      x: r.x,
      y: r.y,
      yaw: r.yaw,
      glyph: glyphFor(r.class),
      altitude: r.z,
      phaseColor: PHASE_COLORS[r.phase % PHASE_COLORS.length],
      active: r.active,
    })),
    marker: snap?.marker ?? null,
    t: snap?.t ?? 0,
    paused: snap?.paused ?? true,
    connection: client.status,
    stale: client.stale,
    programNames,
    selectedProgram,
    bandwidth: snap
      ? {
          t: snap.bandwidth_window.t,
          total: snap.bandwidth_window.total_Bps,
          events: snap.bandwidth_window.events,
        }
      : null,
    toasts,
  };
}

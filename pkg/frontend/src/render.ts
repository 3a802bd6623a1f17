// Canvas renderer: the stage plan view plus a bandwidth sparkline.
// Meters map to pixels through one affine transform; robots are small
// glyphs colored by behavior phase; aerial robots carry an altitude ring.

import { StageViewModel } from "./viewmodel.js";

export interface StageTransform {
  scale: number;
  ox: number;
  oy: number;
}

export function fitTransform(
  venue: [number, number],
  width: number,
  height: number,
  margin = 20,
): StageTransform {
  const scale = Math.min(
    (width - 2 * margin) / venue[0],
    (height - 2 * margin) / venue[1],
  );
  return {
    scale,
    ox: (width - venue[0] * scale) / 2,
    oy: (height - venue[1] * scale) / 2,
  };
}

export function toPixels(
  tf: StageTransform,
  x: number,
  y: number,
): [number, number] {
  return [tf.ox + x * tf.scale, tf.oy + y * tf.scale];
}

export function toMeters(
  tf: StageTransform,
  px: number,
  py: number,
): [number, number] {
  return [(px - tf.ox) / tf.scale, (py - tf.oy) / tf.scale];
}

const EVENT_COLORS: Record<string, string> = {
  launch: "#e53935",
  switch: "#43a047",
  stop: "#8e24aa",
};

export class StageRenderer {
  private history: { t: number; total: number; events: string[] }[] = [];
  // Interpolated display positions, keyed by robot id; eased toward the
  // latest snapshot, never extrapolated past it.
  private shown = new Map<number, { x: number; y: number; yaw: number }>();

  constructor(
    private stage: HTMLCanvasElement,
    private spark: HTMLCanvasElement,
  ) {}

  pushBandwidth(sample: { t: number; total: number; events: string[] } | null): void {
    if (!sample) return;
    const last = this.history[this.history.length - 1];
    if (last && last.t === sample.t) {
      this.history[this.history.length - 1] = sample;
      return;
    }
    this.history.push(sample);
    if (this.history.length > 240) this.history.shift();
  }

  transform(vm: StageViewModel): StageTransform {
    return fitTransform(vm.venue, this.stage.width, this.stage.height);
  }

  draw(vm: StageViewModel): void {
    const ctx = this.stage.getContext("2d");
    if (!ctx) return;
    const tf = this.transform(vm);
    ctx.clearRect(0, 0, this.stage.width, this.stage.height);

    // venue
    ctx.fillStyle = "#101418";
    ctx.fillRect(0, 0, this.stage.width, this.stage.height);
    const [vx, vy] = toPixels(tf, 0, 0);
    ctx.strokeStyle = "#3c4854";
    ctx.lineWidth = 2;
    ctx.strokeRect(vx, vy, vm.venue[0] * tf.scale, vm.venue[1] * tf.scale);

    // marker
    if (vm.marker) {
      const [mx, my] = toPixels(tf, vm.marker[0], vm.marker[1]);
      ctx.strokeStyle = "#ffd54f";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.arc(mx, my, 10, 0, 2 * Math.PI);
      ctx.moveTo(mx - 14, my);
      ctx.lineTo(mx + 14, my);
      ctx.moveTo(mx, my - 14);
      ctx.lineTo(mx, my + 14);
      ctx.stroke();
    }

    // robots, eased toward the acknowledged state
    for (const r of vm.robots) {
      let s = this.shown.get(r.id);
      if (!s) {
        s = { x: r.x, y: r.y, yaw: r.yaw };
        this.shown.set(r.id, s);
      }
      s.x += (r.x - s.x) * 0.35;
      s.y += (r.y - s.y) * 0.35;
      s.yaw = r.yaw;
      const [px, py] = toPixels(tf, s.x, s.y);
      ctx.save();
      ctx.translate(px, py);
      ctx.globalAlpha = r.active ? 1.0 : 0.35;
      ctx.fillStyle = r.phaseColor;
      ctx.strokeStyle = r.phaseColor;
      if (r.glyph === "square") {
        ctx.fillRect(-5, -5, 10, 10);
      } else if (r.glyph === "ring") {
        ctx.beginPath();
        ctx.arc(0, 0, 7, 0, 2 * Math.PI);
        ctx.fill();
        // altitude ring grows with height
        ctx.beginPath();
        ctx.arc(0, 0, 9 + 4 * r.altitude, 0, 2 * Math.PI);
        ctx.stroke();
      } else {
        ctx.rotate(s.yaw);
        ctx.beginPath();
        ctx.moveTo(10, 0);
        ctx.lineTo(-6, 6);
        ctx.lineTo(-6, -6);
        ctx.closePath();
        ctx.fill();
      }
      ctx.restore();
    }
    this.drawSparkline();
  }

  private drawSparkline(): void {
    const ctx = this.spark.getContext("2d");
    if (!ctx) return;
    const w = this.spark.width;
    const h = this.spark.height;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = "#101418";
    ctx.fillRect(0, 0, w, h);
    if (this.history.length < 2) return;
    const max = Math.max(...this.history.map((s) => s.total), 1);
    const dx = w / (this.history.length - 1);
    ctx.strokeStyle = "#4dd0e1";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    this.history.forEach((s, i) => {
      // log scale: launch spikes dwarf the steady band
      const y = h - (Math.log10(1 + s.total) / Math.log10(1 + max)) * (h - 6) - 3;
      if (i === 0) ctx.moveTo(0, y);
      else ctx.lineTo(i * dx, y);
    });
    ctx.stroke();
    this.history.forEach((s, i) => {
      for (const ev of s.events) {
        ctx.strokeStyle = EVENT_COLORS[ev] ?? "#9e9e9e";
        ctx.beginPath();
        ctx.moveTo(i * dx, 0);
        ctx.lineTo(i * dx, h);
        ctx.stroke();
      }
    });
  }
}

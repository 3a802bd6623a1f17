// Console entry point: wires the socket client, view model, renderer,
// and the operator controls together.

import { StageClient } from "./client.js";
import { StageRenderer, toMeters } from "./render.js";
import { buildViewModel } from "./viewmodel.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function main(): void {
  const stage = el<HTMLCanvasElement>("stage");
  const spark = el<HTMLCanvasElement>("sparkline");
  const statusBadge = el<HTMLSpanElement>("status");
  const staleBadge = el<HTMLSpanElement>("stale");
  const clock = el<HTMLSpanElement>("clock");
  const programSelect = el<HTMLSelectElement>("program");
  const toasts = el<HTMLDivElement>("toasts");

  const params = new URLSearchParams(location.search);
  const url =
    params.get("server") ?? `ws://${location.hostname || "127.0.0.1"}:8765/`;

  const client = new StageClient();
  const renderer = new StageRenderer(stage, spark);
  const activeToasts: string[] = [];

  client.ontoast = (message) => {
    activeToasts.push(message);
    const node = document.createElement("div");
    node.className = "toast";
    node.textContent = message;
    toasts.appendChild(node);
    setTimeout(() => {
      node.remove();
      activeToasts.shift();
    }, 4000);
  };

  let programsFilled = false;
  client.onupdate = () => {
    if (!programsFilled && client.hello) {
      for (const name of Object.keys(client.hello.programs).sort()) {
        const opt = document.createElement("option");
        opt.value = name;
        opt.textContent = name;
        programSelect.appendChild(opt);
      }
      programsFilled = true;
    }
  };

  el<HTMLButtonElement>("launch").onclick = () => client.sendCue("launch");
  el<HTMLButtonElement>("switch").onclick = () =>
    client.sendCue("switch", programSelect.value);
  el<HTMLButtonElement>("stop").onclick = () => client.sendCue("stop");
  el<HTMLButtonElement>("resume").onclick = () => client.resume();
  el<HTMLButtonElement>("pause").onclick = () => client.pause();

  // Marker dragging: pointer events in stage space, clamped + throttled
  // inside the client.
  let dragging = false;
  const dragTo = (ev: PointerEvent) => {
    const rect = stage.getBoundingClientRect();
    const vm = buildViewModel(client, programSelect.value, activeToasts);
    const tf = renderer.transform(vm);
    const [mx, my] = toMeters(
      tf,
      ((ev.clientX - rect.left) / rect.width) * stage.width,
      ((ev.clientY - rect.top) / rect.height) * stage.height,
    );
    client.dragMarker(mx, my);
  };
  stage.addEventListener("pointerdown", (ev) => {
    dragging = true;
    dragTo(ev);
  });
  stage.addEventListener("pointermove", (ev) => {
    if (dragging) dragTo(ev);
  });
  window.addEventListener("pointerup", () => {
    dragging = false;
  });

  const frame = () => {
    const vm = buildViewModel(client, programSelect.value, activeToasts);
    statusBadge.textContent = vm.connection;
    statusBadge.className = `badge ${vm.connection}`;
    staleBadge.style.display = vm.stale ? "inline" : "none";
    clock.textContent = `t = ${vm.t.toFixed(2)} s${vm.paused ? " (paused)" : ""}`;
    renderer.pushBandwidth(vm.bandwidth);
    renderer.draw(vm);
    requestAnimationFrame(frame);
  };

  client.connect(url);
  requestAnimationFrame(frame);
}

window.addEventListener("load", main);

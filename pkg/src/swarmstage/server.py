"""Live operator session: the simulation loop behind a WebSocket API.

One asyncio task owns the simulation and paces it against the wall
clock; connection handlers only push parsed client messages onto an
inbound queue and relay broadcast snapshots, so no simulation state is
ever touched from two contexts.

Message schema (v1, JSON text frames):
  client -> server:
    {"v": 1, "type": "command", "kind": "launch"|"switch"|"stop",
     "program": "<name>", "swarm": "<name>"}           (program for switch)
    {"v": 1, "type": "marker", "x": <m>, "y": <m>}
    {"v": 1, "type": "pause"} | {"type": "resume"}
    {"v": 1, "type": "set_seed", "seed": <int>}         (paused only)
  server -> client:
    {"v": 1, "type": "hello", "venue": [w, d], "programs": {...},
     "paused": true, "duration": <s>}
    {"v": 1, "type": "snapshot", "t": <s>, "robots": [...], "marker": [x, y],
     "bandwidth_window": {...}, "events": [...], "paused": bool}
    {"v": 1, "type": "error", "message": "..."}
"""

from __future__ import annotations

import asyncio
import json
import logging
from typing import Optional

from . import wsock
from .errors import SwarmStageError
from .orchestrator import PerformanceScript, Simulation

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class LiveSession:
    """Owns one paused-until-launched simulation and its console clients."""

    def __init__(self, script: PerformanceScript, seed: Optional[int] = None,
                 time_scale: float = 1.0):
        script.validate()
        self.script = script
        self.seed = seed
        self.time_scale = time_scale
        self.sim = Simulation(script, seed)
        self.paused = True
        self.clients: set[wsock.WebSocket] = set()
        self.inbound: asyncio.Queue = asyncio.Queue()
        self._snapshot_cursor = 0

    # -- client message handling -----------------------------------------

    def _apply(self, msg: dict) -> Optional[str]:
        """Apply one client message to the loop; returns an error string."""
        kind = msg.get("type")
        if kind == "command":
            verb = msg.get("kind")
            if verb not in ("launch", "switch", "stop"):
                return f"unknown command kind {verb!r}"
            self.sim.inject_command(verb, program=msg.get("program"),
                                    swarm=msg.get("swarm"), operator=True)
            return None
        if kind == "marker":
            try:
                x, y = float(msg["x"]), float(msg["y"])
            except (KeyError, TypeError, ValueError):
                return "marker message needs numeric x, y"
            self.sim.inject_command("marker", xy=(x, y), operator=True)
            return None
        if kind == "pause":
            self.paused = True
            return None
        if kind == "resume":
            self.paused = False
            return None
        if kind == "set_seed":
            if not self.paused:
                return "set_seed only while paused"
            try:
                seed = int(msg["seed"])
            except (KeyError, TypeError, ValueError):
                return "set_seed needs an integer seed"
            self.sim = Simulation(self.script, seed)
            self._snapshot_cursor = 0
            return None
        return f"unknown message type {kind!r}"

    async def _broadcast(self, payload: dict) -> None:
        text = json.dumps(payload, separators=(",", ":"))
        dead = []
        for ws in self.clients:
            try:
                await ws.send_text(text)
            except SwarmStageError:
                dead.append(ws)
        for ws in dead:
            self.clients.discard(ws)

    def _snapshot(self) -> dict:
        snap = self.sim.snapshot(self._snapshot_cursor)
        self._snapshot_cursor = len(self.sim.trace.events)
        bw = self.sim.bus.record_bandwidth(1.0)[-1]
        snap["bandwidth_window"] = {
            "t": bw.t,
            "total_Bps": round(bw.bytes_per_s, 1),
            "gossip_Bps": round(bw.gossip_bps, 1),
            "transfer_Bps": round(bw.transfer_bps, 1),
            "events": list(bw.events),
        }
        snap["paused"] = self.paused
        return snap

    async def loop(self) -> None:
        """Step, drain operator input, and stream snapshots at the sim rate."""
        period = self.sim.dt / self.time_scale
        aio = asyncio.get_running_loop()
        while True:
            t0 = aio.time()
            while not self.inbound.empty():
                ws, msg = self.inbound.get_nowait()
                err = None
                try:
                    err = self._apply(msg)
                except SwarmStageError as e:
                    err = str(e)
                if err is not None:
                    try:
                        await ws.send_text(json.dumps(
                            {"v": SCHEMA_VERSION, "type": "error", "message": err}))
                    except SwarmStageError:
                        pass
            if not self.paused and self.sim.t < self.script.duration:
                self.sim.step()
            if self.clients:
                await self._broadcast(self._snapshot())
            elapsed = aio.time() - t0
            await asyncio.sleep(max(0.0, period - elapsed))

    async def handle_client(self, ws: wsock.WebSocket) -> None:
        self.clients.add(ws)
        hello = {
            "v": SCHEMA_VERSION,
            "type": "hello",
            "venue": list(self.script.venue),
            "programs": {name: pid for name, pid in sorted(self.sim.program_ids.items())},
            "paused": self.paused,
            "duration": self.script.duration,
        }
        try:
            await ws.send_text(json.dumps(hello))
            while True:
                text = await ws.recv_text()
                if text is None:
                    break
                try:
                    msg = json.loads(text)
                    if not isinstance(msg, dict):
                        raise ValueError("not an object")
                except ValueError as e:
                    await ws.send_text(json.dumps(
                        {"v": SCHEMA_VERSION, "type": "error",
                         "message": f"malformed message: {e}"}))
                    continue
                await self.inbound.put((ws, msg))
        finally:
            self.clients.discard(ws)


async def serve_async(script: PerformanceScript, port: int, host: str = "127.0.0.1",
                      seed: Optional[int] = None, time_scale: float = 1.0,
                      ready: Optional[asyncio.Event] = None) -> None:
    session = LiveSession(script, seed=seed, time_scale=time_scale)
    try:
        server = await wsock.serve(session.handle_client, host, port)
    except OSError as e:
        raise SwarmStageError(f"cannot bind port {port}: {e}") from e
    log.info("live session on ws://%s:%d (paused)", host, port)
    if ready is not None:
        ready.set()
    loop_task = asyncio.create_task(session.loop())
    try:
        async with server:
            await server.serve_forever()
    finally:
        loop_task.cancel()


def serve(script: PerformanceScript, port: int, **kwargs) -> None:
    """Blocking entry point for the CLI."""
    asyncio.run(serve_async(script, port, **kwargs))

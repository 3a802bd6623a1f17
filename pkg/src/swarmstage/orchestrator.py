"""Performance orchestration: scripts, the fixed-step loop, and traces.

One `Simulation` owns everything for a run: the gossip bus, per-robot
truth/estimator state, the behavior engine, and the cue schedule. The
loop runs at the fixed 20 Hz step: sense -> gossip in -> behavior ->
clamp -> kinematics -> gossip out. Behaviors consume *fused* estimates
only; ground truth exists solely to drive sensor models and the trace.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import behaviors
from .behaviors import (
    BehaviorProgram,
    NeighborView,
    Neighbor,
    clamp_for_class,
    load_program,
    program_id_table,
    standard_library,
    step_behavior,
)
from .bus import GossipBus, NetConfig
from .errors import NoFixError, ScriptError, SwarmStageError
from .kinematics import (
    SIM_DT,
    Pose,
    RobotClass,
    VelocityCommand,
    WheelSpeeds,
    aerial_class,
    aerial_step,
    diffdrive_step,
    human_scale_class,
    tabletop_class,
    velocity_to_wheels,
)
from .localization import (
    NoiseConfig,
    decode_projection,
    default_constellation,
    initial_estimate,
    kf_predict,
    kf_update_uwb,
    simulate_projection,
    solve_position_tdoa,
)
from .localization.graycode import cell_pitch
from .localization.tdoa import simulate_tdoa_batch
from .mathutil import wrap_angle
from .wire import (
    CommandKind,
    CommandMessage,
    GossipMessage,
    MsgType,
    NodeId,
    Role,
    TransferChunk,
    decode,
    encode,
)

log = logging.getLogger(__name__)

STALENESS_S = 1.0
MARKER_ID = 240
STATION_ID_BASE = 250

CLASS_FACTORIES = {
    "tabletop": tabletop_class,
    "aerial": aerial_class,
    "human_scale": human_scale_class,
}


class TruthPose(Pose):
    """Taint marker: ground-truth poses must never reach behavior inputs."""


# --------------------------------------------------------------------------
# Script model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SwarmSpec:
    name: str
    class_name: str
    count: int
    spawn: tuple[float, float, float, float]   # x0, y0, x1, y1
    program: str = "freeze"                    # library name or program file
    altitude: float = 0.0                      # aerial hover setpoint


@dataclass(frozen=True)
class MarkerSpec:
    start: tuple[float, float] = (3.0, 6.0)
    path: str = "static"          # static | circle
    radius: float = 2.0
    period: float = 60.0
    broadcast_ms: float = 250.0


@dataclass(frozen=True)
class Cue:
    at: Optional[float]           # None = manual (console) cue
    kind: str                     # launch | switch | stop | marker
    swarm: Optional[str] = None   # launch target
    program: Optional[str] = None  # switch target
    xy: Optional[tuple[float, float]] = None  # marker cue


@dataclass(frozen=True)
class LocConfig:
    noise: NoiseConfig = NoiseConfig()
    uwb_rate_hz: float = 10.0
    projector_bits: int = 10
    use_truth_for_behaviors: bool = False  # A/B debug only


@dataclass(frozen=True)
class PerformanceScript:
    name: str
    duration: float
    swarms: tuple[SwarmSpec, ...]
    cues: tuple[Cue, ...] = ()
    marker: Optional[MarkerSpec] = None
    ground_stations: int = 1
    net: NetConfig = NetConfig()
    loc: LocConfig = LocConfig()
    venue: tuple[float, float] = (6.0, 12.0)
    seed: int = 0
    autostart: bool = False
    transfer_bytes: int = 1_000_000
    max_nodes: int = 64

    def validate(self) -> None:
        if self.duration < 0:
            raise ScriptError("duration: must be >= 0")
        if not self.swarms:
            raise ScriptError("swarms: at least one swarm required")
        names = set()
        for i, sw in enumerate(self.swarms):
            p = f"swarms[{i}]"
            if sw.count < 1:
                raise ScriptError(f"{p}.count: must be >= 1")
            if sw.class_name not in CLASS_FACTORIES:
                raise ScriptError(f"{p}.class: unknown class {sw.class_name!r}")
            if sw.name in names:
                raise ScriptError(f"{p}.name: duplicate swarm name {sw.name!r}")
            names.add(sw.name)
            x0, y0, x1, y1 = sw.spawn
            if not (0 <= x0 <= x1 <= self.venue[0] and 0 <= y0 <= y1 <= self.venue[1]):
                raise ScriptError(f"{p}.spawn: region outside venue")
        timed = [c.at for c in self.cues if c.at is not None]
        if any(b < a for a, b in zip(timed, timed[1:])):
            raise ScriptError("cues: timed cue times must be non-decreasing")
        for i, cue in enumerate(self.cues):
            if cue.kind not in ("launch", "switch", "stop", "marker"):
                raise ScriptError(f"cues[{i}].kind: unknown kind {cue.kind!r}")
            if cue.kind == "switch" and cue.program is None:
                raise ScriptError(f"cues[{i}].program: switch cue needs a program")
            if cue.kind == "marker" and cue.xy is None:
                raise ScriptError(f"cues[{i}].xy: marker cue needs coordinates")
            if cue.kind == "launch" and cue.swarm is not None and cue.swarm not in names:
                raise ScriptError(f"cues[{i}].swarm: unknown swarm {cue.swarm!r}")
        n_nodes = sum(s.count for s in self.swarms) + self.ground_stations
        n_nodes += 1 if self.marker else 0
        if n_nodes > self.max_nodes:
            raise ScriptError(f"swarms: {n_nodes} nodes exceeds max_nodes={self.max_nodes}")


def script_to_dict(script: PerformanceScript) -> dict:
    d = {
        "name": script.name,
        "duration": script.duration,
        "seed": script.seed,
        "autostart": script.autostart,
        "transfer_bytes": script.transfer_bytes,
        "venue": list(script.venue),
        "ground_stations": script.ground_stations,
        "swarms": [
            {
                "name": s.name, "class": s.class_name, "count": s.count,
                "spawn": list(s.spawn), "program": s.program,
                "altitude": s.altitude,
            }
            for s in script.swarms
        ],
        "cues": [
            {k: v for k, v in (
                ("at", c.at), ("kind", c.kind), ("swarm", c.swarm),
                ("program", c.program),
                ("xy", list(c.xy) if c.xy else None),
            ) if v is not None}
            for c in script.cues
        ],
        "net": {
            "latency_mean_ms": script.net.latency_mean_ms,
            "latency_jitter_ms": script.net.latency_jitter_ms,
            "loss_prob": script.net.loss_prob,
            "seed": script.net.seed,
            "gossip_period_ms": script.net.gossip_period_ms,
            "transfer_rate_bps": script.net.transfer_rate_bps,
        },
        "loc": {
            "uwb_rate_hz": script.loc.uwb_rate_hz,
            "projector_bits": script.loc.projector_bits,
            "use_truth_for_behaviors": script.loc.use_truth_for_behaviors,
            "sigma_tdoa": script.loc.noise.sigma_tdoa,
            "sigma_odom_v_frac": script.loc.noise.sigma_odom_v_frac,
            "sigma_imu_yawrate": script.loc.noise.sigma_imu_yawrate,
            "sigma_lidar": script.loc.noise.sigma_lidar,
        },
    }
    if script.marker:
        d["marker"] = {
            "start": list(script.marker.start), "path": script.marker.path,
            "radius": script.marker.radius, "period": script.marker.period,
            "broadcast_ms": script.marker.broadcast_ms,
        }
    return d


def script_from_dict(doc: dict) -> PerformanceScript:
    try:
        swarms = tuple(
            SwarmSpec(
                name=s["name"], class_name=s["class"], count=int(s["count"]),
                spawn=tuple(s["spawn"]), program=s.get("program", "freeze"),
                altitude=float(s.get("altitude", 0.0)),
            )
            for s in doc["swarms"]
        )
        cues = tuple(
            Cue(
                at=(None if c.get("at") in (None, "manual") else float(c["at"])),
                kind=c["kind"], swarm=c.get("swarm"), program=c.get("program"),
                xy=tuple(c["xy"]) if c.get("xy") else None,
            )
            for c in doc.get("cues", [])
        )
        marker = None
        if "marker" in doc and doc["marker"] is not None:
            m = doc["marker"]
            marker = MarkerSpec(
                start=tuple(m.get("start", (3.0, 6.0))),
                path=m.get("path", "static"),
                radius=float(m.get("radius", 2.0)),
                period=float(m.get("period", 60.0)),
                broadcast_ms=float(m.get("broadcast_ms", 250.0)),
            )
        net_doc = doc.get("net", {})
        net = NetConfig(
            latency_mean_ms=float(net_doc.get("latency_mean_ms", 10.0)),
            latency_jitter_ms=float(net_doc.get("latency_jitter_ms", 5.0)),
            loss_prob=float(net_doc.get("loss_prob", 0.0)),
            seed=int(net_doc.get("seed", 0)),
            gossip_period_ms=float(net_doc.get("gossip_period_ms", 250.0)),
            transfer_rate_bps=float(net_doc.get("transfer_rate_bps", 4e6)),
        )
        loc_doc = doc.get("loc", {})
        noise = NoiseConfig(
            sigma_tdoa=float(loc_doc.get("sigma_tdoa", 0.15)),
            sigma_odom_v_frac=float(loc_doc.get("sigma_odom_v_frac", 0.02)),
            sigma_imu_yawrate=float(loc_doc.get("sigma_imu_yawrate", 0.01)),
            sigma_lidar=float(loc_doc.get("sigma_lidar", 0.02)),
        )
        loc = LocConfig(
            noise=noise,
            uwb_rate_hz=float(loc_doc.get("uwb_rate_hz", 10.0)),
            projector_bits=int(loc_doc.get("projector_bits", 10)),
            use_truth_for_behaviors=bool(loc_doc.get("use_truth_for_behaviors", False)),
        )
        script = PerformanceScript(
            name=doc["name"], duration=float(doc["duration"]), swarms=swarms,
            cues=cues, marker=marker,
            ground_stations=int(doc.get("ground_stations", 1)),
            net=net, loc=loc,
            venue=tuple(doc.get("venue", (6.0, 12.0))),
            seed=int(doc.get("seed", 0)),
            autostart=bool(doc.get("autostart", False)),
            transfer_bytes=int(doc.get("transfer_bytes", 1_000_000)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ScriptError(f"script document malformed: {e}") from e
    script.validate()
    return script


def load_script(path) -> PerformanceScript:
    with open(path) as f:
        return script_from_dict(yaml.safe_load(f))


def save_script(script: PerformanceScript, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(script_to_dict(script), f, sort_keys=False)


# --------------------------------------------------------------------------
# Run trace
# --------------------------------------------------------------------------

@dataclass
class RunTrace:
    meta: dict
    tracks: list = field(default_factory=list)     # (t, robot, source, x, y, z, yaw)
    bandwidth: list = field(default_factory=list)  # BandwidthSample
    events: list = field(default_factory=list)     # (t, kind, detail)
    phases: list = field(default_factory=list)     # (t, robot, program_id, phase)

    def save(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "meta.yaml", "w") as f:
            yaml.safe_dump(self.meta, f)  # sorted keys: byte-stable
        with open(out / "tracks.csv", "w") as f:
            f.write("t_s,robot,source,x,y,z,yaw\n")
            for t, rid, src, x, y, z, yaw in self.tracks:
                f.write(f"{t:.6f},{rid},{src},{x:.6f},{y:.6f},{z:.6f},{yaw:.6f}\n")
        with open(out / "bandwidth.csv", "w") as f:
            f.write("t_s,total_Bps,gossip_Bps,transfer_Bps,event\n")
            for s in self.bandwidth:
                ev = ";".join(s.events)
                f.write(f"{s.t:.3f},{s.bytes_per_s:.1f},{s.gossip_bps:.1f},"
                        f"{s.transfer_bps:.1f},{ev}\n")
        with open(out / "events.csv", "w") as f:
            f.write("t_s,kind,detail\n")
            for t, kind, detail in self.events:
                f.write(f"{t:.6f},{kind},{detail}\n")
        with open(out / "phases.csv", "w") as f:
            f.write("t_s,robot,program_id,phase\n")
            for t, rid, pid, ph in self.phases:
                f.write(f"{t:.6f},{rid},{pid},{ph}\n")

    @classmethod
    def load(cls, trace_dir) -> "RunTrace":
        d = Path(trace_dir)
        if not (d / "meta.yaml").exists():
            raise SwarmStageError(f"no trace at {trace_dir}")
        with open(d / "meta.yaml") as f:
            meta = yaml.safe_load(f)
        trace = cls(meta)
        with open(d / "tracks.csv") as f:
            next(f)
            for line in f:
                t, rid, src, x, y, z, yaw = line.rstrip("\n").split(",")
                trace.tracks.append((float(t), int(rid), src, float(x),
                                     float(y), float(z), float(yaw)))
        from .bus import BandwidthSample
        with open(d / "bandwidth.csv") as f:
            next(f)
            for line in f:
                t, tot, gos, tra, ev = line.rstrip("\n").split(",")
                trace.bandwidth.append(BandwidthSample(
                    t=float(t), bytes_per_s=float(tot), gossip_bps=float(gos),
                    command_bps=float(tot) - float(gos) - float(tra),
                    transfer_bps=float(tra), by_role={},
                    events=tuple(e for e in ev.split(";") if e),
                ))
        with open(d / "events.csv") as f:
            next(f)
            for line in f:
                t, kind, detail = line.rstrip("\n").split(",", 2)
                trace.events.append((float(t), kind, detail))
        with open(d / "phases.csv") as f:
            next(f)
            for line in f:
                t, rid, pid, ph = line.rstrip("\n").split(",")
                trace.phases.append((float(t), int(rid), int(pid), int(ph)))
        return trace


# --------------------------------------------------------------------------
# Per-robot simulation state
# --------------------------------------------------------------------------

@dataclass
class _RobotSim:
    node: NodeId
    swarm: SwarmSpec
    klass: RobotClass
    truth: Pose
    truth_vel: VelocityCommand
    est: object                   # FusedEstimate
    z_est: float
    rng: np.random.Generator
    inbox: object
    program_id: int
    program_t0: float = 0.0
    active: bool = False
    transfer_done_t: Optional[float] = None
    launch_seen: bool = False
    seq: int = 0
    last_odom: tuple[float, float] = (0.0, 0.0)
    last_imu: float = 0.0
    neighbors: dict = field(default_factory=dict)   # id -> (recv_t, GossipMessage)
    roster: set = field(default_factory=set)
    marker_xy: Optional[tuple[float, float]] = None
    marker_t: float = -1e9
    last_phase: int = -1
    last_program_phase: tuple[int, int] = (-1, -1)
    last_cmd: VelocityCommand = VelocityCommand()

    @property
    def rid(self) -> int:
        return self.node.id


class Simulation:
    """Deterministic fixed-step closed-loop run of one performance script."""

    def __init__(self, script: PerformanceScript, seed: Optional[int] = None):
        script.validate()
        self.script = script
        self.seed = script.seed if seed is None else seed
        self.dt = SIM_DT
        self.t = 0.0
        self.step_index = 0

        # Program registry: the shipped library plus any file-defined programs.
        self.programs: dict[int, BehaviorProgram] = {}
        self.program_ids: dict[str, int] = dict(program_id_table())
        lib = standard_library()
        for name, pid in self.program_ids.items():
            self.programs[pid] = lib[name]
        self._swarm_programs: dict[str, int] = {}
        for sw in script.swarms:
            self._swarm_programs[sw.name] = self._resolve_program(sw.program)

        net = script.net
        if net.seed == 0:
            net = replace(net, seed=int(np.random.SeedSequence(self.seed).generate_state(1)[0]))
        self.bus = GossipBus(net)
        self._gossip_steps = max(1, round(net.gossip_period_ms / 1000.0 / self.dt))
        self._uwb_steps = max(1, round(1.0 / (script.loc.uwb_rate_hz * self.dt)))
        self.constellation = default_constellation(script.venue)
        self._tdoa_pairs = [(0, aid) for aid, _ in self.constellation.anchors if aid != 0]
        self.noise = script.loc.noise

        seedseq = np.random.SeedSequence([self.seed, 0xC0FFEE])
        children = seedseq.spawn(sum(s.count for s in script.swarms) + 2)

        self.robots: list[_RobotSim] = []
        rid = 1
        child_i = 0
        for sw in script.swarms:
            klass = CLASS_FACTORIES[sw.class_name]()
            spawn_rng = np.random.default_rng(children[child_i]); child_i += 1
            for _ in range(sw.count):
                x0, y0, x1, y1 = sw.spawn
                x = float(spawn_rng.uniform(x0, x1))
                y = float(spawn_rng.uniform(y0, y1))
                yaw = float(spawn_rng.uniform(-math.pi, math.pi))
                z = sw.altitude if sw.class_name == "aerial" else 0.0
                node = NodeId(rid, Role.ROBOT)
                self.bus.join(node)
                robot = _RobotSim(
                    node=node, swarm=sw, klass=klass,
                    truth=TruthPose(x, y, z, yaw),
                    truth_vel=VelocityCommand(),
                    est=initial_estimate(x, y, yaw=yaw, t=0.0,
                                         pos_var=0.04, vel_var=0.01, yaw_var=0.01),
                    z_est=z,
                    rng=np.random.default_rng(np.random.SeedSequence([self.seed, rid])),
                    inbox=self.bus.subscribe(rid),
                    program_id=self._swarm_programs[sw.name],
                    active=script.autostart,
                )
                self.robots.append(robot)
                rid += 1

        self.marker_node: Optional[NodeId] = None
        self._marker_xy = None
        self._marker_override: Optional[tuple[float, float]] = None
        self._marker_seq = 0
        if script.marker:
            self.marker_node = NodeId(MARKER_ID, Role.MARKER)
            self.bus.join(self.marker_node)
            self._marker_xy = tuple(script.marker.start)
            self._marker_steps = max(1, round(script.marker.broadcast_ms / 1000.0 / self.dt))

        self.stations = []
        for k in range(script.ground_stations):
            node = NodeId(STATION_ID_BASE + k, Role.GROUND_STATION)
            self.bus.join(node)
            self.stations.append(node)
        self._station_seq = 0

        self._pending_cues = [c for c in script.cues if c.at is not None]
        self._pending_transfers: list[tuple[float, _RobotSim]] = []

        self.trace = RunTrace(meta={
            "script": script_to_dict(script),
            "seed": self.seed,
            "dt": self.dt,
            "trace_version": 1,
            "programs": {
                name: behaviors.program_to_dict(self.programs[pid])
                for name, pid in sorted(self.program_ids.items())
            },
            "swarm_programs": dict(sorted(self._swarm_programs.items())),
        })
        self._events_cursor = 0

    # -- program registry -------------------------------------------------

    def _resolve_program(self, ref: str) -> int:
        if ref in self.program_ids:
            return self.program_ids[ref]
        path = Path(ref)
        if path.suffix in (".yaml", ".yml") and path.exists():
            prog = load_program(path)
            pid = max(self.programs) + 1
            if pid > 255:
                raise ScriptError("program: registry exceeds 255 entries")
            self.programs[pid] = prog
            # Keyed by the reference itself: swarms naming the same file
            # share one registry entry (the robot-agnostic contract).
            self.program_ids[ref] = pid
            return pid
        raise ScriptError(f"program: unknown program {ref!r}")

    # -- operator/manual command injection ---------------------------------

    def inject_command(self, kind: str, program: Optional[str] = None,
                       swarm: Optional[str] = None,
                       xy: Optional[tuple[float, float]] = None,
                       operator: bool = False) -> None:
        """Issue a cue on the gossip bus, exactly as a scripted cue would."""
        station = self.stations[0] if self.stations else None
        if kind == "launch":
            if station is None:
                raise SwarmStageError("launch requires a ground station")
            self._station_seq += 1
            cmd = CommandMessage(CommandKind.LAUNCH, station, self._station_seq)
            self.bus.publish(station.id, encode(cmd), command_kind=CommandKind.LAUNCH)
            targets = [r for r in self.robots
                       if swarm is None or r.swarm.name == swarm]
            for robot in targets:
                if robot.transfer_done_t is None:
                    done = self.bus.launch_transfer(
                        station.id, robot.rid, self.script.transfer_bytes)
                    self._pending_transfers.append((done["t_end"], robot))
        elif kind == "switch":
            if station is None:
                raise SwarmStageError("switch requires a ground station")
            if program is None:
                raise SwarmStageError("switch needs a program")
            pid = self._resolve_program(program)
            self._station_seq += 1
            cmd = CommandMessage(CommandKind.SWITCH, station, self._station_seq,
                                 program_id=pid)
            self.bus.publish(station.id, encode(cmd), command_kind=CommandKind.SWITCH)
        elif kind == "stop":
            if station is None:
                raise SwarmStageError("stop requires a ground station")
            self._station_seq += 1
            cmd = CommandMessage(CommandKind.STOP, station, self._station_seq)
            self.bus.publish(station.id, encode(cmd), command_kind=CommandKind.STOP)
        elif kind == "marker":
            if self.marker_node is None:
                raise SwarmStageError("script has no marker node")
            if xy is None:
                raise SwarmStageError("marker cue needs coordinates")
            x = min(max(xy[0], 0.0), self.script.venue[0])
            y = min(max(xy[1], 0.0), self.script.venue[1])
            self._marker_override = (x, y)
            if operator:
                self.bus.events.append((self.t, "command", "marker"))
        else:
            raise SwarmStageError(f"unknown command kind {kind!r}")

    # -- marker motion ------------------------------------------------------

    def _marker_position(self) -> tuple[float, float]:
        spec = self.script.marker
        if self._marker_override is not None:
            return self._marker_override
        if spec.path == "circle":
            cx, cy = spec.start
            ang = 2 * math.pi * self.t / spec.period
            w, d = self.script.venue
            x = min(max(cx + spec.radius * math.cos(ang), 0.0), w)
            y = min(max(cy + spec.radius * math.sin(ang), 0.0), d)
            return (x, y)
        return spec.start

    # -- localization -------------------------------------------------------

    def _sense(self, robot: _RobotSim) -> None:
        cfg = self.noise
        v_cmd, w_cmd = robot.last_odom
        odom = (
            v_cmd + float(robot.rng.normal(0, cfg.sigma_odom_v(v_cmd))),
            w_cmd + float(robot.rng.normal(0, cfg.sigma_odom_yawrate)),
        )
        imu = robot.last_imu + float(robot.rng.normal(0, cfg.sigma_imu_yawrate))
        robot.est = kf_predict(robot.est, odom, imu, self.dt, cfg)

        if robot.swarm.class_name == "tabletop":
            frames = simulate_projection(
                (robot.truth.x, robot.truth.y), self.script.venue,
                self.script.loc.projector_bits)
            if frames is not None:
                x, y = decode_projection(frames, self.script.venue,
                                         self.script.loc.projector_bits)
                pitch = cell_pitch(self.script.venue[0], self.script.loc.projector_bits)
                r = np.eye(2) * (pitch**2 / 12.0)
                robot.est = kf_update_uwb(robot.est, (x, y), r,
                                          gate_sigma=cfg.uwb_gate_sigma).estimate
                self.trace.tracks.append((self.t, robot.rid, "uwb_raw",
                                          x, y, 0.0, robot.est.yaw))
            return

        if robot.swarm.class_name == "aerial":
            lidar = robot.truth.z + float(robot.rng.normal(0, cfg.sigma_lidar))
            from .localization import altitude_from_lidar
            z = altitude_from_lidar(max(0.0, lidar), 0.0, 0.0)
            if z is not None:
                robot.z_est = z

        if self.step_index % self._uwb_steps == 0:
            tag = np.array([robot.truth.x, robot.truth.y, robot.truth.z])
            meas = simulate_tdoa_batch(
                self.constellation, self._tdoa_pairs, tag, cfg.sigma_tdoa,
                robot.rng)
            z = robot.z_est if robot.swarm.class_name == "aerial" else 0.0
            try:
                fix = solve_position_tdoa(
                    self.constellation, meas,
                    (float(robot.est.state[0]), float(robot.est.state[1])), z=z)
            except NoFixError as e:
                self.trace.events.append((self.t, "no_fix",
                                          f"robot={robot.rid} {e}"))
                return
            r = 0.5 * (fix.covariance + fix.covariance.T) + np.eye(2) * 1e-6
            robot.est = kf_update_uwb(robot.est, (fix.x, fix.y), r,
                                      gate_sigma=cfg.uwb_gate_sigma).estimate
            self.trace.tracks.append((self.t, robot.rid, "uwb_raw",
                                      fix.x, fix.y, z, robot.est.yaw))

    # -- gossip -------------------------------------------------------------

    def _handle_inbox(self, robot: _RobotSim) -> None:
        for recv_t, data in robot.inbox.drain():
            try:
                msg = decode(data)
            except SwarmStageError:
                continue
            if isinstance(msg, GossipMessage):
                robot.neighbors[msg.sender.id] = (recv_t, msg)
                robot.roster.add(msg.sender.id)
            elif isinstance(msg, CommandMessage):
                if msg.kind is CommandKind.LAUNCH:
                    robot.launch_seen = True
                elif msg.kind is CommandKind.SWITCH and robot.active:
                    if msg.program_id in self.programs:
                        robot.program_id = msg.program_id
                        robot.program_t0 = self.t
                elif msg.kind is CommandKind.STOP:
                    robot.active = False
                elif msg.kind is CommandKind.MARKER_POSE:
                    robot.marker_xy = msg.marker_xy
                    robot.marker_t = recv_t
            elif isinstance(msg, TransferChunk):
                pass  # payload bytes matter only for bandwidth accounting

    def _neighbor_view(self, robot: _RobotSim) -> NeighborView:
        self_xy = np.array([robot.est.state[0], robot.est.state[1]])
        fresh = []
        for nid, (recv_t, msg) in robot.neighbors.items():
            if self.t - recv_t > STALENESS_S:
                continue
            pose = msg.pose
            fresh.append(Neighbor(
                nid,
                np.array([pose.x, pose.y]) - self_xy,
                np.array(msg.velocity),
                msg.behavior_phase,
            ))
        fresh.sort(key=lambda n: n.node_id)
        marker = None
        if robot.marker_xy is not None and self.t - robot.marker_t <= STALENESS_S:
            marker = np.array(robot.marker_xy)
        return NeighborView(tuple(fresh), marker, tuple(sorted(robot.roster)))

    def _behavior_pose(self, robot: _RobotSim) -> Pose:
        if self.script.loc.use_truth_for_behaviors:
            return robot.truth
        z = robot.z_est if robot.swarm.class_name == "aerial" else 0.0
        pose = Pose(float(robot.est.state[0]), float(robot.est.state[1]),
                    max(0.0, z), float(robot.est.state[4]))
        assert not isinstance(pose, TruthPose)
        return pose

    # -- one step -------------------------------------------------------------

    def step(self) -> None:
        t_next = self.t + self.dt

        # Scripted cues fire when their time is reached.
        while self._pending_cues and self._pending_cues[0].at <= self.t + 1e-9:
            cue = self._pending_cues.pop(0)
            self.inject_command(cue.kind, program=cue.program,
                                swarm=cue.swarm, xy=cue.xy)

        # Marker telemetry rides the same topic as the gossip.
        if self.marker_node is not None and self.step_index % self._marker_steps == 0:
            self._marker_xy = self._marker_position()
            self._marker_seq += 1
            cmd = CommandMessage(
                CommandKind.MARKER_POSE, self.marker_node, self._marker_seq,
                x_mm=round(self._marker_xy[0] * 1000),
                y_mm=round(self._marker_xy[1] * 1000),
            )
            self.bus.publish(self.marker_node.id, encode(cmd),
                             command_kind=CommandKind.MARKER_POSE)

        self.bus.advance_to(t_next)

        for done_t, robot in list(self._pending_transfers):
            if done_t <= t_next:
                robot.transfer_done_t = done_t
                self._pending_transfers.remove((done_t, robot))

        for robot in self.robots:
            self._handle_inbox(robot)
            if (not robot.active and robot.launch_seen
                    and robot.transfer_done_t is not None
                    and robot.transfer_done_t <= t_next):
                robot.active = True
                robot.program_t0 = t_next
                # Consume the triggers: a stop stays stopped until the next
                # launch re-uploads and re-launches.
                robot.launch_seen = False
                robot.transfer_done_t = None
                self.trace.events.append((t_next, "activated", f"robot={robot.rid}"))

        self.t = t_next
        self.step_index += 1

        for robot in self.robots:
            self._sense(robot)

            if robot.active:
                view = self._neighbor_view(robot)
                pose = self._behavior_pose(robot)
                assert isinstance(pose, TruthPose) == self.script.loc.use_truth_for_behaviors
                vel = np.array([robot.est.state[2], robot.est.state[3]])
                result = step_behavior(self.programs[robot.program_id],
                                       self.t - robot.program_t0,
                                       robot.rid, pose, vel, view)
                cmd = clamp_for_class(result.command, robot.klass)
                for ev in result.events:
                    self.trace.events.append((self.t, "behavior", f"robot={robot.rid} {ev}"))
                if (robot.program_id, result.phase_index) != robot.last_program_phase:
                    robot.last_program_phase = (robot.program_id, result.phase_index)
                    robot.last_phase = result.phase_index
                    self.trace.phases.append((self.t, robot.rid,
                                              robot.program_id, result.phase_index))
            else:
                cmd = VelocityCommand()

            self._apply_motion(robot, cmd)
            self._record_tracks(robot)

            if robot.active and self.step_index % self._gossip_steps == robot.rid % self._gossip_steps:
                robot.seq += 1
                msg = GossipMessage.from_state(
                    robot.node, robot.seq, self._behavior_pose(robot),
                    float(robot.est.state[2]), float(robot.est.state[3]),
                    robot.program_id & 0xFF, max(0, robot.last_phase) & 0xFF,
                    self.t)
                self.bus.publish(robot.rid, encode(msg))

        new_events = self.bus.events[self._events_cursor:]
        self._events_cursor = len(self.bus.events)
        for t, kind, detail in new_events:
            self.trace.events.append((t, kind, detail))

    def _apply_motion(self, robot: _RobotSim, cmd: VelocityCommand) -> None:
        w, d = self.script.venue
        if robot.klass.is_ground:
            est_pose = Pose(float(robot.est.state[0]), float(robot.est.state[1]),
                            0.0, float(robot.est.state[4]))
            wheels = velocity_to_wheels(cmd, est_pose, robot.klass)
            new_pose = diffdrive_step(robot.truth, wheels, robot.klass.wheel_track, self.dt)
            v = 0.5 * (wheels.left + wheels.right)
            omega = (wheels.right - wheels.left) / robot.klass.wheel_track
            robot.last_odom = (v, omega)
            robot.last_imu = omega
            robot.truth_vel = VelocityCommand(
                v * math.cos(new_pose.yaw), v * math.sin(new_pose.yaw))
        else:
            if robot.active:
                z_err = robot.swarm.altitude - robot.z_est
                vz = max(-0.5, min(0.5, 1.0 * z_err))
            else:
                vz = max(-0.3, min(0.0, -0.5 * robot.truth.z))
            full_cmd = VelocityCommand(cmd.vx, cmd.vy, vz)
            new_pose, new_vel = aerial_step(robot.truth, robot.truth_vel,
                                            full_cmd, robot.klass, self.dt)
            old_yaw = robot.truth.yaw
            speed = new_vel.planar_speed
            yaw = math.atan2(new_vel.vy, new_vel.vx) if speed > 0.05 else old_yaw
            omega = wrap_angle(yaw - old_yaw) / self.dt
            new_pose = Pose(new_pose.x, new_pose.y, new_pose.z, yaw)
            robot.last_odom = (speed, omega)
            robot.last_imu = omega
            robot.truth_vel = new_vel

        x = min(max(new_pose.x, 0.0), w)
        y = min(max(new_pose.y, 0.0), d)
        robot.truth = TruthPose(x, y, new_pose.z, new_pose.yaw)
        robot.last_cmd = cmd

    def _record_tracks(self, robot: _RobotSim) -> None:
        tr = robot.truth
        self.trace.tracks.append((self.t, robot.rid, "truth", tr.x, tr.y, tr.z, tr.yaw))
        z = robot.z_est if robot.swarm.class_name == "aerial" else 0.0
        self.trace.tracks.append((self.t, robot.rid, "fused",
                                  float(robot.est.state[0]), float(robot.est.state[1]),
                                  z, float(robot.est.state[4])))

    # -- snapshots (console) and completion ---------------------------------

    def snapshot(self, events_since: int = 0) -> dict:
        return {
            "v": 1,
            "type": "snapshot",
            "t": round(self.t, 6),
            "robots": [
                {
                    "id": r.rid,
                    "class": r.swarm.class_name,
                    "x": round(float(r.est.state[0]), 4),
                    "y": round(float(r.est.state[1]), 4),
                    "z": round(r.z_est if r.swarm.class_name == "aerial" else 0.0, 4),
                    "yaw": round(float(r.est.state[4]), 4),
                    "phase": max(0, r.last_phase),
                    "program": r.program_id,
                    "active": r.active,
                }
                for r in self.robots
            ],
            "marker": list(self._marker_xy) if self._marker_xy else None,
            "events": [
                {"t": round(t, 3), "kind": kind, "detail": detail}
                for t, kind, detail in self.trace.events[events_since:]
            ],
        }

    def finish(self, bandwidth_window: float = 1.0) -> RunTrace:
        self.trace.bandwidth = self.bus.record_bandwidth(
            bandwidth_window, t_end=max(self.t, self.dt))
        self.trace.events.sort(key=lambda e: (e[0], e[1], e[2]))
        return self.trace


def run(script: PerformanceScript, seed: Optional[int] = None) -> RunTrace:
    """Execute a script start to finish and return its trace."""
    sim = Simulation(script, seed)
    n_steps = int(round(script.duration / sim.dt))
    for _ in range(n_steps):
        sim.step()
    return sim.finish()


# --------------------------------------------------------------------------
# Figure exports
# --------------------------------------------------------------------------

EVENT_COLORS = {"launch": "red", "switch": "green", "stop": "purple"}


def replay_figure(trace: RunTrace, which: str, out_dir) -> list[str]:
    """Emit CSV series plus a declarative plot description for a trace.

    Returns the list of files written. No plotting library involved; the
    description names axes, series files, and event markers so any tool
    can render it.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if which == "bandwidth":
        if not trace.bandwidth:
            raise SwarmStageError("trace has no bandwidth channel")
        csv_path = out / "bandwidth.csv"
        with open(csv_path, "w") as f:
            f.write("t_s,total_Bps,gossip_Bps,transfer_Bps,event\n")
            for s in trace.bandwidth:
                f.write(f"{s.t:.3f},{s.bytes_per_s:.1f},{s.gossip_bps:.1f},"
                        f"{s.transfer_bps:.1f},{';'.join(s.events)}\n")
        written.append(str(csv_path))
        spec = {
            "title": "Coordination bandwidth",
            "x": {"column": "t_s", "label": "time [s]"},
            "y": {"label": "bytes/s"},
            "series": [
                {"file": "bandwidth.csv", "column": "total_Bps", "label": "total"},
                {"file": "bandwidth.csv", "column": "gossip_Bps", "label": "gossip"},
                {"file": "bandwidth.csv", "column": "transfer_Bps", "label": "transfers"},
            ],
            "event_markers": [
                {"t": s.t, "kind": ev, "color": EVENT_COLORS.get(ev, "gray")}
                for s in trace.bandwidth for ev in s.events
            ],
        }
    elif which == "uwb_vs_truth":
        uwb_robots = sorted({rid for _, rid, src, *_ in trace.tracks if src == "uwb_raw"})
        if not uwb_robots:
            raise SwarmStageError("trace has no uwb_raw channel")
        rid = uwb_robots[0]
        rows = {}
        for t, r, src, x, y, z, yaw in trace.tracks:
            if r != rid:
                continue
            rows.setdefault(round(t, 6), {})[src] = (x, y)
        csv_path = out / f"uwb_vs_truth_robot{rid}.csv"
        with open(csv_path, "w") as f:
            f.write("t_s,truth_x,truth_y,fused_x,fused_y\n")
            for t in sorted(rows):
                r = rows[t]
                if "truth" in r and "fused" in r:
                    f.write(f"{t:.6f},{r['truth'][0]:.6f},{r['truth'][1]:.6f},"
                            f"{r['fused'][0]:.6f},{r['fused'][1]:.6f}\n")
        written.append(str(csv_path))
        fix_path = out / f"uwb_fixes_robot{rid}.csv"
        with open(fix_path, "w") as f:
            f.write("t_s,x,y\n")
            for t in sorted(rows):
                r = rows[t]
                if "uwb_raw" in r:
                    f.write(f"{t:.6f},{r['uwb_raw'][0]:.6f},{r['uwb_raw'][1]:.6f}\n")
        written.append(str(fix_path))
        spec = {
            "title": f"UWB estimate vs ground truth (robot {rid})",
            "x": {"label": "x [m]"},
            "y": {"label": "y [m]"},
            "series": [
                {"file": csv_path.name, "columns": ["truth_x", "truth_y"],
                 "label": "ground truth", "color": "blue"},
                {"file": csv_path.name, "columns": ["fused_x", "fused_y"],
                 "label": "fused estimate", "color": "orange"},
                {"file": fix_path.name, "columns": ["x", "y"],
                 "label": "raw fixes", "color": "orange", "style": "scatter"},
            ],
        }
    else:
        raise SwarmStageError(f"unknown figure {which!r}")

    spec_path = out / f"{which}_plot.yaml"
    with open(spec_path, "w") as f:
        yaml.safe_dump(spec, f, sort_keys=False)
    written.append(str(spec_path))
    return written

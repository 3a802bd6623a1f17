"""Swarm behavior primitives and their timed composition.

A behavior program is an ordered list of (primitive, params, duration)
phases. Primitives map the robot's own pose/velocity plus a neighbor view
to a planar velocity command. They are intentionally robot-agnostic: no
primitive sees the robot class; the caller clamps the returned intent to
the executing platform's speed envelope with :func:`clamp_for_class`.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, fields
from typing import Optional, Union

import numpy as np
import yaml

from .errors import InvalidInputError
from .kinematics import RobotClass, Pose, VelocityCommand
from .mathutil import hashed_unit_vector, perp

log = logging.getLogger(__name__)


class Primitive(enum.Enum):
    AGGREGATE = "aggregate"
    DIFFUSE = "diffuse"
    FLOCK = "flock"
    LENNARD_JONES = "lennard_jones"
    PURSUIT = "pursuit"
    STILL = "still"
    # Radial covers the outward burst/fade motion of composed routines such
    # as the firework; it is not reachable from neighbor data alone and
    # needs the marker as its center.
    RADIAL = "radial"


@dataclass(frozen=True)
class Neighbor:
    node_id: int
    rel_pos: np.ndarray       # (2,) m, from self to neighbor
    velocity: np.ndarray      # (2,) m/s
    behavior_phase: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rel_pos", np.asarray(self.rel_pos, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))
        if not np.all(np.isfinite(self.rel_pos)):
            raise InvalidInputError("neighbor rel_pos must be finite")


@dataclass(frozen=True)
class NeighborView:
    """Decoded local neighborhood, built from fresh gossip only.

    ``roster`` lists every swarm member id ever heard from (fresh or
    stale); ring-structured behaviors use it so a lapsed neighbor halts
    the chaser instead of silently rewiring the ring.
    """

    neighbors: tuple[Neighbor, ...] = ()
    marker: Optional[np.ndarray] = None  # absolute (2,) m
    roster: tuple[int, ...] = ()

    def __post_init__(self):
        if self.marker is not None:
            object.__setattr__(self, "marker", np.asarray(self.marker, dtype=float))
        object.__setattr__(self, "roster", tuple(self.roster))


# --------------------------------------------------------------------------
# Per-primitive parameter records
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AggregateParams:
    gain: float = 0.5
    stop_radius: float = 0.05
    speed_cap: Optional[float] = None   # cap on command norm, m/s
    require_marker: bool = False        # no centroid fallback when set

    def __post_init__(self):
        if self.gain <= 0 or self.stop_radius < 0:
            raise InvalidInputError("aggregate needs gain > 0, stop_radius >= 0")


@dataclass(frozen=True)
class DiffuseParams:
    gain: float = 0.3
    radius: float = 2.0
    marker_repulsive: bool = False

    def __post_init__(self):
        if self.gain <= 0 or self.radius <= 0:
            raise InvalidInputError("diffuse needs gain > 0, radius > 0")


@dataclass(frozen=True)
class FlockParams:
    w_sep: float = 1.5
    w_ali: float = 1.0
    w_coh: float = 0.8
    r_sep: float = 0.5

    def __post_init__(self):
        if min(self.w_sep, self.w_ali, self.w_coh) < 0 or self.r_sep <= 0:
            raise InvalidInputError("flock weights must be >= 0 and r_sep > 0")


@dataclass(frozen=True)
class LennardJonesParams:
    eps: float = 0.15
    delta: float = 1.0

    def __post_init__(self):
        if self.eps < 0 or self.delta <= 0:
            raise InvalidInputError("lennard-jones needs eps >= 0, delta > 0")


@dataclass(frozen=True)
class PursuitParams:
    gain: float = 1.0
    w_tangent: float = 0.0

    def __post_init__(self):
        if self.gain <= 0 or self.w_tangent < 0:
            raise InvalidInputError("pursuit needs gain > 0, w_tangent >= 0")


@dataclass(frozen=True)
class StillParams:
    pass


@dataclass(frozen=True)
class RadialParams:
    speed_start: float = 0.8
    speed_end: float = 0.8

    def __post_init__(self):
        if self.speed_start < 0 or self.speed_end < 0:
            raise InvalidInputError("radial speeds must be >= 0")


PARAM_TYPES = {
    Primitive.AGGREGATE: AggregateParams,
    Primitive.DIFFUSE: DiffuseParams,
    Primitive.FLOCK: FlockParams,
    Primitive.LENNARD_JONES: LennardJonesParams,
    Primitive.PURSUIT: PursuitParams,
    Primitive.STILL: StillParams,
    Primitive.RADIAL: RadialParams,
}

Params = Union[
    AggregateParams, DiffuseParams, FlockParams, LennardJonesParams,
    PursuitParams, StillParams, RadialParams,
]


@dataclass(frozen=True)
class BehaviorPhase:
    primitive: Primitive
    params: Params
    duration: float  # s, math.inf allowed

    def __post_init__(self):
        if self.duration <= 0:
            raise InvalidInputError("phase duration must be > 0")
        if not isinstance(self.params, PARAM_TYPES[self.primitive]):
            raise InvalidInputError(
                f"params for {self.primitive.value} must be "
                f"{PARAM_TYPES[self.primitive].__name__}"
            )


@dataclass(frozen=True)
class BehaviorProgram:
    name: str
    phases: tuple[BehaviorPhase, ...]
    loop: bool = False

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise InvalidInputError("program must have at least one phase")

    @property
    def total_duration(self) -> float:
        return sum(p.duration for p in self.phases)


@dataclass(frozen=True)
class BehaviorStep:
    command: VelocityCommand
    phase_index: int
    events: tuple[str, ...] = ()


# --------------------------------------------------------------------------
# Primitives
# --------------------------------------------------------------------------

def aggregate_velocity(pose: Pose, view: NeighborView, params: AggregateParams) -> VelocityCommand:
    """Spring toward the marker, or the neighbor centroid when absent."""
    self_xy = np.array([pose.x, pose.y])
    if view.marker is not None:
        target = view.marker
    elif view.neighbors and not params.require_marker:
        target = self_xy + np.mean([n.rel_pos for n in view.neighbors], axis=0)
    else:
        return VelocityCommand()

    delta = target - self_xy
    if float(np.linalg.norm(delta)) < params.stop_radius:
        return VelocityCommand()
    v = params.gain * delta
    if params.speed_cap is not None:
        n = float(np.linalg.norm(v))
        if n > params.speed_cap:
            v *= params.speed_cap / n
    return VelocityCommand(float(v[0]), float(v[1]))


def diffuse_velocity(pose: Pose, view: NeighborView, params: DiffuseParams) -> VelocityCommand:
    """Inverse-distance repulsion from every neighbor within the radius."""
    v = np.zeros(2)
    for n in view.neighbors:
        d = float(np.linalg.norm(n.rel_pos))
        if d == 0.0:
            log.debug("diffuse: skipping zero-distance neighbor %d", n.node_id)
            continue
        if d <= params.radius:
            v -= n.rel_pos / (d * d)
    if params.marker_repulsive and view.marker is not None:
        rel = view.marker - np.array([pose.x, pose.y])
        d = float(np.linalg.norm(rel))
        if d > 0.0 and d <= params.radius:
            v -= rel / (d * d)
    v *= params.gain
    return VelocityCommand(float(v[0]), float(v[1]))


def flock_velocity(
    pose: Pose,
    self_vel: np.ndarray,
    view: NeighborView,
    params: FlockParams,
) -> VelocityCommand:
    """Reynolds-style weighted sum of separation, alignment and cohesion."""
    if not view.neighbors:
        return VelocityCommand()
    self_vel = np.asarray(self_vel, dtype=float)

    sep = np.zeros(2)
    for n in view.neighbors:
        d = float(np.linalg.norm(n.rel_pos))
        if 0.0 < d < params.r_sep:
            sep -= n.rel_pos / (d * d)

    vels = np.array([n.velocity for n in view.neighbors])
    ali = vels.mean(axis=0) - self_vel

    coh = np.mean([n.rel_pos for n in view.neighbors], axis=0)

    v = params.w_sep * sep + params.w_ali * ali + params.w_coh * coh
    return VelocityCommand(float(v[0]), float(v[1]))


def lennard_jones_magnitude(d: float, delta: float, eps: float) -> float:
    """Signed interaction speed w(d) = -(eps/d)((delta/d)^4 - (delta/d)^2).

    Positive attracts toward the neighbor, negative repels; zero at
    d == delta. Uses the mild 4-2 exponent pair rather than the stiff
    molecular 12-6 form.
    """
    if d <= 0 or delta <= 0:
        raise InvalidInputError("lennard_jones_magnitude needs d > 0, delta > 0")
    if eps < 0:
        raise InvalidInputError("eps must be >= 0")
    r = delta / d
    r2 = r * r
    return -(eps / d) * (r2 * r2 - r2)


def lj_velocity(pose: Pose, view: NeighborView, params: LennardJonesParams) -> VelocityCommand:
    """Sum of Lennard-Jones terms along the unit vectors to each neighbor."""
    v = np.zeros(2)
    for n in view.neighbors:
        d = float(np.linalg.norm(n.rel_pos))
        if d == 0.0:
            log.debug("lj: skipping zero-distance neighbor %d", n.node_id)
            continue
        v += lennard_jones_magnitude(d, params.delta, params.eps) * (n.rel_pos / d)
    return VelocityCommand(float(v[0]), float(v[1]))


def pursuit_velocity(
    self_id: int,
    pose: Pose,
    view: NeighborView,
    params: PursuitParams,
) -> VelocityCommand:
    """Cyclic pursuit: chase the next node id on the sorted ring.

    The ring is the sorted roster when one is known, else the currently
    visible ids; a stale or missing target yields a zero command.
    """
    base = view.roster if view.roster else (n.node_id for n in view.neighbors)
    ids = sorted({self_id, *base})
    if len(ids) < 2:
        return VelocityCommand()
    target_id = ids[(ids.index(self_id) + 1) % len(ids)]
    target = next((n for n in view.neighbors if n.node_id == target_id), None)
    if target is None:
        return VelocityCommand()
    v = params.gain * target.rel_pos
    if params.w_tangent > 0.0:
        v = v + params.w_tangent * perp(target.rel_pos)
    return VelocityCommand(float(v[0]), float(v[1]))


def radial_velocity(
    self_id: int,
    pose: Pose,
    view: NeighborView,
    params: RadialParams,
    t_in_phase: float,
    duration: float,
) -> tuple[VelocityCommand, tuple[str, ...]]:
    """Move straight away from the marker at a time-interpolated speed.

    Speed ramps linearly from speed_start to speed_end across the phase;
    with an infinite duration the start speed holds. A robot exactly at
    the center gets a deterministic direction hashed from its id.
    """
    if view.marker is None:
        return VelocityCommand(), ("cue_error:radial_without_marker",)
    if math.isinf(duration):
        speed = params.speed_start
    else:
        frac = min(max(t_in_phase / duration, 0.0), 1.0)
        speed = params.speed_start + frac * (params.speed_end - params.speed_start)
    out = np.array([pose.x, pose.y]) - view.marker
    n = float(np.linalg.norm(out))
    direction = out / n if n > 0.0 else hashed_unit_vector(self_id)
    v = speed * direction
    return VelocityCommand(float(v[0]), float(v[1])), ()


# --------------------------------------------------------------------------
# Composition
# --------------------------------------------------------------------------

def phase_at(program: BehaviorProgram, t: float) -> tuple[int, float]:
    """Locate the active phase and the time elapsed inside it.

    Looping programs wrap t modulo the total duration; non-looping
    programs hold their final phase forever once past the end.
    """
    total = program.total_duration
    if program.loop and math.isfinite(total) and t >= total:
        t = math.fmod(t, total)
    start = 0.0
    for i, phase in enumerate(program.phases):
        if t < start + phase.duration:
            return i, t - start
        start += phase.duration
    return len(program.phases) - 1, t - (start - program.phases[-1].duration)


def step_behavior(
    program: BehaviorProgram,
    t_in_program: float,
    self_id: int,
    pose: Pose,
    self_vel: np.ndarray,
    view: NeighborView,
) -> BehaviorStep:
    """Evaluate the program at the given time and return the intent.

    Deterministic in its inputs, and independent of the robot class; the
    returned command is unclamped and must be limited by the caller.
    """
    idx, t_phase = phase_at(program, t_in_program)
    phase = program.phases[idx]
    p = phase.params
    events: tuple[str, ...] = ()

    if phase.primitive is Primitive.STILL:
        cmd = VelocityCommand()
    elif phase.primitive is Primitive.AGGREGATE:
        cmd = aggregate_velocity(pose, view, p)
        if p.require_marker and view.marker is None:
            events = ("cue_error:aggregate_without_marker",)
    elif phase.primitive is Primitive.DIFFUSE:
        cmd = diffuse_velocity(pose, view, p)
    elif phase.primitive is Primitive.FLOCK:
        cmd = flock_velocity(pose, self_vel, view, p)
    elif phase.primitive is Primitive.LENNARD_JONES:
        cmd = lj_velocity(pose, view, p)
    elif phase.primitive is Primitive.PURSUIT:
        cmd = pursuit_velocity(self_id, pose, view, p)
    elif phase.primitive is Primitive.RADIAL:
        cmd, events = radial_velocity(self_id, pose, view, p, t_phase, phase.duration)
    else:  # pragma: no cover - enum is exhaustive
        raise InvalidInputError(f"unknown primitive {phase.primitive}")
    return BehaviorStep(cmd, idx, events)


def clamp_for_class(cmd: VelocityCommand, robot_class: RobotClass) -> VelocityCommand:
    """Clamp a composed intent to the executing platform's speed envelope."""
    return cmd.clamped(robot_class.max_speed)


# --------------------------------------------------------------------------
# The shipped program library
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FireworkParams:
    v_in: float = 0.3
    v_out: float = 0.8
    t_gather: float = 8.0
    t_hold: float = 2.0
    t_burst: float = 3.0
    t_fade: float = 3.0
    gather_gain: float = 8.0
    stop_radius: float = 0.05

    def __post_init__(self):
        if self.v_out <= self.v_in:
            raise InvalidInputError("firework needs v_out > v_in")
        for name in ("v_in", "t_gather", "t_hold", "t_burst", "t_fade"):
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"firework {name} must be > 0")


def firework_program(params: FireworkParams = FireworkParams()) -> BehaviorProgram:
    """Gather on the marker, hold, burst outward, then fade to rest.

    The burst leaves every robot moving radially away from the marker at
    v_out; the fade keeps the direction while the speed decays linearly
    to zero.
    """
    return BehaviorProgram(
        name="firework",
        phases=(
            BehaviorPhase(
                Primitive.AGGREGATE,
                AggregateParams(
                    gain=params.gather_gain,
                    stop_radius=params.stop_radius,
                    speed_cap=params.v_in,
                    require_marker=True,
                ),
                params.t_gather,
            ),
            BehaviorPhase(Primitive.STILL, StillParams(), params.t_hold),
            BehaviorPhase(
                Primitive.RADIAL,
                RadialParams(params.v_out, params.v_out),
                params.t_burst,
            ),
            BehaviorPhase(
                Primitive.RADIAL,
                RadialParams(params.v_out, 0.0),
                params.t_fade,
            ),
        ),
    )


def _single(name, primitive, params, loop=False, duration=math.inf):
    return BehaviorProgram(name, (BehaviorPhase(primitive, params, duration),), loop)


def standard_library() -> dict[str, BehaviorProgram]:
    """The twelve named programs shipped with the engine.

    Beyond the firework these are illustrative compositions of the
    primitives with varied parameters and sequencing, not a canonical set.
    """
    inf = math.inf
    programs = [
        firework_program(),
        _single("gather", Primitive.AGGREGATE, AggregateParams(gain=0.6, stop_radius=0.1)),
        _single("scatter", Primitive.DIFFUSE, DiffuseParams(gain=0.4, radius=3.0)),
        _single("lattice", Primitive.LENNARD_JONES, LennardJonesParams(eps=0.2, delta=1.2)),
        _single("murmuration", Primitive.FLOCK, FlockParams()),
        _single("ring_chase", Primitive.PURSUIT, PursuitParams(gain=0.8)),
        _single("orbit", Primitive.PURSUIT, PursuitParams(gain=0.5, w_tangent=0.6)),
        BehaviorProgram(
            "breathe",
            (
                BehaviorPhase(Primitive.AGGREGATE, AggregateParams(gain=0.6), 6.0),
                BehaviorPhase(Primitive.DIFFUSE, DiffuseParams(gain=0.4, radius=3.0), 6.0),
            ),
            loop=True,
        ),
        BehaviorProgram(
            "pulse",
            (
                BehaviorPhase(Primitive.LENNARD_JONES, LennardJonesParams(eps=0.25, delta=0.8), 5.0),
                BehaviorPhase(Primitive.LENNARD_JONES, LennardJonesParams(eps=0.25, delta=1.6), 5.0),
            ),
            loop=True,
        ),
        BehaviorProgram(
            "tide",
            (
                BehaviorPhase(Primitive.AGGREGATE, AggregateParams(gain=0.5, speed_cap=0.4), 8.0),
                BehaviorPhase(Primitive.STILL, StillParams(), 2.0),
                BehaviorPhase(Primitive.DIFFUSE, DiffuseParams(gain=0.5, radius=4.0), 6.0),
                BehaviorPhase(Primitive.STILL, StillParams(), 2.0),
            ),
            loop=True,
        ),
        BehaviorProgram(
            "comet",
            (
                BehaviorPhase(Primitive.PURSUIT, PursuitParams(gain=1.4, w_tangent=0.2), 10.0),
                BehaviorPhase(Primitive.STILL, StillParams(), 2.0),
            ),
            loop=True,
        ),
        _single("freeze", Primitive.STILL, StillParams()),
    ]
    assert len(programs) == 12
    return {p.name: p for p in programs}


def program_id_table() -> dict[str, int]:
    """Stable name -> u8 id mapping used on the wire."""
    return {name: i for i, name in enumerate(standard_library())}


# --------------------------------------------------------------------------
# Declarative serialization (one program per file)
# --------------------------------------------------------------------------

def program_to_dict(program: BehaviorProgram) -> dict:
    return {
        "name": program.name,
        "loop": program.loop,
        "phases": [
            {
                "primitive": ph.primitive.value,
                "duration": ph.duration,
                "params": {
                    f.name: getattr(ph.params, f.name) for f in fields(ph.params)
                },
            }
            for ph in program.phases
        ],
    }


def program_from_dict(doc: dict) -> BehaviorProgram:
    phases = []
    for ph in doc["phases"]:
        primitive = Primitive(ph["primitive"])
        params = PARAM_TYPES[primitive](**ph.get("params", {}))
        duration = float(ph["duration"])
        phases.append(BehaviorPhase(primitive, params, duration))
    return BehaviorProgram(doc["name"], tuple(phases), bool(doc.get("loop", False)))


def save_program(program: BehaviorProgram, path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(program_to_dict(program), f, sort_keys=False)


def load_program(path) -> BehaviorProgram:
    with open(path) as f:
        return program_from_dict(yaml.safe_load(f))

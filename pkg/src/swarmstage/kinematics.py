"""Motion models for the three robot classes.

Ground robots (tabletop and human-scale) are differential-drive unicycles
stepped with the exact closed-form arc; the aerial class is a holonomic
point mass that tracks velocity commands under an acceleration clamp.
All functions are pure: they take value types and return new ones.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .errors import InvalidInputError, WrongClassError
from .mathutil import all_finite, clamp_planar, wrap_angle

# Angular rates below this are integrated as straight lines to avoid the
# v/omega blow-up.
OMEGA_STRAIGHT_EPS = 1e-9

SIM_DT = 0.05  # fixed 20 Hz simulation step, used everywhere


class Variant(enum.Enum):
    TABLETOP = "tabletop"
    AERIAL = "aerial"
    HUMAN_SCALE = "human_scale"


@dataclass(frozen=True)
class RobotClass:
    """Dynamic envelope of one robot platform."""

    variant: Variant
    max_speed: float          # m/s
    max_accel: float          # m/s^2
    wheel_track: float = 0.0  # m, ground classes only
    has_altitude: bool = False

    def __post_init__(self):
        if self.max_speed <= 0 or self.max_accel <= 0:
            raise InvalidInputError("max_speed and max_accel must be positive")
        if self.is_ground and self.wheel_track <= 0:
            raise InvalidInputError("ground classes need wheel_track > 0")
        if self.has_altitude != (self.variant is Variant.AERIAL):
            raise InvalidInputError("has_altitude is true iff the class is aerial")

    @property
    def is_ground(self) -> bool:
        return self.variant is not Variant.AERIAL


def tabletop_class(max_speed=0.5, max_accel=1.0, wheel_track=0.02) -> RobotClass:
    return RobotClass(Variant.TABLETOP, max_speed, max_accel, wheel_track)


def aerial_class(max_speed=1.5, max_accel=2.0) -> RobotClass:
    return RobotClass(Variant.AERIAL, max_speed, max_accel, has_altitude=True)


def human_scale_class(max_speed=1.0, max_accel=1.0, wheel_track=0.4) -> RobotClass:
    return RobotClass(Variant.HUMAN_SCALE, max_speed, max_accel, wheel_track)


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    z: float = 0.0
    yaw: float = 0.0  # rad, normalized to (-pi, pi]

    def __post_init__(self):
        if not all_finite(self.x, self.y, self.z, self.yaw):
            raise InvalidInputError("pose components must be finite")
        if self.z < 0:
            raise InvalidInputError("z must be >= 0")
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))


@dataclass(frozen=True)
class VelocityCommand:
    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0  # aerial only

    def __post_init__(self):
        if not all_finite(self.vx, self.vy, self.vz):
            raise InvalidInputError("velocity components must be finite")

    @property
    def planar_speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    def clamped(self, max_speed: float) -> "VelocityCommand":
        vx, vy = clamp_planar(self.vx, self.vy, max_speed)
        vz = max(-max_speed, min(max_speed, self.vz))
        return VelocityCommand(vx, vy, vz)


@dataclass(frozen=True)
class WheelSpeeds:
    left: float
    right: float

    def __post_init__(self):
        if not all_finite(self.left, self.right):
            raise InvalidInputError("wheel speeds must be finite")


def diffdrive_step(pose: Pose, wheels: WheelSpeeds, track: float, dt: float) -> Pose:
    """Advance a differential-drive pose by one step of the exact arc.

    v = (l + r) / 2, omega = (r - l) / track. For |omega| below
    OMEGA_STRAIGHT_EPS the straight-line limit is used.
    """
    if dt <= 0:
        raise InvalidInputError("dt must be > 0")
    if track <= 0:
        raise InvalidInputError("track must be > 0")
    if not all_finite(wheels.left, wheels.right, dt, track):
        raise InvalidInputError("non-finite input")

    v = 0.5 * (wheels.left + wheels.right)
    omega = (wheels.right - wheels.left) / track

    if abs(omega) < OMEGA_STRAIGHT_EPS:
        x = pose.x + v * math.cos(pose.yaw) * dt
        y = pose.y + v * math.sin(pose.yaw) * dt
        return Pose(x, y, pose.z, pose.yaw)

    yaw1 = pose.yaw + omega * dt
    r = v / omega
    x = pose.x + r * (math.sin(yaw1) - math.sin(pose.yaw))
    y = pose.y - r * (math.cos(yaw1) - math.cos(pose.yaw))
    return Pose(x, y, pose.z, wrap_angle(yaw1))


def velocity_to_wheels(
    cmd: VelocityCommand,
    pose: Pose,
    robot_class: RobotClass,
    k_yaw: float = 2.0,
) -> WheelSpeeds:
    """Track a holonomic planar command with a unicycle.

    Proportional heading controller: omega = k_yaw * heading error,
    forward speed = |cmd| * max(0, cos(heading error)). Each wheel is
    clipped to the class max_speed.
    """
    if not robot_class.is_ground:
        raise WrongClassError("velocity_to_wheels only applies to ground classes")

    speed = cmd.planar_speed
    if speed == 0.0:
        return WheelSpeeds(0.0, 0.0)

    err = wrap_angle(math.atan2(cmd.vy, cmd.vx) - pose.yaw)
    omega = k_yaw * err
    v = speed * max(0.0, math.cos(err))

    half = 0.5 * robot_class.wheel_track * omega
    lim = robot_class.max_speed
    left = max(-lim, min(lim, v - half))
    right = max(-lim, min(lim, v + half))
    return WheelSpeeds(left, right)


def aerial_step(
    pose: Pose,
    velocity: VelocityCommand,
    cmd: VelocityCommand,
    robot_class: RobotClass,
    dt: float,
) -> tuple[Pose, VelocityCommand]:
    """Advance an aerial robot one step of first-order velocity tracking.

    The attained velocity moves toward ``cmd`` (itself clamped to
    max_speed) at no more than max_accel, then the position is Euler
    integrated with the new velocity. Altitude is clamped at the floor.
    Returns the new (pose, velocity); the velocity must be fed back on
    the next call.
    """
    if robot_class.is_ground:
        raise WrongClassError("aerial_step only applies to the aerial class")
    if dt <= 0:
        raise InvalidInputError("dt must be > 0")

    target = cmd.clamped(robot_class.max_speed)
    dvx = target.vx - velocity.vx
    dvy = target.vy - velocity.vy
    dvz = target.vz - velocity.vz
    dn = math.sqrt(dvx * dvx + dvy * dvy + dvz * dvz)
    max_dv = robot_class.max_accel * dt
    if dn > max_dv:
        s = max_dv / dn
        dvx, dvy, dvz = dvx * s, dvy * s, dvz * s
    new_vel = VelocityCommand(
        velocity.vx + dvx, velocity.vy + dvy, velocity.vz + dvz
    )

    z = pose.z + new_vel.vz * dt
    if z < 0.0:
        z = 0.0
        new_vel = replace(new_vel, vz=0.0)
    new_pose = Pose(
        pose.x + new_vel.vx * dt,
        pose.y + new_vel.vy * dt,
        z,
        pose.yaw,
    )
    return new_pose, new_vel

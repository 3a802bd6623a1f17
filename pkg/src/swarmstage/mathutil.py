"""Small planar-geometry helpers used across the behavior and motion code."""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


def planar_norm(vx: float, vy: float) -> float:
    return math.hypot(vx, vy)


def clamp_planar(vx: float, vy: float, limit: float) -> tuple[float, float]:
    """Scale (vx, vy) so its norm is at most ``limit``, preserving direction."""
    n = math.hypot(vx, vy)
    if n <= limit or n == 0.0:
        return vx, vy
    s = limit / n
    return vx * s, vy * s


def unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ZeroDivisionError("zero vector has no direction")
    return v / n


def perp(v: np.ndarray) -> np.ndarray:
    """Rotate a planar vector 90 degrees counter-clockwise."""
    return np.array([-v[1], v[0]], dtype=float)


def _splitmix64(x: int) -> int:
    # Deterministic 64-bit mixer; stable across platforms and sessions,
    # unlike hash() on strings.
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


def hashed_unit_vector(node_id: int) -> np.ndarray:
    """Deterministic unit vector derived from a node id.

    Used to break ties when a robot sits exactly on an attractor point and
    a radial direction is otherwise undefined.
    """
    angle = TWO_PI * (_splitmix64(int(node_id)) % (1 << 32)) / float(1 << 32)
    return np.array([math.cos(angle), math.sin(angle)])


def all_finite(*values: float) -> bool:
    for v in values:
        if not math.isfinite(v):
            return False
    return True

"""Kalman fusion of wheel odometry, IMU yaw rate, and UWB position fixes.

State vector: [x, y, vx, vy, yaw]. The predict step dead-reckons with the
odometry speed and a precision-weighted blend of the two yaw-rate
sources; the velocity entries mirror the odometry-implied world velocity.
UWB fixes arrive as loosely-coupled 2D position measurements and are
gated on Mahalanobis distance to reject the occasional wild fix.

Heading is observable only through the rate sensors: without an absolute
heading reference the yaw variance grows unbounded between position
turns, which matches the deployed hardware.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import CovarianceError, InvalidInputError
from ..mathutil import wrap_angle

STATE_DIM = 5
SYM_TOL = 1e-9
PSD_TOL = -1e-9


@dataclass(frozen=True)
class NoiseConfig:
    """Sensor and process noise levels (all configurable, defaults sized
    so raw UWB fixes land in the tens-of-centimeters band)."""

    sigma_odom_v_frac: float = 0.02      # fraction of commanded speed
    sigma_odom_v_min: float = 0.01       # m/s floor so Q stays positive
    sigma_odom_yawrate: float = 0.05     # rad/s
    sigma_imu_yawrate: float = 0.01      # rad/s
    sigma_tdoa: float = 0.15             # m, per range-difference
    sigma_lidar: float = 0.02            # m
    uwb_gate_sigma: float = 5.0          # Mahalanobis gate
    q_floor: tuple[float, ...] = (1e-8, 1e-8, 1e-8, 1e-8, 1e-8)

    def sigma_odom_v(self, v: float) -> float:
        return max(abs(v) * self.sigma_odom_v_frac, self.sigma_odom_v_min)


@dataclass(frozen=True)
class FusedEstimate:
    state: np.ndarray        # (5,) [x, y, vx, vy, yaw]
    covariance: np.ndarray   # (5, 5) symmetric PSD
    t: float

    def __post_init__(self):
        object.__setattr__(self, "state", np.asarray(self.state, dtype=float).reshape(STATE_DIM))
        object.__setattr__(self, "covariance",
                           np.asarray(self.covariance, dtype=float).reshape(STATE_DIM, STATE_DIM))

    @property
    def xy(self) -> np.ndarray:
        return self.state[:2]

    @property
    def yaw(self) -> float:
        return float(self.state[4])

    def check_covariance(self) -> None:
        p = self.covariance
        if np.max(np.abs(p - p.T)) > SYM_TOL:
            raise CovarianceError("covariance is not symmetric")
        # Cholesky of P + tol*I succeeds iff min eigenvalue > -tol.
        try:
            np.linalg.cholesky(p + (-PSD_TOL) * np.eye(STATE_DIM))
        except np.linalg.LinAlgError:
            raise CovarianceError("covariance is not PSD") from None


def initial_estimate(x: float, y: float, yaw: float = 0.0, t: float = 0.0,
                     pos_var: float = 0.25, vel_var: float = 0.01,
                     yaw_var: float = 0.05) -> FusedEstimate:
    state = np.array([x, y, 0.0, 0.0, wrap_angle(yaw)])
    cov = np.diag([pos_var, pos_var, vel_var, vel_var, yaw_var])
    return FusedEstimate(state, cov, 0.0 + t)


def blend_yaw_rate(odom_omega: float, imu_yaw_rate: float,
                   cfg: NoiseConfig) -> tuple[float, float]:
    """Precision-weighted blend of the two yaw-rate sources.

    Returns (blended rate, blended variance).
    """
    w_odom = 1.0 / cfg.sigma_odom_yawrate**2
    w_imu = 1.0 / cfg.sigma_imu_yawrate**2
    var = 1.0 / (w_odom + w_imu)
    return (odom_omega * w_odom + imu_yaw_rate * w_imu) * var, var


def _symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def kf_predict(
    est: FusedEstimate,
    odom: tuple[float, float],
    imu_yaw_rate: float,
    dt: float,
    cfg: NoiseConfig = NoiseConfig(),
) -> FusedEstimate:
    """Propagate the estimate through the unicycle process model.

    Process noise is the control noise (odometry speed, blended yaw rate)
    mapped through the input Jacobian, plus a small diagonal floor scaled
    by dt so the propagated covariance is strictly positive definite.
    """
    if dt <= 0:
        raise InvalidInputError("dt must be > 0")
    est.check_covariance()
    v, odom_omega = odom
    omega, omega_var = blend_yaw_rate(odom_omega, imu_yaw_rate, cfg)

    x, y, _, _, yaw = est.state
    yaw1 = wrap_angle(yaw + omega * dt)
    cy, sy = math.cos(yaw), math.sin(yaw)
    cy1, sy1 = math.cos(yaw1), math.sin(yaw1)

    state = np.array([
        x + v * cy * dt,
        y + v * sy * dt,
        v * cy1,
        v * sy1,
        yaw1,
    ])

    f = np.eye(STATE_DIM)
    f[0, 4] = -v * sy * dt
    f[1, 4] = v * cy * dt
    f[2, 2] = 0.0
    f[3, 3] = 0.0
    f[2, 4] = -v * sy1
    f[3, 4] = v * cy1

    g = np.array([
        [cy * dt, 0.0],
        [sy * dt, 0.0],
        [cy1, -v * sy1 * dt],
        [sy1, v * cy1 * dt],
        [0.0, dt],
    ])
    sigma_u = np.diag([cfg.sigma_odom_v(v) ** 2, omega_var])
    q = g @ sigma_u @ g.T + np.diag(cfg.q_floor) * dt

    cov = _symmetrize(f @ est.covariance @ f.T + q)
    return FusedEstimate(state, cov, est.t + dt)


H_UWB = np.zeros((2, STATE_DIM))
H_UWB[0, 0] = 1.0
H_UWB[1, 1] = 1.0


@dataclass(frozen=True)
class UwbUpdateResult:
    estimate: FusedEstimate
    innovation: np.ndarray          # (2,)
    innovation_cov: np.ndarray      # (2, 2)
    accepted: bool
    reason: str = ""


def kf_update_uwb(
    est: FusedEstimate,
    meas_xy: tuple[float, float],
    r: np.ndarray,
    gate_sigma: Optional[float] = None,
) -> UwbUpdateResult:
    """Linear measurement update on (x, y) with Mahalanobis gating.

    Joseph-form covariance update keeps the result symmetric PSD; a
    singular innovation covariance skips the update with a warning
    instead of corrupting the state.
    """
    r = np.asarray(r, dtype=float).reshape(2, 2)
    if np.max(np.abs(r - r.T)) > 1e-9 or np.linalg.eigvalsh(r)[0] < 0:
        raise InvalidInputError("R must be symmetric PSD")
    est.check_covariance()

    z = np.asarray(meas_xy, dtype=float).reshape(2)
    p = est.covariance
    innov = z - est.state[:2]
    s = p[:2, :2] + r

    # 2x2 closed-form conditioning guard.
    tr = s[0, 0] + s[1, 1]
    det = s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]
    disc = max(0.0, (tr / 2) ** 2 - det)
    lam_min = tr / 2 - math.sqrt(disc)
    lam_max = tr / 2 + math.sqrt(disc)
    if not (lam_min > 0 and lam_max / lam_min < 1.0 / np.finfo(float).eps):
        return UwbUpdateResult(est, innov, s, False, "singular_innovation")

    s_inv = np.array([[s[1, 1], -s[0, 1]], [-s[1, 0], s[0, 0]]]) / det
    if gate_sigma is not None:
        d2 = float(innov @ s_inv @ innov)
        if d2 > gate_sigma**2:
            return UwbUpdateResult(est, innov, s, False, "gated")

    k = p @ H_UWB.T @ s_inv
    state = est.state + k @ innov
    state[4] = wrap_angle(state[4])
    ikh = np.eye(STATE_DIM) - k @ H_UWB
    cov = _symmetrize(ikh @ p @ ikh.T + k @ r @ k.T)
    return UwbUpdateResult(
        FusedEstimate(state, cov, est.t), innov, s, True
    )


def altitude_from_lidar(
    range_m: float,
    roll: float,
    pitch: float,
    max_range: float = 12.0,
) -> Optional[float]:
    """Altitude over ground from a downward-looking rangefinder.

    Returns None (no measurement) beyond the sensor's maximum range; the
    altitude channel replaces the unreliable UWB z entirely.
    """
    if range_m < 0:
        raise InvalidInputError("range must be >= 0")
    if range_m > max_range:
        return None
    return max(0.0, range_m * math.cos(roll) * math.cos(pitch))

"""UWB TDOA simulation, position solving, and anchor self-calibration.

Anchors broadcast autonomously; a tag observes range *differences*
between anchor pairs (c times the arrival-time difference, in meters).
Solving stacks those hyperbolic constraints into a Gauss-Newton least
squares problem. Calibration reconstructs the anchor layout itself from
inter-anchor two-way ranges: classical MDS for the initial embedding,
then a gauge-fixed nonlinear refinement.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from ..errors import CalibrationError, InvalidInputError, NoFixError

DEFAULT_VENUE = (6.0, 12.0)
MAX_GN_ITERATIONS = 25
GN_STEP_TOL = 1e-6
MAX_CONDITION = 1e8


@dataclass(frozen=True)
class AnchorConstellation:
    """Surveyed UWB anchor layout defining the venue frame."""

    anchors: tuple[tuple[int, np.ndarray], ...]   # (id, xyz position)
    venue: tuple[float, float] = DEFAULT_VENUE

    def __post_init__(self):
        frozen = tuple(
            (int(aid), np.asarray(pos, dtype=float).reshape(3))
            for aid, pos in self.anchors
        )
        object.__setattr__(self, "anchors", frozen)
        ids = [aid for aid, _ in frozen]
        if len(set(ids)) != len(ids):
            raise InvalidInputError("anchor ids must be unique")
        object.__setattr__(self, "_index", {aid: i for i, (aid, _) in enumerate(frozen)})
        object.__setattr__(self, "_positions", np.array([p for _, p in frozen]))

    def position(self, anchor_id: int) -> np.ndarray:
        try:
            return self._positions[self._index[anchor_id]]
        except KeyError:
            raise InvalidInputError(f"unknown anchor id {anchor_id}") from None

    def __len__(self) -> int:
        return len(self.anchors)

    def positions(self) -> np.ndarray:
        return self._positions.copy()

    def positions_of(self, ids) -> np.ndarray:
        try:
            rows = [self._index[i] for i in ids]
        except KeyError as e:
            raise InvalidInputError(f"unknown anchor id {e.args[0]}") from None
        return self._positions[rows]

    def save(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["id", "x", "y", "z"])
            for aid, pos in self.anchors:
                w.writerow([aid, f"{pos[0]:.6f}", f"{pos[1]:.6f}", f"{pos[2]:.6f}"])

    @classmethod
    def load(cls, path, venue: tuple[float, float] = DEFAULT_VENUE):
        anchors = []
        with open(path, newline="") as f:
            for row in csv.DictReader(f):
                anchors.append(
                    (int(row["id"]),
                     np.array([float(row["x"]), float(row["y"]), float(row["z"])]))
                )
        return cls(tuple(anchors), venue)


def default_constellation(venue: tuple[float, float] = DEFAULT_VENUE) -> AnchorConstellation:
    """Eight anchors around the venue perimeter at alternating heights."""
    w, d = venue
    layout = [
        (0.0, 0.0, 2.5), (w, 0.0, 0.3), (w, d, 2.5), (0.0, d, 0.3),
        (w / 2, 0.0, 0.3), (w, d / 2, 2.5), (w / 2, d, 0.3), (0.0, d / 2, 2.5),
    ]
    return AnchorConstellation(
        tuple((i, np.array(p)) for i, p in enumerate(layout)), venue
    )


@dataclass(frozen=True)
class TdoaMeasurement:
    anchor_a: int
    anchor_b: int
    dd: float      # range difference |tag-a| - |tag-b|, m
    sigma: float   # m

    def __post_init__(self):
        if self.anchor_a == self.anchor_b:
            raise InvalidInputError("anchor pair must be distinct")
        if self.sigma <= 0 or not math.isfinite(self.dd):
            raise InvalidInputError("sigma must be > 0 and dd finite")


def simulate_tdoa(
    constellation: AnchorConstellation,
    pair: tuple[int, int],
    tag_pos: np.ndarray,
    sigma: float,
    rng: np.random.Generator,
) -> TdoaMeasurement:
    """Sample one noisy range-difference observation of the tag.

    The result is gated to |dd| <= anchor separation + 5 sigma, matching
    the physical bound plus the accepted noise band.
    """
    return simulate_tdoa_batch(constellation, [pair], tag_pos, sigma, rng)[0]


def simulate_tdoa_batch(
    constellation: AnchorConstellation,
    pairs,
    tag_pos: np.ndarray,
    sigma: float,
    rng: np.random.Generator,
) -> list[TdoaMeasurement]:
    """Vectorized :func:`simulate_tdoa` over several anchor pairs."""
    tag = np.asarray(tag_pos, dtype=float).reshape(3)
    if not np.all(np.isfinite(tag)):
        raise InvalidInputError("tag position must be finite")
    a = constellation.positions_of([p[0] for p in pairs])
    b = constellation.positions_of([p[1] for p in pairs])
    dd = np.linalg.norm(tag - a, axis=1) - np.linalg.norm(tag - b, axis=1)
    if sigma > 0:
        dd = dd + rng.normal(0.0, sigma, len(pairs))
    bound = np.linalg.norm(a - b, axis=1) + 5.0 * sigma
    dd = np.clip(dd, -bound, bound)
    out_sigma = sigma if sigma > 0 else 1e-6
    return [
        TdoaMeasurement(p[0], p[1], float(d), out_sigma)
        for p, d in zip(pairs, dd)
    ]


@dataclass(frozen=True)
class TdoaFix:
    x: float
    y: float
    covariance: np.ndarray   # 2x2
    iterations: int
    residual_rms: float


def solve_position_tdoa(
    constellation: AnchorConstellation,
    measurements: Sequence[TdoaMeasurement],
    initial_guess: tuple[float, float],
    z: float = 0.0,
) -> TdoaFix:
    """Gauss-Newton solve for the planar tag position at a known height.

    Minimizes sum((dd_i - h_i(p))^2 / sigma_i^2) where h is the predicted
    range difference. Raises NoFixError on underdetermined geometry,
    ill-conditioning, or divergence; the error carries diagnostics.
    """
    if len(measurements) < 3:
        raise NoFixError(
            f"need >= 3 pair measurements, got {len(measurements)}",
            {"n_measurements": len(measurements)},
        )
    pos_a = constellation.positions_of([m.anchor_a for m in measurements])
    pos_b = constellation.positions_of([m.anchor_b for m in measurements])
    dd = np.array([m.dd for m in measurements])
    sigma = np.array([m.sigma for m in measurements])

    def linearize(p):
        diff_a = p - pos_a
        diff_b = p - pos_b
        da = np.sqrt(np.einsum("ij,ij->i", diff_a, diff_a))
        db = np.sqrt(np.einsum("ij,ij->i", diff_b, diff_b))
        if np.any(da < 1e-9) or np.any(db < 1e-9):
            raise NoFixError("guess collided with an anchor", {})
        r = (dd - (da - db)) / sigma
        jac = (diff_a[:, :2] / da[:, None] - diff_b[:, :2] / db[:, None]) / sigma[:, None]
        return r, jac

    def normal_matrix(jac):
        # J is (m, 2): work with the 2x2 normal matrix in closed form.
        jtj = jac.T @ jac
        tr = jtj[0, 0] + jtj[1, 1]
        det = jtj[0, 0] * jtj[1, 1] - jtj[0, 1] * jtj[1, 0]
        disc = max(0.0, (tr / 2) ** 2 - det)
        lam_max = tr / 2 + math.sqrt(disc)
        lam_min = tr / 2 - math.sqrt(disc)
        # cond(J)^2 == cond(J^T J) for the spectral norm.
        cond2 = lam_max / lam_min if lam_min > 0 else math.inf
        return jtj, det, cond2

    p = np.array([initial_guess[0], initial_guess[1], z], dtype=float)
    iterations = 0
    for iterations in range(1, MAX_GN_ITERATIONS + 1):
        r, jac = linearize(p)
        jtj, det, cond2 = normal_matrix(jac)
        if not math.isfinite(cond2) or cond2 > MAX_CONDITION**2:
            raise NoFixError(
                "ill-conditioned TDOA geometry",
                {"condition_number": float(math.sqrt(cond2)),
                 "iterations": iterations},
            )
        jtr = jac.T @ r
        step = np.array([
            (jtj[1, 1] * jtr[0] - jtj[0, 1] * jtr[1]) / det,
            (jtj[0, 0] * jtr[1] - jtj[1, 0] * jtr[0]) / det,
        ])
        if not np.all(np.isfinite(step)):
            raise NoFixError("solver diverged", {"iterations": iterations})
        p[:2] += step
        # 25 iterations is a stop rule, not a failure: TDOA cost surfaces
        # flatten near the solution and the fix is already usable.
        if float(np.hypot(step[0], step[1])) < GN_STEP_TOL:
            break

    r, jac = linearize(p)
    jtj, det, _ = normal_matrix(jac)
    cov = np.array([[jtj[1, 1], -jtj[0, 1]], [-jtj[1, 0], jtj[0, 0]]]) / det
    return TdoaFix(
        x=float(p[0]), y=float(p[1]), covariance=cov,
        iterations=iterations,
        residual_rms=float(np.sqrt(np.mean((r * sigma) ** 2))),
    )


# --------------------------------------------------------------------------
# Anchor self-calibration from inter-anchor ranges
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationResult:
    constellation: AnchorConstellation
    residual_rms: float
    iterations: int


def _classical_mds_2d(dist: np.ndarray) -> np.ndarray:
    """Classical multidimensional scaling embedding in the plane."""
    n = dist.shape[0]
    d2 = np.nan_to_num(dist, nan=np.nanmean(dist)) ** 2
    j = np.eye(n) - np.ones((n, n)) / n
    b = -0.5 * j @ d2 @ j
    vals, vecs = np.linalg.eigh(b)
    order = np.argsort(vals)[::-1][:2]
    coords = vecs[:, order] * np.sqrt(np.maximum(vals[order], 0.0))
    return coords


def _apply_gauge(coords: np.ndarray) -> np.ndarray:
    """Pin anchor0 at the origin, anchor1 on +x, anchor2 above the axis."""
    out = coords - coords[0]
    angle = math.atan2(out[1, 1], out[1, 0])
    c, s = math.cos(-angle), math.sin(-angle)
    rot = np.array([[c, -s], [s, c]])
    out = out @ rot.T
    if out.shape[0] > 2 and out[2, 1] < 0:
        out[:, 1] = -out[:, 1]
    return out


def calibrate_anchors(
    ranges: np.ndarray,
    n_anchors: int,
    sigma: float = 0.02,
    venue: tuple[float, float] = DEFAULT_VENUE,
    rng: Optional[np.random.Generator] = None,
    init_jitter: float = 0.0,
) -> CalibrationResult:
    """Recover planar anchor positions from the pairwise range matrix.

    NaN entries mark unmeasured pairs (a near-complete matrix is fine).
    The gauge is fixed by construction: anchor0 at the origin, anchor1 on
    the +x axis, anchor2 with y > 0. Raises CalibrationError when the
    geometry is rank-deficient or the residual RMS exceeds 5 sigma.
    """
    ranges = np.asarray(ranges, dtype=float)
    if n_anchors < 4:
        raise CalibrationError(f"need >= 4 anchors, got {n_anchors}")
    if ranges.shape != (n_anchors, n_anchors):
        raise InvalidInputError("ranges must be an n x n matrix")

    pairs = [
        (i, j)
        for i in range(n_anchors)
        for j in range(i + 1, n_anchors)
        if math.isfinite(ranges[i, j])
    ]
    if len(pairs) < 2 * n_anchors - 3:
        raise CalibrationError(
            f"only {len(pairs)} ranges for {2 * n_anchors - 3} unknowns"
        )

    init = _apply_gauge(_classical_mds_2d(ranges))
    if init_jitter > 0.0:
        if rng is None:
            raise InvalidInputError("init_jitter needs an rng")
        init = init + rng.normal(0.0, init_jitter, size=init.shape)
        init = _apply_gauge(init)

    # Free parameters: x1, then (x_i, y_i) for i >= 2.
    x0 = np.concatenate([[init[1, 0]], init[2:].ravel()])
    meas = np.array([ranges[i, j] for i, j in pairs])
    ii = np.array([i for i, _ in pairs])
    jj = np.array([j for _, j in pairs])

    def unpack(params):
        coords = np.zeros((n_anchors, 2))
        coords[1, 0] = params[0]
        coords[2:] = params[1:].reshape(-1, 2)
        return coords

    def resid(params):
        coords = unpack(params)
        return np.linalg.norm(coords[ii] - coords[jj], axis=1) - meas

    sol = least_squares(resid, x0, method="lm", xtol=1e-14, ftol=1e-14, gtol=1e-14)
    coords = _apply_gauge(unpack(sol.x))
    rms = float(np.sqrt(np.mean(resid(np.concatenate([[coords[1, 0]], coords[2:].ravel()])) ** 2)))

    jac_rank = np.linalg.matrix_rank(sol.jac)
    if jac_rank < len(x0):
        raise CalibrationError(
            "rank-deficient anchor geometry",
            {"rank": int(jac_rank), "unknowns": len(x0)},
        )
    if sigma > 0 and rms > 5.0 * sigma:
        raise CalibrationError(
            f"residual RMS {rms:.4f} m exceeds 5 sigma",
            {"residual_rms": rms, "sigma": sigma},
        )
    anchors = tuple(
        (i, np.array([coords[i, 0], coords[i, 1], 0.0])) for i in range(n_anchors)
    )
    return CalibrationResult(
        AnchorConstellation(anchors, venue), rms, int(sol.nfev)
    )

"""Estimate-vs-truth error reporting (the motion-capture comparison)."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError


@dataclass(frozen=True)
class ErrorReport:
    rmse: float
    per_axis_rmse: tuple[float, ...]
    max_error: float
    times: np.ndarray        # (n,) estimate timestamps inside the overlap
    residuals: np.ndarray    # (n, k) estimate - interpolated truth


def error_report(estimated: np.ndarray, truth: np.ndarray) -> ErrorReport:
    """Compare a timestamped estimate track against an interpolable truth.

    Both tracks are (n, 1+k) arrays with a leading time column and k
    position axes. Truth is linearly interpolated at the estimate
    timestamps; samples outside the truth's time range are discarded.
    """
    estimated = np.asarray(estimated, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimated.ndim != 2 or truth.ndim != 2 or estimated.shape[1] != truth.shape[1]:
        raise InvalidInputError("tracks must be 2-D with matching column counts")
    k = estimated.shape[1] - 1
    if k < 1:
        raise InvalidInputError("tracks need at least one position axis")

    t_lo = max(estimated[0, 0], truth[0, 0])
    t_hi = min(estimated[-1, 0], truth[-1, 0])
    sel = (estimated[:, 0] >= t_lo) & (estimated[:, 0] <= t_hi)
    if t_hi < t_lo or not np.any(sel):
        raise InvalidInputError("tracks have no overlapping time range")

    times = estimated[sel, 0]
    interp = np.column_stack(
        [np.interp(times, truth[:, 0], truth[:, 1 + a]) for a in range(k)]
    )
    residuals = estimated[sel, 1:] - interp
    err_norm = np.linalg.norm(residuals, axis=1)
    return ErrorReport(
        rmse=float(np.sqrt(np.mean(err_norm**2))),
        per_axis_rmse=tuple(float(v) for v in np.sqrt(np.mean(residuals**2, axis=0))),
        max_error=float(np.max(err_norm)),
        times=times,
        residuals=residuals,
    )


def write_error_csv(report: ErrorReport, path) -> None:
    k = report.residuals.shape[1]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t_s"] + [f"residual_{ax}" for ax in "xyz"[:k]])
        for i in range(len(report.times)):
            w.writerow([f"{report.times[i]:.6f}"]
                       + [f"{v:.6f}" for v in report.residuals[i]])

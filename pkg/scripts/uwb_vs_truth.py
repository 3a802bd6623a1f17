#!/usr/bin/env python3
"""Pursuit run: UWB estimate against ground truth, with error stats.

The five aerial robots fly a cyclic pursuit while their positions are
solved from noisy TDOA and fused with odometry/IMU; the export compares
raw fixes, fused track, and truth for one robot.
"""

import argparse
from pathlib import Path

import numpy as np

from swarmstage.localization import error_report
from swarmstage.orchestrator import replay_figure, run
from swarmstage.scenarios import pursuit_script


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--duration", type=float, default=30.0)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="out/uwb_vs_truth")
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()

    trace = run(pursuit_script(duration=args.duration), seed=args.seed)
    out = Path(args.out)
    trace.save(out / "trace")
    for f in replay_figure(trace, "uwb_vs_truth", out):
        print(f)

    by = {}
    for t, rid, src, x, y, z, yaw in trace.tracks:
        by.setdefault((rid, src), []).append((t, x, y))
    for rid in sorted({r for r, _ in by}):
        truth = np.array(by[(rid, "truth")])
        raw = error_report(np.array(by[(rid, "uwb_raw")]), truth)
        fused = error_report(np.array(by[(rid, "fused")]), truth)
        print(f"robot {rid}: raw RMSE {raw.rmse:.3f} m (max {raw.max_error:.3f}), "
              f"fused RMSE {fused.rmse:.3f} m (max {fused.max_error:.3f})")

    if args.plot:
        import matplotlib.pyplot as plt

        rid = sorted({r for r, _ in by})[0]
        truth = np.array(by[(rid, "truth")])
        fused = np.array(by[(rid, "fused")])
        raw = np.array(by[(rid, "uwb_raw")])
        plt.figure(figsize=(5, 8))
        plt.plot(truth[:, 1], truth[:, 2], "b-", label="ground truth")
        plt.plot(fused[:, 1], fused[:, 2], color="orange", label="fused")
        plt.plot(raw[:, 1], raw[:, 2], ".", color="orange", ms=2, alpha=0.4,
                 label="raw fixes")
        plt.axis("equal")
        plt.xlabel("x [m]")
        plt.ylabel("y [m]")
        plt.legend()
        plt.tight_layout()
        png = out / "uwb_vs_truth.png"
        plt.savefig(png, dpi=120)
        print(png)


if __name__ == "__main__":
    main()

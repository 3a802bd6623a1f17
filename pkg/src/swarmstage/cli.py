"""Command-line entry points: run, serve, calibrate, export."""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .errors import SwarmStageError
from .localization import calibrate_anchors
from .orchestrator import RunTrace, load_script, replay_figure, run
from .scenarios import STANDARD_SCENARIOS


def _setup_logging() -> None:
    level = os.environ.get("SWARMSTAGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _load_script_arg(ref: str):
    # A path to a YAML script, or the name of a shipped scenario.
    if ref in STANDARD_SCENARIOS:
        return STANDARD_SCENARIOS[ref]()
    if not os.path.exists(ref):
        raise SwarmStageError(f"no such file: {ref}")
    return load_script(ref)


def cmd_run(args) -> int:
    script = _load_script_arg(args.script)
    trace = run(script, seed=args.seed)
    trace.save(args.out)
    print(f"trace written to {args.out}")
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    script = _load_script_arg(args.script)
    try:
        serve(script, args.port, seed=args.seed, time_scale=args.time_scale)
    except KeyboardInterrupt:
        pass
    return 0


def cmd_calibrate(args) -> int:
    ranges = np.loadtxt(args.ranges, delimiter=",")
    result = calibrate_anchors(ranges, ranges.shape[0], sigma=args.sigma)
    result.constellation.save(args.out)
    print(f"calibrated {ranges.shape[0]} anchors, residual RMS "
          f"{result.residual_rms * 100:.2f} cm -> {args.out}")
    return 0


def cmd_export(args) -> int:
    trace = RunTrace.load(args.trace)
    written = replay_figure(trace, args.figure, args.out)
    for path in written:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmstage",
        description="Deterministic multi-robot performance simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a performance script, write a trace")
    p.add_argument("script", help="script YAML path or shipped scenario name")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="trace output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="live console session over a websocket")
    p.add_argument("script")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--time-scale", type=float, default=1.0,
                   help="sim seconds per wall second multiplier")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("calibrate", help="anchor positions from a range matrix CSV")
    p.add_argument("ranges", help="n x n pairwise range matrix, CSV")
    p.add_argument("--out", required=True, help="constellation file to write")
    p.add_argument("--sigma", type=float, default=0.02)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("export", help="figure data (CSV + plot description) from a trace")
    p.add_argument("trace", help="trace directory")
    p.add_argument("--figure", choices=("bandwidth", "uwb"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "figure", None) == "uwb":
        args.figure = "uwb_vs_truth"
    try:
        return args.func(args)
    except SwarmStageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Run the 13-node roster and export the bandwidth profile.

Reproduces the launch-spike / steady-gossip / post-stop-quiet shape with
event markers at each cue. Writes CSV + plot description; add --plot for
a quick matplotlib rendering (not a core dependency).
"""

import argparse
from pathlib import Path

from swarmstage.orchestrator import replay_figure, run
from swarmstage.scenarios import bandwidth_profile_script


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--duration", type=float, default=300.0)
    ap.add_argument("--seed", type=int, default=13)
    ap.add_argument("--out", default="out/bandwidth_profile")
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()

    script = bandwidth_profile_script(duration=args.duration)
    trace = run(script, seed=args.seed)
    out = Path(args.out)
    trace.save(out / "trace")
    files = replay_figure(trace, "bandwidth", out)
    for f in files:
        print(f)

    steady = [s.bytes_per_s for s in trace.bandwidth
              if args.duration * 0.55 <= s.t < args.duration * 0.75]
    spike = max(s.bytes_per_s for s in trace.bandwidth)
    post = [s.bytes_per_s for s in trace.bandwidth if s.t >= args.duration * 0.85]
    print(f"spike {spike:.0f} B/s, steady {sum(steady)/len(steady):.0f} B/s, "
          f"post-stop {sum(post)/len(post):.0f} B/s")

    if args.plot:
        import matplotlib.pyplot as plt

        ts = [s.t for s in trace.bandwidth]
        plt.figure(figsize=(10, 4))
        plt.semilogy(ts, [max(s.bytes_per_s, 1) for s in trace.bandwidth],
                     label="total")
        plt.semilogy(ts, [max(s.gossip_bps, 1) for s in trace.bandwidth],
                     label="gossip")
        colors = {"launch": "red", "switch": "green", "stop": "purple"}
        for s in trace.bandwidth:
            for e in s.events:
                plt.axvline(s.t, color=colors.get(e, "gray"), ls=":", alpha=0.8)
        plt.xlabel("time [s]")
        plt.ylabel("bytes/s")
        plt.legend()
        plt.tight_layout()
        png = out / "bandwidth.png"
        plt.savefig(png, dpi=120)
        print(png)


if __name__ == "__main__":
    main()

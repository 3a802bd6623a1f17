#!/usr/bin/env python3
"""Write the shipped program library and standard scenarios as YAML files.

Regenerates programs/*.yaml and scenarios/*.yaml at the repo root; both
directories are committed so the declarative formats stay diffable.
"""

import argparse
from pathlib import Path

from swarmstage.behaviors import save_program, standard_library
from swarmstage.localization import default_constellation
from swarmstage.orchestrator import save_script
from swarmstage.scenarios import (
    bandwidth_profile_script,
    console_demo_script,
    gossip_only_script,
    mixed_firework_script,
    pursuit_script,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--root", default=".")
    args = ap.parse_args()
    root = Path(args.root)

    prog_dir = root / "programs"
    prog_dir.mkdir(parents=True, exist_ok=True)
    for name, prog in standard_library().items():
        save_program(prog, prog_dir / f"{name}.yaml")
        print(prog_dir / f"{name}.yaml")

    scen_dir = root / "scenarios"
    scen_dir.mkdir(parents=True, exist_ok=True)
    for script in (
        bandwidth_profile_script(),
        pursuit_script(),
        mixed_firework_script(),
        console_demo_script(),
        gossip_only_script(13),
    ):
        save_script(script, scen_dir / f"{script.name}.yaml")
        print(scen_dir / f"{script.name}.yaml")

    default_constellation().save(scen_dir / "anchors_default.csv")
    print(scen_dir / "anchors_default.csv")


if __name__ == "__main__":
    main()

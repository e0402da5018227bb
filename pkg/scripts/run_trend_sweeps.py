#!/usr/bin/env python3
"""Run the three ellipticity sweeps (near-sphere, prolate, oblate).

Writes one CSV per particle shape into --out (default: results/sweeps).
"""

import argparse
import pathlib
import sys

from ellicos.cli import main as cli_main

CONFIGS = ["fig_sphere.toml", "fig_prolate.toml", "fig_oblate.toml"]


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/sweeps")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    root = pathlib.Path(__file__).resolve().parent.parent
    for name in CONFIGS:
        out = pathlib.Path(args.out) / name.replace(".toml", "")
        rc = cli_main(["sweep-ellipticity", "--config", str(root / "configs" / name),
                       "--out", str(out), "--threads", str(args.threads)])
        print(f"{name}: exit {rc} -> {out}/sweep_ellipticity.csv")
        if rc not in (0, 4):
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(main())

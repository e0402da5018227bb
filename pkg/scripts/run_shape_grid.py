#!/usr/bin/env python3
"""Fixed-volume shape grid of maximum librational occupations."""

import argparse
import pathlib
import sys

from ellicos.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/shape_grid")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    root = pathlib.Path(__file__).resolve().parent.parent
    return cli_main(["sweep-shape", "--config", str(root / "configs" / "shape_grid.toml"),
                     "--out", args.out, "--threads", str(args.threads)])


if __name__ == "__main__":
    sys.exit(main())

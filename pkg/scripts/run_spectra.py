#!/usr/bin/env python3
"""Output power spectra with cubic corrections (add --oracle for the
stochastic overlay; slower)."""

import argparse
import pathlib
import sys

import ellicos.cli as cli
from ellicos.config import parse_config, serialize_config
import dataclasses
import tempfile


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/spectra")
    ap.add_argument("--oracle", action="store_true")
    args = ap.parse_args()
    root = pathlib.Path(__file__).resolve().parent.parent
    cfg_path = root / "configs" / "spectra_prolate.toml"
    if not args.oracle:
        return cli.main(["spectra", "--config", str(cfg_path), "--out", args.out])
    cfg = parse_config(cfg_path)
    cfg = dataclasses.replace(cfg, spectra=dataclasses.replace(cfg.spectra, oracle=True))
    with tempfile.NamedTemporaryFile("w", suffix=".toml", delete=False) as fh:
        fh.write(serialize_config(cfg))
        tmp = fh.name
    return cli.main(["spectra", "--config", tmp, "--out", args.out])


if __name__ == "__main__":
    sys.exit(main())

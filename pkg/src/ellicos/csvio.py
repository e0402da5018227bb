"""Deterministic CSV output: schema comment line, unit-suffixed headers.

Floats are written with repr (shortest round-trip form), so identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import os

import numpy as np


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    x = float(v)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def write_csv(path, columns, schema: str) -> None:
    """Write named columns to path with a '# schema: ...' comment first line.

    columns: list of (name, sequence) pairs, all the same length.
    """
    names = [c[0] for c in columns]
    arrays = [c[1] for c in columns]
    n = len(arrays[0]) if arrays else 0
    for name, arr in columns:
        if len(arr) != n:
            raise ValueError(f"column {name!r} has length {len(arr)}, expected {n}")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# schema: {schema}\n")
        fh.write(",".join(names) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(arr[i]) for arr in arrays) + "\n")

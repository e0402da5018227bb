"""Parameter sweeps: ellipticity scans and fixed-volume shape grids.

Cells are independent and may run in a process pool; results are written in
grid order regardless of completion order, so identical configurations give
byte-identical output files.  Cell failures become flagged rows, never
aborted sweeps.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .config import RunConfig
from .csvio import write_csv
from .forces import COORDS
from .linearize import (
    InstabilityError,
    heating_rates,
    linearize_with_policy,
    normal_modes,
    occupations,
)
from .particle import InvalidParticleError, ParticleSpec, particle_properties

PRIMED = ("x'", "y'", "z'", "alpha'", "beta'", "gamma'")
LIBRATIONS = ("alpha'", "beta'", "gamma'")


@dataclass
class SweepRow:
    """One sweep cell: frequencies, rates, occupations, and stability flags."""

    value: float
    detuning: float
    omega_q: np.ndarray           # (6,) original-mode frequencies, nan if unstable
    stable_q: np.ndarray          # (6,) bool
    omega_big: dict               # per normal mode: omega_Q
    g_abs: dict
    gamma_minus: dict
    gamma_plus: dict
    xi: dict
    n: dict
    flags: dict                   # per normal mode: True means unstable/uncooled
    failed: bool = False


def _evaluate_cell(cfg: RunConfig, tweezer, particle_spec) -> SweepRow:
    props = particle_properties(particle_spec)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        setup, lin = linearize_with_policy(tweezer, cfg.cavity, props, cfg.detuning_policy)
        heat = heating_rates(lin, cfg.gas)
        row = SweepRow(
            value=tweezer.psi,
            detuning=setup.cavity.detuning,
            omega_q=lin.omega.copy(),
            stable_q=lin.stable.copy(),
            omega_big={}, g_abs={}, gamma_minus={}, gamma_plus={}, xi={}, n={}, flags={},
        )
        for i, name in enumerate(PRIMED):
            if not lin.stable[i]:
                row.flags[name] = True
        try:
            nm = normal_modes(lin, heat)
            ss = occupations(nm)
        except InstabilityError:
            for name in PRIMED:
                row.flags.setdefault(name, True)
            return row
        for i, name in enumerate(nm.names):
            row.omega_big[name] = nm.omega[i]
            row.g_abs[name] = abs(nm.g[i])
            row.gamma_minus[name] = ss.gamma_minus[i]
            row.gamma_plus[name] = ss.gamma_plus[i]
            row.xi[name] = nm.xi[i]
            row.n[name] = ss.n[i]
            row.flags[name] = bool(not ss.cooled[i] or not np.isfinite(ss.n[i]))
    return row


def _ellipticity_cell(args):
    cfg, psi = args
    tweezer = replace(cfg.tweezer, psi=psi)
    try:
        return _evaluate_cell(cfg, tweezer, cfg.particle)
    except Exception:
        row = SweepRow(psi, np.nan, np.full(6, np.nan), np.zeros(6, bool),
                       {}, {}, {}, {}, {}, {}, {name: True for name in PRIMED})
        row.failed = True
        return row


def run_ellipticity_sweep(cfg: RunConfig, threads: int = 1) -> list[SweepRow]:
    psis = np.linspace(cfg.sweep.start, cfg.sweep.stop, cfg.sweep.steps)
    jobs = [(cfg, float(p)) for p in psis]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_ellipticity_cell, jobs, chunksize=4))
    else:
        rows = [_ellipticity_cell(j) for j in jobs]
    return rows


def write_sweep_csv(path, rows: list[SweepRow]) -> None:
    def col_mode(getter, name):
        return np.array([getter(r).get(name, np.nan) for r in rows])

    cols = [("psi_rad", np.array([r.value for r in rows])),
            ("detuning_rad_s", np.array([r.detuning for r in rows]))]
    for i, q in enumerate(COORDS):
        cols.append((f"omega_{q}_rad_s", np.array([r.omega_q[i] for r in rows])))
        cols.append((f"stable_{q}", np.array([bool(r.stable_q[i]) for r in rows])))
    for name in PRIMED:
        tag = name.replace("'", "_p")
        cols.append((f"omega_{tag}_rad_s", col_mode(lambda r: r.omega_big, name)))
        cols.append((f"g_{tag}_rad_s", col_mode(lambda r: r.g_abs, name)))
        cols.append((f"gamma_minus_{tag}_rad_s", col_mode(lambda r: r.gamma_minus, name)))
        cols.append((f"gamma_plus_{tag}_rad_s", col_mode(lambda r: r.gamma_plus, name)))
        cols.append((f"xi_{tag}_rad_s", col_mode(lambda r: r.xi, name)))
        cols.append((f"n_{tag}", col_mode(lambda r: r.n, name)))
        cols.append((f"flag_{tag}", np.array([bool(r.flags.get(name, False)) for r in rows])))
    cols.append(("failed", np.array([r.failed for r in rows])))
    write_csv(path, cols, schema="ellipticity-sweep v1")


# ---------------------------------------------------------------------------
# shape grid
# ---------------------------------------------------------------------------


@dataclass
class ShapeCell:
    l1_nm: float
    l2_nm: float
    l3_nm: float
    max_librational_n: float
    divergent: bool
    invalid: bool = False


def _shape_cell(args):
    cfg, l1, l2, volume = args
    l3 = 6.0 * volume / (np.pi * l1 * l2)
    diameters = tuple(sorted((l1, l2, l3)))
    cell = ShapeCell(l1 * 1e9, l2 * 1e9, l3 * 1e9, np.inf, divergent=True)
    try:
        spec = ParticleSpec(diameters, cfg.particle.permittivity, cfg.particle.density)
    except InvalidParticleError:
        cell.invalid = True
        return cell
    tweezer = replace(cfg.tweezer, psi=cfg.shape_grid.ellipticity)
    try:
        row = _evaluate_cell(cfg, tweezer, spec)
    except Exception:
        cell.invalid = True
        return cell
    vals = [row.n.get(name, np.inf) for name in LIBRATIONS]
    flagged = any(row.flags.get(name, True) for name in LIBRATIONS)
    if flagged or not all(np.isfinite(v) for v in vals):
        return cell
    cell.max_librational_n = float(max(vals))
    cell.divergent = False
    return cell


def run_shape_grid(cfg: RunConfig, threads: int = 1) -> list[ShapeCell]:
    gs = cfg.shape_grid
    volume = 4.0 * np.pi * (gs.volume_radius_nm * 1e-9) ** 3 / 3.0
    axis = np.linspace(gs.min_nm, gs.max_nm, gs.steps) * 1e-9
    jobs = [(cfg, float(l1), float(l2), volume) for l1 in axis for l2 in axis]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(_shape_cell, jobs, chunksize=8))
    else:
        cells = [_shape_cell(j) for j in jobs]
    return cells


def write_shape_csv(path, cells: list[ShapeCell]) -> None:
    cols = [
        ("l1_nm", np.array([c.l1_nm for c in cells])),
        ("l2_nm", np.array([c.l2_nm for c in cells])),
        ("l3_nm", np.array([c.l3_nm for c in cells])),
        ("max_librational_n", np.array([c.max_librational_n for c in cells])),
        ("divergent", np.array([c.divergent for c in cells])),
        ("invalid", np.array([c.invalid for c in cells])),
    ]
    write_csv(path, cols, schema="shape-grid v1")

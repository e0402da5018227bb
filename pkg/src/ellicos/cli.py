"""Command-line interface.

Subcommands: sweep-ellipticity, sweep-shape, linearize, spectra, simulate.
Each takes --config <path>, --out <dir>, and optional --seed / --threads
overrides.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure, 4 all cells (or the requested system) unstable.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import warnings

import numpy as np

from .config import ConfigError, RunConfig, parse_config
from .csvio import write_csv
from .cavity import stationary_field
from .dynamics import FullState, StiffFailureError, integrate_full, integrate_quasistatic
from .forces import COORDS
from .linearize import (
    EquilibriumError,
    InstabilityError,
    heating_rates,
    linearize_with_policy,
    normal_modes,
    occupations,
    solve_equilibrium,
)
from .particle import InvalidParticleError, particle_properties
from .spectra import (
    CubicCoefficients,
    LangevinModel,
    cubic_coefficients,
    cubic_psd_corrections,
    default_grid,
    harmonic_psd,
    langevin_simulate,
)
from .sweeps import (
    PRIMED,
    run_ellipticity_sweep,
    run_shape_grid,
    write_shape_csv,
    write_sweep_csv,
)


def _common_flags(sub):
    sub.add_argument("--config", required=True, help="TOML configuration file")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub.add_argument("--threads", type=int, default=None, help="worker processes for sweeps")


def _load(args) -> RunConfig:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.threads is not None:
        cfg = dataclasses.replace(cfg, threads=args.threads)
    os.makedirs(args.out, exist_ok=True)
    return cfg


def _linearized_pipeline(cfg: RunConfig):
    props = particle_properties(cfg.particle)
    setup, lin = linearize_with_policy(cfg.tweezer, cfg.cavity, props, cfg.detuning_policy)
    heat = heating_rates(lin, cfg.gas)
    return props, setup, lin, heat


def cmd_linearize(args) -> int:
    cfg = _load(args)
    props, setup, lin, heat = _linearized_pipeline(cfg)
    q_eq, b_eq = solve_equilibrium(setup, props)

    names, kinds, omegas, gabs, gm, gp, xi_r, xi_g, n_ss, stable = ([] for _ in range(10))
    for i, q in enumerate(COORDS):
        names.append(q)
        kinds.append("original")
        omegas.append(lin.omega[i])
        gabs.append(abs(lin.g_opt[i]))
        gm.append(np.nan)
        gp.append(np.nan)
        xi_r.append(heat.recoil[i])
        xi_g.append(heat.gas[i])
        n_ss.append(np.nan)
        stable.append(bool(lin.stable[i]))
    try:
        nm = normal_modes(lin, heat)
        ss = occupations(nm)
        for i, name in enumerate(nm.names):
            names.append(name)
            kinds.append("normal")
            omegas.append(nm.omega[i])
            gabs.append(abs(nm.g[i]))
            gm.append(ss.gamma_minus[i])
            gp.append(ss.gamma_plus[i])
            xi_r.append(nm.xi[i])
            xi_g.append(0.0)
            n_ss.append(ss.n[i])
            stable.append(bool(ss.cooled[i]))
    except InstabilityError as exc:
        print(f"warning: {exc}", file=sys.stderr)

    write_csv(
        os.path.join(args.out, "linearized_modes.csv"),
        [
            ("mode", names),
            ("kind", kinds),
            ("omega_rad_s", omegas),
            ("g_abs_rad_s", gabs),
            ("gamma_minus_rad_s", gm),
            ("gamma_plus_rad_s", gp),
            ("xi_recoil_rad_s", xi_r),
            ("xi_gas_rad_s", xi_g),
            ("n_steady", n_ss),
            ("stable", stable),
        ],
        schema="linearized-modes v1",
    )
    write_csv(
        os.path.join(args.out, "equilibrium.csv"),
        [
            ("quantity", ["detuning_rad_s", "b0_re", "b0_im",
                          "x_eq_m", "y_eq_m", "z_eq_m",
                          "alpha_eq_rad", "beta_eq_rad", "gamma_eq_rad",
                          "b1_eq_re", "b1_eq_im", "b2_eq_re", "b2_eq_im"]),
            ("value", [setup.cavity.detuning, lin.b0.real, lin.b0.imag,
                       q_eq[0], q_eq[1], q_eq[2], q_eq[3], q_eq[4], q_eq[5],
                       b_eq[0].real, b_eq[0].imag, b_eq[1].real, b_eq[1].imag]),
        ],
        schema="equilibrium v1",
    )
    return 0


def cmd_sweep_ellipticity(args) -> int:
    cfg = _load(args)
    rows = run_ellipticity_sweep(cfg, threads=cfg.threads)
    write_sweep_csv(os.path.join(args.out, "sweep_ellipticity.csv"), rows)
    all_unstable = all(
        r.failed or all(r.flags.get(name, True) for name in PRIMED) for r in rows
    )
    return 4 if all_unstable else 0


def cmd_sweep_shape(args) -> int:
    cfg = _load(args)
    cells = run_shape_grid(cfg, threads=cfg.threads)
    write_shape_csv(os.path.join(args.out, "shape_grid.csv"), cells)
    return 4 if all(c.divergent or c.invalid for c in cells) else 0


def cmd_spectra(args) -> int:
    cfg = _load(args)
    props, setup, lin, heat = _linearized_pipeline(cfg)
    nm = normal_modes(lin, heat)   # InstabilityError propagates -> exit 4
    ss = occupations(nm)
    # modes with no cavity coupling contribute nothing to the output spectrum;
    # a heating-dominated coupled mode has no stationary spectrum at all
    coupled = np.abs(nm.g) > 0
    if not bool(np.all(ss.cooled[coupled])):
        bad = [nm.names[i] for i in range(len(nm.names)) if coupled[i] and not ss.cooled[i]]
        raise InstabilityError(f"heating-dominated normal modes: {bad}")
    uncooled = [nm.names[i] for i in range(len(nm.names)) if not coupled[i]]
    if uncooled:
        print(f"note: modes without cavity coupling (absent from the spectra): {uncooled}",
              file=sys.stderr)

    grid = default_grid(nm, ss, cfg.spectra.points, cfg.spectra.span_factor)
    cols = [("omega_rad_s", grid),
            ("S0_mode1", harmonic_psd(nm, ss, 0, grid)),
            ("S0_mode2", harmonic_psd(nm, ss, 1, grid))]
    cubic = None
    if cfg.spectra.include_corrections:
        if bool(np.all(lin.stable[3:])):
            cubic = cubic_coefficients(lin)
            cors = cubic_psd_corrections(nm, ss, cubic, grid)
            cols += [("Scor_alpha", cors["alpha"]), ("Scor_beta", cors["beta"]),
                     ("Scor_gamma", cors["gamma"])]
        else:
            print("warning: unconfined libration, corrections unavailable", file=sys.stderr)
    write_csv(os.path.join(args.out, "spectrum.csv"), cols, schema="spectrum v1")

    if cfg.spectra.oracle:
        model = LangevinModel.from_normal_modes(nm, cubic)
        gmin = float(np.min(ss.gamma_net))
        duration = cfg.spectra.oracle_duration_s or 40.0 / gmin
        scale = max(model.kappa, float(np.max(np.abs(model.deltas)) + np.max(model.omega)))
        dt = cfg.spectra.oracle_dt_s or 0.1 / scale
        res = langevin_simulate(model, duration, dt, cfg.seed,
                                n_ensemble=cfg.spectra.oracle_ensemble,
                                compute_psd=True)
        write_csv(
            os.path.join(args.out, "spectrum_oracle.csv"),
            [("omega_rad_s", res.psd_freq),
             ("S_sim_mode1", res.psd[:, 0]),
             ("S_sim_mode2", res.psd[:, 1])],
            schema="spectrum-oracle v1",
        )
    return 0


def cmd_simulate(args) -> int:
    cfg = _load(args)
    props, setup, lin, heat = _linearized_pipeline(cfg)
    sim = cfg.simulate
    q_eq, b_eq = solve_equilibrium(setup, props)
    state = FullState(
        position=q_eq[:3] + np.asarray(sim.initial_offset_nm) * 1e-9,
        orientation=q_eq[3:] + np.asarray(sim.initial_angle_offset_rad),
        momentum=np.zeros(3),
        euler_momenta=np.zeros(3),
        modes=stationary_field(setup, props,
                               q_eq[:3] + np.asarray(sim.initial_offset_nm) * 1e-9,
                               q_eq[3:] + np.asarray(sim.initial_angle_offset_rad)),
    )
    path = os.path.join(args.out, "trajectory.csv")
    if sim.duration_s == 0.0:
        _write_empty_trajectory(path, sim.monodromy)
        return 0
    if sim.mode == "full":
        rec = integrate_full(setup, props, state, sim.duration_s, rtol=sim.rtol,
                             n_samples=sim.samples, include_radiation=sim.include_radiation)
    else:
        rec = integrate_quasistatic(setup, props, state, sim.duration_s, rtol=sim.rtol,
                                    n_samples=sim.samples,
                                    include_radiation=sim.include_radiation,
                                    monodromy=sim.monodromy)
    rec.to_csv(path)
    return 0


def _write_empty_trajectory(path, monodromy: bool) -> None:
    empty = np.empty(0)
    names = ["t_s", "x_m", "y_m", "z_m", "alpha_rad", "beta_rad", "gamma_rad",
             "px_kg_m_s", "py_kg_m_s", "pz_kg_m_s",
             "p_alpha_kg_m2_s", "p_beta_kg_m2_s", "p_gamma_kg_m2_s",
             "re_b1", "im_b1", "re_b2", "im_b2", "n_cav1", "n_cav2",
             "jx_kg_m2_s", "jy_kg_m2_s", "jz_kg_m2_s",
             "energy_mech_j", "energy_total_j", "energy_drift_rel"]
    if monodromy:
        names.append("log_phase_volume")
    write_csv(path, [(n, empty) for n in names], schema="trajectory v1")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ellicos",
        description="Cavity cooling of levitated ellipsoidal nanoparticles "
                    "by elliptic coherent scattering",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("sweep-ellipticity", cmd_sweep_ellipticity),
        ("sweep-shape", cmd_sweep_shape),
        ("linearize", cmd_linearize),
        ("spectra", cmd_spectra),
        ("simulate", cmd_simulate),
    ):
        p = sub.add_parser(name)
        _common_flags(p)
        p.set_defaults(handler=fn)

    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return args.handler(args)
    except (ConfigError, InvalidParticleError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except InstabilityError as exc:
        print(f"unstable system: {exc}", file=sys.stderr)
        return 4
    except (StiffFailureError, EquilibriumError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())

"""Run configuration: TOML parsing, validation, defaults, serialization.

Unit conventions are carried by the key names (nm, um, mm, mbar, K, W, rad).
Rates are angular frequencies: `_mhz` keys mean 1e6 rad/s ("angular MHz"),
so `linewidth_mhz = 2.0` is kappa = 2e6 rad/s.  Unknown keys are rejected.
All defaults are applied during parsing, and serialize/parse round-trips
exactly.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .constants import AMU, HELIUM_MASS_AMU
from .linearize import GasConfig, POLICIES
from .optics import CavityConfig, TweezerConfig
from .particle import ParticleSpec


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


@dataclass(frozen=True)
class SweepSettings:
    parameter: str = "ellipticity"
    start: float = 0.01
    stop: float = float(np.pi / 4)
    steps: int = 101


@dataclass(frozen=True)
class ShapeGridSettings:
    volume_radius_nm: float = 35.0
    min_nm: float = 40.0
    max_nm: float = 110.0
    steps: int = 41
    ellipticity: float = float(np.pi / 6)


@dataclass(frozen=True)
class SpectraSettings:
    points: int = 2**14
    span_factor: float = 1.5
    include_corrections: bool = True
    oracle: bool = False
    oracle_duration_s: float = 0.0   # 0: choose automatically from the rates
    oracle_dt_s: float = 0.0
    oracle_ensemble: int = 32


@dataclass(frozen=True)
class SimulateSettings:
    mode: str = "full"               # full | quasistatic
    duration_s: float = 1e-4
    samples: int = 1000
    initial_offset_nm: tuple[float, float, float] = (10.0, -10.0, 20.0)
    initial_angle_offset_rad: tuple[float, float, float] = (0.02, -0.02, 0.03)
    include_radiation: bool = True
    monodromy: bool = False
    rtol: float = 1e-9


@dataclass(frozen=True)
class RunConfig:
    particle: ParticleSpec
    tweezer: TweezerConfig
    cavity: CavityConfig
    gas: GasConfig
    detuning_policy: str = "mean-librational"
    seed: int = 0
    threads: int = 1
    sweep: SweepSettings = field(default_factory=SweepSettings)
    shape_grid: ShapeGridSettings = field(default_factory=ShapeGridSettings)
    spectra: SpectraSettings = field(default_factory=SpectraSettings)
    simulate: SimulateSettings = field(default_factory=SimulateSettings)


def _take(section: dict, section_name: str, key: str, default=None, required=False):
    if key in section:
        return section.pop(key)
    if required:
        raise ConfigError(f"[{section_name}] is missing required key {key!r}")
    return default


def _number(value, section, key, lo=None, hi=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"[{section}] {key} must be a number, got {value!r}")
    v = float(value)
    if lo is not None and v < lo:
        raise ConfigError(f"[{section}] {key} = {v} is below the allowed minimum {lo}")
    if hi is not None and v > hi:
        raise ConfigError(f"[{section}] {key} = {v} exceeds the allowed maximum {hi}")
    return v


def _reject_unknown(section: dict, name: str):
    if section:
        raise ConfigError(f"[{name}] has unknown keys: {sorted(section)}")


def parse_config_text(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from exc
    return _from_dict(data)


def parse_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: TOML parse error: {exc}") from exc
    return _from_dict(data)


def _from_dict(data: dict) -> RunConfig:
    data = {k: dict(v) if isinstance(v, dict) else v for k, v in data.items()}

    part = data.pop("particle", None)
    if part is None:
        raise ConfigError("missing [particle] section")
    diam = _take(part, "particle", "diameters_nm", required=True)
    if not (isinstance(diam, (list, tuple)) and len(diam) == 3):
        raise ConfigError("[particle] diameters_nm must be a list of three numbers")
    diam = tuple(_number(d, "particle", "diameters_nm", lo=1e-3) * 1e-9 for d in diam)
    if not (diam[0] <= diam[1] <= diam[2]):
        raise ConfigError("[particle] diameters_nm must be ascending (l_a <= l_b <= l_c)")
    eps = _number(_take(part, "particle", "permittivity", 2.1), "particle", "permittivity")
    if eps <= 1:
        raise ConfigError(f"[particle] permittivity must exceed 1, got {eps}")
    dens = _number(_take(part, "particle", "density_kg_m3", 2200.0), "particle",
                   "density_kg_m3", lo=1.0)
    _reject_unknown(part, "particle")
    particle = ParticleSpec(diam, eps, dens)

    twz = data.pop("tweezer", None)
    if twz is None:
        raise ConfigError("missing [tweezer] section")
    power = _number(_take(twz, "tweezer", "power_w", required=True), "tweezer", "power_w", lo=0.0)
    wx = _number(_take(twz, "tweezer", "waist_x_um", required=True), "tweezer", "waist_x_um", lo=1e-3) * 1e-6
    wy = _number(_take(twz, "tweezer", "waist_y_um", required=True), "tweezer", "waist_y_um", lo=1e-3) * 1e-6
    lam = _number(_take(twz, "tweezer", "wavelength_nm", 1550.0), "tweezer", "wavelength_nm", lo=1.0) * 1e-9
    psi = _number(_take(twz, "tweezer", "ellipticity_rad", 0.0), "tweezer", "ellipticity_rad",
                  lo=0.0, hi=float(np.pi / 4))
    zeta = _number(_take(twz, "tweezer", "polarization_angle_rad", 0.0), "tweezer",
                   "polarization_angle_rad")
    _reject_unknown(twz, "tweezer")
    tweezer = TweezerConfig(power, wx, wy, lam, psi, zeta)

    cavs = data.pop("cavity", None)
    if cavs is None:
        raise ConfigError("missing [cavity] section")
    length = _number(_take(cavs, "cavity", "length_mm", required=True), "cavity", "length_mm", lo=1e-3) * 1e-3
    waist = _number(_take(cavs, "cavity", "waist_um", required=True), "cavity", "waist_um", lo=1e-3) * 1e-6
    phase = _number(_take(cavs, "cavity", "phase_rad", 0.0), "cavity", "phase_rad")
    kappa = _number(_take(cavs, "cavity", "linewidth_mhz", required=True), "cavity",
                    "linewidth_mhz", lo=0.0) * 1e6
    theta = _number(_take(cavs, "cavity", "angle_rad", required=True), "cavity", "angle_rad")
    detuning = _number(_take(cavs, "cavity", "detuning_mhz", 0.0), "cavity", "detuning_mhz") * 1e6
    _reject_unknown(cavs, "cavity")
    cavity = CavityConfig(length, waist, phase, kappa, theta, detuning)

    gass = data.pop("gas", {})
    pressure = _number(_take(gass, "gas", "pressure_mbar", 0.0), "gas", "pressure_mbar", lo=0.0) * 100.0
    temp = _number(_take(gass, "gas", "temperature_k", 300.0), "gas", "temperature_k", lo=1e-3)
    mass = _number(_take(gass, "gas", "molecule_mass_amu", HELIUM_MASS_AMU), "gas",
                   "molecule_mass_amu", lo=1e-3) * AMU
    _reject_unknown(gass, "gas")
    gas = GasConfig(pressure, temp, mass)

    run = data.pop("run", {})
    policy = _take(run, "run", "detuning_policy", "mean-librational")
    if policy not in POLICIES:
        raise ConfigError(f"[run] detuning_policy must be one of {POLICIES}, got {policy!r}")
    seed = _take(run, "run", "seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"[run] seed must be a non-negative integer, got {seed!r}")
    threads = _take(run, "run", "threads", 1)
    if not isinstance(threads, int) or threads < 1:
        raise ConfigError(f"[run] threads must be a positive integer, got {threads!r}")
    _reject_unknown(run, "run")

    swp = data.pop("sweep", {})
    sweep = SweepSettings(
        parameter=_take(swp, "sweep", "parameter", "ellipticity"),
        start=_number(_take(swp, "sweep", "start_rad", 0.01), "sweep", "start_rad", lo=0.0),
        stop=_number(_take(swp, "sweep", "stop_rad", float(np.pi / 4)), "sweep", "stop_rad",
                     lo=0.0, hi=float(np.pi / 4)),
        steps=int(_number(_take(swp, "sweep", "steps", 101), "sweep", "steps", lo=2)),
    )
    if sweep.parameter != "ellipticity":
        raise ConfigError(f"[sweep] parameter must be 'ellipticity', got {sweep.parameter!r}")
    if sweep.stop <= sweep.start:
        raise ConfigError("[sweep] stop_rad must exceed start_rad")
    _reject_unknown(swp, "sweep")

    shp = data.pop("shape_grid", {})
    shape = ShapeGridSettings(
        volume_radius_nm=_number(_take(shp, "shape_grid", "volume_radius_nm", 35.0),
                                 "shape_grid", "volume_radius_nm", lo=1.0),
        min_nm=_number(_take(shp, "shape_grid", "min_nm", 40.0), "shape_grid", "min_nm", lo=1.0),
        max_nm=_number(_take(shp, "shape_grid", "max_nm", 110.0), "shape_grid", "max_nm", lo=1.0),
        steps=int(_number(_take(shp, "shape_grid", "steps", 41), "shape_grid", "steps", lo=2)),
        ellipticity=_number(_take(shp, "shape_grid", "ellipticity_rad", float(np.pi / 6)),
                            "shape_grid", "ellipticity_rad", lo=0.0, hi=float(np.pi / 4)),
    )
    if shape.max_nm <= shape.min_nm:
        raise ConfigError("[shape_grid] max_nm must exceed min_nm")
    _reject_unknown(shp, "shape_grid")

    spc = data.pop("spectra", {})
    spectra = SpectraSettings(
        points=int(_number(_take(spc, "spectra", "points", 2**14), "spectra", "points", lo=16)),
        span_factor=_number(_take(spc, "spectra", "span_factor", 1.5), "spectra",
                            "span_factor", lo=0.1),
        include_corrections=bool(_take(spc, "spectra", "include_corrections", True)),
        oracle=bool(_take(spc, "spectra", "oracle", False)),
        oracle_duration_s=_number(_take(spc, "spectra", "oracle_duration_s", 0.0),
                                  "spectra", "oracle_duration_s", lo=0.0),
        oracle_dt_s=_number(_take(spc, "spectra", "oracle_dt_s", 0.0), "spectra",
                            "oracle_dt_s", lo=0.0),
        oracle_ensemble=int(_number(_take(spc, "spectra", "oracle_ensemble", 32),
                                    "spectra", "oracle_ensemble", lo=1)),
    )
    _reject_unknown(spc, "spectra")

    sim = data.pop("simulate", {})
    mode = _take(sim, "simulate", "mode", "full")
    if mode not in ("full", "quasistatic"):
        raise ConfigError(f"[simulate] mode must be 'full' or 'quasistatic', got {mode!r}")
    off = _take(sim, "simulate", "initial_offset_nm", [10.0, -10.0, 20.0])
    aoff = _take(sim, "simulate", "initial_angle_offset_rad", [0.02, -0.02, 0.03])
    for name, val in (("initial_offset_nm", off), ("initial_angle_offset_rad", aoff)):
        if not (isinstance(val, (list, tuple)) and len(val) == 3):
            raise ConfigError(f"[simulate] {name} must be a list of three numbers")
    simulate = SimulateSettings(
        mode=mode,
        duration_s=_number(_take(sim, "simulate", "duration_s", 1e-4), "simulate",
                           "duration_s", lo=0.0),
        samples=int(_number(_take(sim, "simulate", "samples", 1000), "simulate", "samples", lo=1)),
        initial_offset_nm=tuple(float(v) for v in off),
        initial_angle_offset_rad=tuple(float(v) for v in aoff),
        include_radiation=bool(_take(sim, "simulate", "include_radiation", True)),
        monodromy=bool(_take(sim, "simulate", "monodromy", False)),
        rtol=_number(_take(sim, "simulate", "rtol", 1e-9), "simulate", "rtol", lo=1e-13, hi=1e-2),
    )
    _reject_unknown(sim, "simulate")

    if data:
        raise ConfigError(f"unknown top-level sections: {sorted(data)}")
    return RunConfig(
        particle=particle, tweezer=tweezer, cavity=cavity, gas=gas,
        detuning_policy=policy, seed=seed, threads=threads,
        sweep=sweep, shape_grid=shape, spectra=spectra, simulate=simulate,
    )


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)}")


def serialize_config(cfg: RunConfig) -> str:
    """Deterministic TOML text that parses back to an identical RunConfig."""
    sections = {
        "particle": {
            "diameters_nm": [d * 1e9 for d in cfg.particle.diameters],
            "permittivity": cfg.particle.permittivity,
            "density_kg_m3": cfg.particle.density,
        },
        "tweezer": {
            "power_w": cfg.tweezer.power,
            "waist_x_um": cfg.tweezer.waist_x * 1e6,
            "waist_y_um": cfg.tweezer.waist_y * 1e6,
            "wavelength_nm": cfg.tweezer.wavelength * 1e9,
            "ellipticity_rad": cfg.tweezer.psi,
            "polarization_angle_rad": cfg.tweezer.zeta,
        },
        "cavity": {
            "length_mm": cfg.cavity.length * 1e3,
            "waist_um": cfg.cavity.waist * 1e6,
            "phase_rad": cfg.cavity.phase,
            "linewidth_mhz": cfg.cavity.kappa / 1e6,
            "angle_rad": cfg.cavity.theta,
            "detuning_mhz": cfg.cavity.detuning / 1e6,
        },
        "gas": {
            "pressure_mbar": cfg.gas.pressure / 100.0,
            "temperature_k": cfg.gas.temperature,
            "molecule_mass_amu": cfg.gas.molecule_mass / AMU,
        },
        "run": {
            "detuning_policy": cfg.detuning_policy,
            "seed": cfg.seed,
            "threads": cfg.threads,
        },
        "sweep": {
            "parameter": cfg.sweep.parameter,
            "start_rad": cfg.sweep.start,
            "stop_rad": cfg.sweep.stop,
            "steps": cfg.sweep.steps,
        },
        "shape_grid": {
            "volume_radius_nm": cfg.shape_grid.volume_radius_nm,
            "min_nm": cfg.shape_grid.min_nm,
            "max_nm": cfg.shape_grid.max_nm,
            "steps": cfg.shape_grid.steps,
            "ellipticity_rad": cfg.shape_grid.ellipticity,
        },
        "spectra": {
            "points": cfg.spectra.points,
            "span_factor": cfg.spectra.span_factor,
            "include_corrections": cfg.spectra.include_corrections,
            "oracle": cfg.spectra.oracle,
            "oracle_duration_s": cfg.spectra.oracle_duration_s,
            "oracle_dt_s": cfg.spectra.oracle_dt_s,
            "oracle_ensemble": cfg.spectra.oracle_ensemble,
        },
        "simulate": {
            "mode": cfg.simulate.mode,
            "duration_s": cfg.simulate.duration_s,
            "samples": cfg.simulate.samples,
            "initial_offset_nm": list(cfg.simulate.initial_offset_nm),
            "initial_angle_offset_rad": list(cfg.simulate.initial_angle_offset_rad),
            "include_radiation": cfg.simulate.include_radiation,
            "monodromy": cfg.simulate.monodromy,
            "rtol": cfg.simulate.rtol,
        },
    }
    lines = []
    for name, body in sections.items():
        lines.append(f"[{name}]")
        for key, val in body.items():
            lines.append(f"{key} = {_toml_value(val)}")
        lines.append("")
    return "\n".join(lines)

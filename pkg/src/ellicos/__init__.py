"""Cavity cooling of levitated ellipsoidal nanoparticles by elliptic coherent scattering."""

from .particle import (
    ParticleSpec,
    ParticleProps,
    particle_properties,
    depolarization_factors,
    susceptibility_body,
    susceptibility_lab,
    rotation_matrix,
)
from .optics import TweezerConfig, CavityConfig, OpticalSetup, PlaneWaveField, drive_amplitude
from .forces import COORDS, WrenchResult, force_torque, optical_potential, scattered_power
from .cavity import (
    cavity_operators,
    stationary_field,
    quasi_static_field,
    friction_forces,
    contraction_rate,
    stability_predicate,
)
from .dynamics import FullState, TrajectoryRecord, integrate_full, integrate_quasistatic
from .linearize import (
    GasConfig,
    LinearizedSystem,
    harmonic_parameters,
    heating_rates,
    linearize_with_policy,
    normal_modes,
    occupations,
    solve_equilibrium,
    tweezer_minimum,
)
from .spectra import (
    CubicCoefficients,
    LangevinModel,
    cubic_coefficients,
    cubic_psd_corrections,
    harmonic_psd,
    langevin_simulate,
)
from .config import RunConfig, parse_config, serialize_config

__all__ = [
    "ParticleSpec", "ParticleProps", "particle_properties", "depolarization_factors",
    "susceptibility_body", "susceptibility_lab", "rotation_matrix",
    "TweezerConfig", "CavityConfig", "OpticalSetup", "PlaneWaveField", "drive_amplitude",
    "COORDS", "WrenchResult", "force_torque", "optical_potential", "scattered_power",
    "cavity_operators", "stationary_field", "quasi_static_field", "friction_forces",
    "contraction_rate", "stability_predicate",
    "FullState", "TrajectoryRecord", "integrate_full", "integrate_quasistatic",
    "GasConfig", "LinearizedSystem", "harmonic_parameters", "heating_rates",
    "linearize_with_policy", "normal_modes", "occupations", "solve_equilibrium",
    "tweezer_minimum",
    "CubicCoefficients", "LangevinModel", "cubic_coefficients", "cubic_psd_corrections",
    "harmonic_psd", "langevin_simulate",
    "RunConfig", "parse_config", "serialize_config",
]

__version__ = "0.1.0"

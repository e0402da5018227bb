"""Tweezer and cavity fields of the coherent-scattering setup.

The tweezer is an elliptically polarized Gaussian beam propagating along z
with intensity main axes x, y; the cavity supports two degenerate standing
TEM00 modes polarized along e_1 (in-plane) and e_2 = e_z, with the cavity
axis e_2 x e_1 orthogonal to the tweezer.  Fields are written for the
e^{-i omega t} time convention, and the cavity Gouy phase and broadening are
omitted (the cavity Rayleigh range dwarfs every other length scale).

The dimensionless total field

    u(r) = eps_t e_t f_t(r) + sum_j b_j e_j f_c(r)

relates to the physical field by E = sqrt(2 hbar omega / eps0 V_c) u.  All
spatial derivatives are analytic; finite differences appear only in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .constants import C_LIGHT, EPS0, HBAR
from .particle import ParticleProps


@dataclass(frozen=True)
class TweezerConfig:
    """Tweezer beam parameters.

    power: W
    waist_x, waist_y: m (intensity main axes)
    wavelength: m
    psi: ellipticity in [0, pi/4]; 0 linear, pi/4 circular
    zeta: rotation of the polarization axes against the intensity axes, rad
    """

    power: float
    waist_x: float
    waist_y: float
    wavelength: float
    psi: float
    zeta: float = 0.0

    def __post_init__(self):
        if self.power < 0 or self.waist_x <= 0 or self.waist_y <= 0 or self.wavelength <= 0:
            raise ValueError("tweezer power must be >= 0 and waists/wavelength positive")
        if not 0.0 <= self.psi <= np.pi / 4 + 1e-12:
            raise ValueError(f"ellipticity psi must lie in [0, pi/4], got {self.psi}")

    @cached_property
    def wavenumber(self) -> float:
        return 2 * np.pi / self.wavelength

    @cached_property
    def omega(self) -> float:
        return C_LIGHT * self.wavenumber

    @cached_property
    def rayleigh_range(self) -> float:
        return self.wavenumber * self.waist_x * self.waist_y / 2


@dataclass(frozen=True)
class CavityConfig:
    """Cavity parameters.

    length: m
    waist: m
    phase: standing-wave phase phi at the origin, rad
    kappa: amplitude decay rate, rad/s
    theta: rotation of the cavity polarization e_1 against e_x, rad
    detuning: tweezer minus cavity frequency, rad/s
    """

    length: float
    waist: float
    phase: float
    kappa: float
    theta: float
    detuning: float

    def __post_init__(self):
        if self.length <= 0 or self.waist <= 0:
            raise ValueError("cavity length and waist must be positive")
        if self.kappa < 0:
            raise ValueError("cavity linewidth must be non-negative")

    @cached_property
    def mode_volume(self) -> float:
        return np.pi * self.length * self.waist**2 / 4


@dataclass(frozen=True)
class PolarizationBasis:
    """Unit vectors of the polarization geometry (lab frame)."""

    e_t: np.ndarray    # complex tweezer polarization
    e_t1: np.ndarray   # major polarization axis
    e_t2: np.ndarray   # minor polarization axis
    e_1: np.ndarray    # cavity polarization 1 (in plane)
    e_2: np.ndarray    # cavity polarization 2 (= e_z)
    cavity_axis: np.ndarray  # e_2 x e_1

    @cached_property
    def e_matrix(self) -> np.ndarray:
        """Rows (e_1, e_2), the cavity polarization matrix."""
        return np.vstack([self.e_1, self.e_2])


def polarization_basis(psi: float, zeta: float, theta: float) -> PolarizationBasis:
    e_t1 = np.array([np.cos(zeta), -np.sin(zeta), 0.0])
    e_t2 = np.array([np.sin(zeta), np.cos(zeta), 0.0])
    e_1 = np.array([np.cos(theta), -np.sin(theta), 0.0])
    e_2 = np.array([0.0, 0.0, 1.0])
    return PolarizationBasis(
        e_t=np.cos(psi) * e_t1 + 1j * np.sin(psi) * e_t2,
        e_t1=e_t1,
        e_t2=e_t2,
        e_1=e_1,
        e_2=e_2,
        cavity_axis=np.cross(e_2, e_1),
    )


def drive_amplitude(tweezer: TweezerConfig, cavity: CavityConfig) -> float:
    """Dimensionless tweezer amplitude eps_t set by the beam power."""
    k = tweezer.wavenumber
    w = tweezer.omega
    return np.sqrt(
        2 * tweezer.power * k * cavity.mode_volume
        / (np.pi * HBAR * w**2 * tweezer.waist_x * tweezer.waist_y)
    )


@dataclass(frozen=True)
class OpticalSetup:
    """Tweezer + cavity + particle-derived coupling scales.

    epsilon_t: dimensionless tweezer drive amplitude
    coupling_u0: U_0 = -omega V / 2 V_c, rad/s (negative)
    gamma_sc: free-space scattering rate omega k^3 V^2 / 6 pi V_c, rad/s
    """

    tweezer: TweezerConfig
    cavity: CavityConfig
    epsilon_t: float
    coupling_u0: float
    gamma_sc: float
    basis: PolarizationBasis

    @classmethod
    def assemble(cls, tweezer: TweezerConfig, cavity: CavityConfig,
                 props: ParticleProps) -> "OpticalSetup":
        w = tweezer.omega
        k = tweezer.wavenumber
        v = props.volume
        vc = cavity.mode_volume
        return cls(
            tweezer=tweezer,
            cavity=cavity,
            epsilon_t=drive_amplitude(tweezer, cavity),
            coupling_u0=-w * v / (2 * vc),
            gamma_sc=w * k**3 * v**2 / (6 * np.pi * vc),
            basis=polarization_basis(tweezer.psi, tweezer.zeta, cavity.theta),
        )

    @property
    def field_scale(self) -> float:
        """Physical field per unit dimensionless amplitude, V/m."""
        return np.sqrt(2 * HBAR * self.tweezer.omega / (EPS0 * self.cavity.mode_volume))

    def with_scattering_off(self) -> "OpticalSetup":
        """Copy of the setup with the free-space scattering rate zeroed."""
        import dataclasses

        return dataclasses.replace(self, gamma_sc=0.0)


def tweezer_mode(tweezer: TweezerConfig, r) -> tuple[complex, np.ndarray]:
    """Traversing Gaussian mode f_t(r) and its gradient.

    f_t = exp(-x^2/(w_x^2 r2) - y^2/(w_y^2 r2)) / sqrt(r2) * e^{i(kz - phi_t)}
    with r2 = 1 + z^2/z_R^2 and the Gouy phase
    phi_t = arctan(z/z_R) - (k z / 2)(x^2 + y^2)/(z^2 + z_R^2).
    """
    x, y, z = float(r[0]), float(r[1]), float(r[2])
    k = tweezer.wavenumber
    zr = tweezer.rayleigh_range
    wx2 = tweezer.waist_x**2
    wy2 = tweezer.waist_y**2
    r2 = 1.0 + (z / zr) ** 2
    zz = z * z + zr * zr
    amp = math.exp(-x * x / (wx2 * r2) - y * y / (wy2 * r2)) / math.sqrt(r2)
    phase = k * z - math.atan2(z, zr) + 0.5 * k * z * (x * x + y * y) / zz
    f = amp * complex(math.cos(phase), math.sin(phase))
    dlog_x = complex(-2 * x / (wx2 * r2), k * z * x / zz)
    dlog_y = complex(-2 * y / (wy2 * r2), k * z * y / zz)
    dr2_dz = 2 * z / zr**2
    dlog_z = complex(
        -0.5 * dr2_dz / r2 + (x * x / wx2 + y * y / wy2) * dr2_dz / r2**2,
        k - zr / zz + 0.5 * k * (x * x + y * y) * (zr * zr - z * z) / zz**2,
    )
    return f, np.array([f * dlog_x, f * dlog_y, f * dlog_z])


def cavity_mode(cavity: CavityConfig, k: float, r) -> tuple[float, np.ndarray]:
    """Standing-wave Gaussian mode f_c(r) and its gradient (real).

    f_c = cos(k axis.r + phi) exp(-((e_1.r)^2 + z^2)/w_c^2), with the axis
    e_2 x e_1 and the transverse coordinates e_1.r and z.
    """
    x, y, z = float(r[0]), float(r[1]), float(r[2])
    ct, st = math.cos(cavity.theta), math.sin(cavity.theta)
    u1 = ct * x - st * y
    arg = k * (st * x + ct * y) + cavity.phase
    w2 = cavity.waist**2
    gauss = math.exp(-(u1 * u1 + z * z) / w2)
    c, s = math.cos(arg), math.sin(arg)
    f = c * gauss
    ks = -k * s * gauss
    env = -2.0 * c * gauss / w2
    return f, np.array([ks * st + env * u1 * ct, ks * ct - env * u1 * st, env * z])


def mode_field(setup: OpticalSetup, r, b) -> tuple[np.ndarray, np.ndarray]:
    """Dimensionless total field u(r) and Jacobian J[i, j] = d u_j / d r_i."""
    ft, grad_ft = tweezer_mode(setup.tweezer, r)
    fc, grad_fc = cavity_mode(setup.cavity, setup.tweezer.wavenumber, r)
    bas = setup.basis
    e_tw = setup.epsilon_t * bas.e_t
    e_cav = b[0] * bas.e_1 + b[1] * bas.e_2
    u = e_tw * ft + e_cav * fc
    jac = grad_ft[:, None] * e_tw[None, :] + grad_fc[:, None] * e_cav[None, :]
    return u, jac


def total_field(setup: OpticalSetup, r, b) -> tuple[np.ndarray, np.ndarray]:
    """Physical field E(r) in V/m and its Jacobian d_i E_j."""
    u, jac = mode_field(setup, r, b)
    s = setup.field_scale
    return s * u, s * jac


@dataclass(frozen=True)
class PlaneWaveField:
    """Uniform-amplitude plane wave u = amplitude * e * exp(i k_vec . r).

    Stands in for the trap field in symmetry tests (e.g. conservation of the
    angular momentum component along a linear polarization axis).
    """

    amplitude: float
    polarization: np.ndarray  # real or complex unit vector
    k_vector: np.ndarray      # rad/m

    def field(self, r) -> tuple[np.ndarray, np.ndarray]:
        phase = np.exp(1j * (self.k_vector @ np.asarray(r, dtype=float)))
        u = self.amplitude * np.asarray(self.polarization, dtype=complex) * phase
        jac = np.outer(1j * self.k_vector, u)
        return u, jac

"""Optical forces and torques on a small dielectric ellipsoid.

The induced dipole carries a radiative correction of first order in V k^3,
which splits the wrench into a conservative part (gradient of the optical
potential) and a non-conservative radiation-pressure part.  Torques do not
vanish for anisotropic particles even in linearly polarized light, and the
self-interaction of the scattered field is what makes the total torque of an
isotropic particle vanish exactly.

Time-averaging over the optical period is implicit throughout; all returned
quantities are real.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import EPS0, HBAR
from .optics import OpticalSetup, mode_field
from .particle import (
    ParticleProps,
    susceptibility_lab,
    susceptibility_lab_derivatives,
)

# Generalized coordinates, in canonical order.
COORDS = ("x", "y", "z", "alpha", "beta", "gamma")


def effective_masses(props: ParticleProps) -> np.ndarray:
    """Effective mass of each generalized coordinate: (m, m, m, I_a, I_b, I_c)."""
    return np.array([props.mass] * 3 + list(props.inertia))


def induced_dipole(props: ParticleProps, omega, field, k: float) -> np.ndarray:
    """Induced dipole moment with the first-order radiative correction.

    p = eps0 V chi (1 + i V k^3 chi / 6 pi) E; the correction is suppressed
    by V k^3 chi but is responsible for the radiation-pressure torque.
    """
    chi = susceptibility_lab(props, omega)
    v = props.volume
    e = np.asarray(field, dtype=complex)
    return EPS0 * v * (chi @ (e + 1j * v * k**3 / (6 * np.pi) * (chi @ e)))


def optical_potential(props: ParticleProps, omega, field) -> float:
    """Conservative potential -(eps0 V / 4) E* . chi E (real for real chi)."""
    chi = susceptibility_lab(props, omega)
    e = np.asarray(field, dtype=complex)
    return -0.25 * EPS0 * props.volume * np.real(np.vdot(e, chi @ e))


@dataclass(frozen=True)
class WrenchResult:
    """Force and torque split into conservative and radiation-pressure parts."""

    force_conservative: np.ndarray   # N
    force_radiation: np.ndarray      # N
    torque_conservative: np.ndarray  # N m
    torque_radiation: np.ndarray     # N m

    @property
    def force(self) -> np.ndarray:
        return self.force_conservative + self.force_radiation

    @property
    def torque(self) -> np.ndarray:
        return self.torque_conservative + self.torque_radiation


def force_torque(props: ParticleProps, omega, field, field_jacobian, k: float) -> WrenchResult:
    """Total optical wrench from the field and its spatial Jacobian.

    field_jacobian[i, j] = d E_j / d r_i.  The conservative parts derive from
    the optical potential; the radiation parts scale as V^2 k^3.
    """
    chi = susceptibility_lab(props, omega)
    e = np.asarray(field, dtype=complex)
    jac = np.asarray(field_jacobian, dtype=complex)
    v = props.volume
    chi_e = chi @ e
    rad_pref = EPS0 * k**3 * v**2 / (12 * np.pi)

    f_cons = 0.5 * EPS0 * v * np.real(jac @ np.conj(chi_e))
    f_rad = rad_pref * np.imag((jac @ chi) @ np.conj(chi_e))

    n_cons = 0.5 * EPS0 * v * np.real(np.cross(np.conj(chi_e), e))
    n_rad = rad_pref * np.imag(
        np.cross(np.conj(chi @ chi_e), e) - np.cross(np.conj(chi_e), chi_e)
    )
    return WrenchResult(f_cons, f_rad, n_cons, n_rad)


def _generalized_forces_core(chi, dchi, u, jac_u, hbar_u0, hbar_gsc):
    """Conservative and radiation generalized forces for all six coordinates.

    Works on the dimensionless field u; prefactors hbar*U_0 and hbar*gamma_sc
    carry the physical scale.  Returns (f_cons, f_rad), each shape (6,).
    """
    chi_u = chi @ u
    chi_u_c = np.conj(chi_u)
    f_cons = np.empty(6)
    f_rad = np.empty(6)
    # translations, batched over the three gradient rows (chi is symmetric)
    f_cons[:3] = -2.0 * hbar_u0 * np.real(jac_u @ chi_u_c)
    f_rad[:3] = hbar_gsc * np.imag((jac_u @ chi) @ chi_u_c)
    # orientations via the susceptibility derivatives
    dchi_u = dchi @ u
    f_cons[3:] = -hbar_u0 * np.real(dchi_u @ np.conj(u))
    f_rad[3:] = hbar_gsc * np.imag(dchi_u @ chi_u_c)
    return f_cons, f_rad


def generalized_forces(setup: OpticalSetup, props: ParticleProps, r, omega, b):
    """Generalized conservative and radiation forces at a full configuration.

    Conservative entries equal -dV_opt/dq at fixed cavity amplitudes; the
    radiation entries are hbar gamma_sc Im[u* . chi d_q(chi u)].
    """
    chi = susceptibility_lab(props, omega)
    dchi = susceptibility_lab_derivatives(props, omega)
    u, jac = mode_field(setup, r, b)
    return _generalized_forces_core(
        chi, dchi, u, jac, HBAR * setup.coupling_u0, HBAR * setup.gamma_sc
    )


def generalized_radiation_force(setup: OpticalSetup, props: ParticleProps, r, omega, b,
                                coord: str) -> float:
    """Radiation-pressure generalized force for one coordinate q."""
    _, f_rad = generalized_forces(setup, props, r, omega, b)
    return f_rad[COORDS.index(coord)]


def scattered_power(props: ParticleProps, omega, field, k: float, omega_laser: float) -> float:
    """Total power scattered into free space, eps0 omega k^3 V^2 |chi E|^2 / 12 pi."""
    chi = susceptibility_lab(props, omega)
    e = np.asarray(field, dtype=complex)
    chi_e = chi @ e
    return EPS0 * omega_laser * k**3 * props.volume**2 / (12 * np.pi) * np.real(np.vdot(chi_e, chi_e))

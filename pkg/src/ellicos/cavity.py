"""Cavity back-action: effective mode matrices, quasi-static field, and friction.

The two cavity amplitudes obey db/dt = A b + eta with A = i Delta_eff -
kappa_eff.  The particle shifts the detuning, adds scattering loss, and pumps
the modes through the coherently driven polarization.  When the cavity
follows the mechanics adiabatically, eliminating the field yields a
velocity-proportional friction force and a positive phase-space contraction
rate for sufficiently red detuning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import HBAR
from .optics import OpticalSetup, cavity_mode, mode_field, tweezer_mode
from .particle import (
    ParticleProps,
    euler_rates_from_momenta,
    inertia_matrix,
    susceptibility_lab,
    susceptibility_lab_derivatives,
)


@dataclass(frozen=True)
class CavityOperators:
    """Effective 2x2 cavity matrices and pump vector at fixed (R, Omega)."""

    delta_eff: np.ndarray  # real symmetric, rad/s
    kappa_eff: np.ndarray  # real symmetric positive definite, rad/s
    a_matrix: np.ndarray   # i delta_eff - kappa_eff
    eta: np.ndarray        # complex pump, rad/s


def _inv2(m: np.ndarray) -> np.ndarray:
    """Cofactor inverse of a 2x2 matrix (deterministic, no LAPACK dispatch)."""
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det


_EYE2 = np.eye(2)


def operators_from_chi(setup: OpticalSetup, chi: np.ndarray, fc: float, ft: complex) -> CavityOperators:
    """Effective cavity matrices for an explicitly supplied susceptibility tensor."""
    bas = setup.basis
    e_mat = bas.e_matrix                           # (2, 3), rows e_j
    chi_e = chi @ e_mat.T                          # (3, 2)
    chi_et = chi @ bas.e_t
    fc2 = fc * fc
    chi_jj = e_mat @ chi_e
    chi2_jj = chi_e.T @ chi_e
    delta_eff = setup.cavity.detuning * _EYE2 - setup.coupling_u0 * fc2 * chi_jj
    kappa_eff = setup.cavity.kappa * _EYE2 + (0.5 * setup.gamma_sc * fc2) * chi2_jj
    w_et = 1j * setup.coupling_u0 * chi_et + 0.5 * setup.gamma_sc * (chi @ chi_et)
    eta = (-setup.epsilon_t * fc * ft) * (e_mat @ w_et)
    return CavityOperators(delta_eff, kappa_eff, 1j * delta_eff - kappa_eff, eta)


def cavity_operators(setup: OpticalSetup, props: ParticleProps, r, omega) -> CavityOperators:
    """Effective detuning and damping matrices and the pump vector."""
    chi = susceptibility_lab(props, omega)
    fc, _ = cavity_mode(setup.cavity, setup.tweezer.wavenumber, r)
    ft, _ = tweezer_mode(setup.tweezer, r)
    return operators_from_chi(setup, chi, fc, ft)


def stationary_field(setup: OpticalSetup, props: ParticleProps, r, omega) -> np.ndarray:
    """Stationary amplitudes b_s = -A^{-1} eta at fixed particle configuration."""
    ops = cavity_operators(setup, props, r, omega)
    return -_inv2(ops.a_matrix) @ ops.eta


def stationary_field_derivatives(setup: OpticalSetup, props: ParticleProps, r, omega):
    """b_s and its derivatives along the six generalized coordinates.

    Uses the closed form d_q b_s = -A^{-1} (d_q A b_s + d_q eta); returns
    (ops, b_s, grad) with grad of shape (6, 2).
    """
    from .particle import rotation_and_derivatives

    rot, drot = rotation_and_derivatives(np.asarray(omega, dtype=float))
    chi0 = props.chi_body
    chi = (rot * chi0) @ rot.T
    m = (drot * chi0) @ rot.T
    dchi = m + np.transpose(m, (0, 2, 1))

    k = setup.tweezer.wavenumber
    fc, grad_fc = cavity_mode(setup.cavity, k, r)
    ft, grad_ft = tweezer_mode(setup.tweezer, r)
    bas = setup.basis
    e_mat = bas.e_matrix
    u0 = setup.coupling_u0
    gsc = setup.gamma_sc
    fc2 = fc * fc

    chi_e = chi @ e_mat.T
    chi_jj = e_mat @ chi_e
    chi2_jj = chi_e.T @ chi_e
    delta_eff = setup.cavity.detuning * _EYE2 - u0 * fc2 * chi_jj
    kappa_eff = setup.cavity.kappa * _EYE2 + (0.5 * gsc * fc2) * chi2_jj
    a_mat = 1j * delta_eff - kappa_eff
    chi_et = chi @ bas.e_t
    w_et = 1j * u0 * chi_et + 0.5 * gsc * (chi @ chi_et)
    e_w = e_mat @ w_et
    eta = (-setup.epsilon_t * fc * ft) * e_w

    a_inv = _inv2(a_mat)
    b_s = -a_inv @ eta

    grad = np.empty((6, 2), dtype=complex)
    # translations: dA = M * d(fc^2), deta = eta * d(fc ft)/(fc ft)
    m_bs = (-1j * u0 * chi_jj - 0.5 * gsc * chi2_jj) @ b_s    # (2,)
    dfc2 = 2.0 * fc * grad_fc                                  # (3,)
    dprod = grad_fc * ft + fc * grad_ft                        # (3,) complex
    rhs_t = m_bs[None, :] * dfc2[:, None] - setup.epsilon_t * (e_w[None, :] * dprod[:, None])
    grad[:3] = -(a_inv @ rhs_t.T).T
    # orientations: dA and deta through the susceptibility derivatives
    dchi2 = dchi @ chi + chi @ dchi
    e_dchi_e = e_mat[None, :, :] @ (dchi @ e_mat.T)            # (3, 2, 2)
    e_dchi2_e = e_mat[None, :, :] @ (dchi2 @ e_mat.T)
    da_rot = (-1j * u0 * fc2) * e_dchi_e - (0.5 * gsc * fc2) * e_dchi2_e
    dw = 1j * u0 * (dchi @ bas.e_t) + 0.5 * gsc * (dchi2 @ bas.e_t)   # (3, 3)
    deta_rot = (-setup.epsilon_t * fc * ft) * (dw @ e_mat.T)          # (3, 2)
    rhs_r = (da_rot @ b_s) + deta_rot
    grad[3:] = -(a_inv @ rhs_r.T).T

    ops = CavityOperators(delta_eff, kappa_eff, a_mat, eta)
    return ops, b_s, grad


@dataclass(frozen=True)
class QuasiStaticField:
    """Stationary field plus the velocity-linear retardation correction."""

    b_stationary: np.ndarray
    correction: np.ndarray

    @property
    def b(self) -> np.ndarray:
        return self.b_stationary + self.correction


def generalized_velocities(props: ParticleProps, omega, p, p_omega) -> np.ndarray:
    """dq/dt = dH_0/dp for all six coordinates."""
    qdot = np.empty(6)
    qdot[:3] = np.asarray(p, dtype=float) / props.mass
    qdot[3:] = euler_rates_from_momenta(props, omega, p_omega)
    return qdot


def quasi_static_field(setup: OpticalSetup, props: ParticleProps, r, omega, p, p_omega) -> QuasiStaticField:
    """Field b_s + A^{-1} sum_q qdot d_q b_s following the mechanics."""
    ops, b_s, grad = stationary_field_derivatives(setup, props, r, omega)
    qdot = generalized_velocities(props, omega, p, p_omega)
    drift = qdot @ grad
    return QuasiStaticField(b_s, _inv2(ops.a_matrix) @ drift)


def friction_forces(setup: OpticalSetup, props: ParticleProps, r, omega, p, p_omega,
                    include_scattering: bool = True) -> np.ndarray:
    """Velocity-linear friction force of the retarded cavity field, per coordinate.

    First contribution: -2 hbar Im[db* . A d_q b_s] with db the quasi-static
    deviation from b_s.  The remaining terms carry gamma_sc and are kept
    optional since they are suppressed by V k^3 chi.
    """
    ops, b_s, grad = stationary_field_derivatives(setup, props, r, omega)
    qdot = generalized_velocities(props, omega, p, p_omega)
    db = _inv2(ops.a_matrix) @ (qdot @ grad)

    out = np.empty(6)
    a_grad = grad @ ops.a_matrix.T       # rows: (A d_q b_s) for each q
    for q in range(6):
        out[q] = -2.0 * HBAR * np.imag(np.vdot(db, a_grad[q]))

    if include_scattering and setup.gamma_sc != 0.0:
        chi = susceptibility_lab(props, omega)
        dchi = susceptibility_lab_derivatives(props, omega)
        k = setup.tweezer.wavenumber
        fc, grad_fc = cavity_mode(setup.cavity, k, r)
        u_s, jac_us = mode_field(setup, r, b_s)
        bas = setup.basis
        chi_v = np.vstack([chi @ bas.e_1, chi @ bas.e_2]) * fc   # (2, 3)
        for q in range(6):
            if q < 3:
                d_chi_us = chi @ jac_us[q]
            else:
                d_chi_us = dchi[q - 3] @ u_s
            # bilinear in the field vectors: (chi v_j) . d_q(chi u_s)
            s = np.dot(np.conj(db), chi_v @ d_chi_us)
            out[q] += 2.0 * HBAR * setup.gamma_sc * np.imag(s)
    return out


def contraction_rate(setup: OpticalSetup, props: ParticleProps, r, omega) -> float:
    """Total phase-space contraction rate of the quasi-static flow.

    Gamma_c = 2 hbar Im sum_{qq'jj'} (d_q b_sj)* [d^2 H_0/dp_q dp_q']
    B_jj' d_q' b_sj' with B = (A^{-1})^dagger A.  Depends on position and
    orientation only; positive for sufficiently red detuning.
    """
    ops, _, grad = stationary_field_derivatives(setup, props, r, omega)
    a_inv = _inv2(ops.a_matrix)
    b_mat = a_inv.conj().T @ ops.a_matrix
    hess = np.zeros((6, 6))
    hess[:3, :3] = np.eye(3) / props.mass
    hess[3:, 3:] = np.linalg.inv(inertia_matrix(props, omega))
    c_mat = grad.conj().T @ hess @ grad   # (2, 2)
    return 2.0 * HBAR * float(np.imag(np.sum(c_mat * b_mat)))


def detuning_eigenvalues(setup: OpticalSetup, props: ParticleProps, r, omega) -> tuple[float, float]:
    """Both eigenvalue branches of the effective detuning matrix (closed form)."""
    chi = susceptibility_lab(props, omega)
    fc, _ = cavity_mode(setup.cavity, setup.tweezer.wavenumber, r)
    bas = setup.basis
    c11 = bas.e_1 @ chi @ bas.e_1
    c22 = bas.e_2 @ chi @ bas.e_2
    c12 = bas.e_1 @ chi @ bas.e_2
    mean = 0.5 * (c11 + c22)
    disc = np.sqrt(0.25 * (c11 - c22) ** 2 + c12**2)
    d = setup.cavity.detuning
    u0fc2 = setup.coupling_u0 * fc**2
    return (d - u0fc2 * (mean + disc), d - u0fc2 * (mean - disc))


def stability_predicate(setup: OpticalSetup, props: ParticleProps) -> bool:
    """True iff Delta < U_0 (chi_c + chi_b): all detuning eigenvalues negative."""
    _, chi_b, chi_c = props.susceptibility
    return setup.cavity.detuning < setup.coupling_u0 * (chi_c + chi_b)

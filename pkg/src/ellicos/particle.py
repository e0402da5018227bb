"""Ellipsoidal particle geometry, material response, and rigid-rotor kinematics.

The particle is a homogeneous dielectric ellipsoid with principal diameters
l_a <= l_b <= l_c.  Its optical response is the anisotropic susceptibility
tensor chi, diagonal in the body frame with eigenvalues fixed by the
depolarization factors of the shape.  Orientations are parametrized by
z-y'-z'' Euler angles (alpha, beta, gamma); the chart is singular at
sin(beta) = 0, which callers of the momentum maps must avoid.

All quantities are SI.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .constants import HBAR

# Relative difference below which two diameters are treated as exactly equal,
# so quadrature noise cannot flip the ordering of the depolarization factors.
DEGENERATE_RTOL = 1e-12

# |sin(beta)| below this is treated as a singular orientation.
SIN_BETA_MIN = 1e-6


class InvalidParticleError(ValueError):
    """Raised for non-physical particle parameters."""


class SingularOrientationError(ValueError):
    """Raised when an operation is evaluated too close to sin(beta) = 0."""


@dataclass(frozen=True)
class ParticleSpec:
    """Geometry and material of an ellipsoidal particle.

    diameters: principal diameters (l_a, l_b, l_c) in m, ascending order
    permittivity: relative permittivity epsilon > 1
    density: mass density in kg/m^3
    """

    diameters: tuple[float, float, float]
    permittivity: float
    density: float

    def __post_init__(self):
        la, lb, lc = self.diameters
        if not (la > 0 and lb > 0 and lc > 0):
            raise InvalidParticleError(f"diameters must be positive, got {self.diameters}")
        if not (la <= lb * (1 + DEGENERATE_RTOL) and lb <= lc * (1 + DEGENERATE_RTOL)):
            raise InvalidParticleError(
                f"diameters must be ascending (l_a <= l_b <= l_c), got {self.diameters}"
            )
        if not self.permittivity > 1:
            raise InvalidParticleError(f"permittivity must exceed 1, got {self.permittivity}")
        if not self.density > 0:
            raise InvalidParticleError(f"density must be positive, got {self.density}")


@dataclass(frozen=True)
class ParticleProps:
    """Derived particle properties.

    volume: m^3
    mass: kg
    inertia: (I_a, I_b, I_c) in kg m^2
    depolarization: (N_a, N_b, N_c), dimensionless, sums to 1
    susceptibility: body-frame eigenvalues (chi_a, chi_b, chi_c)
    """

    volume: float
    mass: float
    inertia: tuple[float, float, float]
    depolarization: tuple[float, float, float]
    susceptibility: tuple[float, float, float]

    @property
    def inertia_array(self) -> np.ndarray:
        return np.asarray(self.inertia)

    @property
    def chi_body(self) -> np.ndarray:
        return np.asarray(self.susceptibility)


def _snap_degenerate(diameters) -> np.ndarray:
    """Replace nearly equal diameters by their mean (stable N ordering)."""
    d = np.asarray(diameters, dtype=float).copy()
    for i, j in ((0, 1), (1, 2)):
        if abs(d[i] - d[j]) <= DEGENERATE_RTOL * max(d[i], d[j]):
            m = 0.5 * (d[i] + d[j])
            d[i] = d[j] = m
    if abs(d[0] - d[2]) <= DEGENERATE_RTOL * d[2]:
        d[:] = d.mean()
    return d


def depolarization_factors(spec: ParticleSpec) -> tuple[float, float, float]:
    """Shape integrals N_l relating ellipsoid geometry to its anisotropy.

    N_l = (l_a l_b l_c / 2) * int_0^inf ds / [(s + l_l^2) sqrt(prod_i (s + l_i^2))]

    The infinite tail (~s^(-5/2)) is removed by substituting s = l_c^2 tan^2(t),
    after which adaptive quadrature converges quickly.  Each N_l lies in (0, 1),
    they sum to one, and a smaller diameter gives a larger factor.
    """
    d = _snap_degenerate(spec.diameters)
    la2, lb2, lc2 = d**2
    prefactor = 0.5 * d[0] * d[1] * d[2]

    def factor(ll2: float) -> float:
        def integrand(t: float) -> float:
            tan = np.tan(t)
            s = lc2 * tan**2
            jac = 2.0 * lc2 * tan / np.cos(t) ** 2
            root = np.sqrt((s + la2) * (s + lb2) * (s + lc2))
            return jac / ((s + ll2) * root)

        val, _ = quad(integrand, 0.0, np.pi / 2, epsabs=0.0, epsrel=1e-10, limit=200)
        return prefactor * val

    na, nb, nc = factor(la2), factor(lb2), factor(lc2)
    return (na, nb, nc)


def susceptibility_body(spec: ParticleSpec) -> tuple[float, float, float]:
    """Body-frame susceptibility eigenvalues chi_l = (eps-1)/(1 + (eps-1) N_l)."""
    eps = spec.permittivity
    n = depolarization_factors(spec)
    return tuple((eps - 1.0) / (1.0 + (eps - 1.0) * nl) for nl in n)


def particle_properties(spec: ParticleSpec) -> ParticleProps:
    """Assemble volume, mass, inertia, depolarization, and susceptibility."""
    la, lb, lc = _snap_degenerate(spec.diameters)
    volume = np.pi * la * lb * lc / 6.0
    mass = spec.density * volume
    inertia = (
        mass * (lb**2 + lc**2) / 20.0,
        mass * (la**2 + lc**2) / 20.0,
        mass * (la**2 + lb**2) / 20.0,
    )
    return ParticleProps(
        volume=volume,
        mass=mass,
        inertia=inertia,
        depolarization=depolarization_factors(spec),
        susceptibility=susceptibility_body(spec),
    )


# ---------------------------------------------------------------------------
# Euler-angle kinematics (z-y'-z'' convention)
# ---------------------------------------------------------------------------


def rotation_matrix(omega) -> np.ndarray:
    """Rotation matrix R(alpha, beta, gamma) = Rz(alpha) Ry(beta) Rz(gamma).

    Maps body-frame vectors to the lab frame; the body axes are the columns,
    n_k = R e_k.
    """
    a, b, g = omega
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cg, sg = np.cos(g), np.sin(g)
    return np.array(
        [
            [ca * cb * cg - sa * sg, -ca * cb * sg - sa * cg, ca * sb],
            [sa * cb * cg + ca * sg, -sa * cb * sg + ca * cg, sa * sb],
            [-sb * cg, sb * sg, cb],
        ]
    )


def rotation_and_derivatives(omega) -> tuple[np.ndarray, np.ndarray]:
    """R(Omega) together with its three partial derivatives (fused trig)."""
    a, b, g = omega
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cg, sg = np.cos(g), np.sin(g)
    rz_a = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    ry_b = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
    rz_g = np.array([[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]])
    dz_a = np.array([[-sa, -ca, 0.0], [ca, -sa, 0.0], [0.0, 0.0, 0.0]])
    dy_b = np.array([[-sb, 0.0, cb], [0.0, 0.0, 0.0], [-cb, 0.0, -sb]])
    dz_g = np.array([[-sg, -cg, 0.0], [cg, -sg, 0.0], [0.0, 0.0, 0.0]])
    yb_zg = ry_b @ rz_g
    r = rz_a @ yb_zg
    dr = np.empty((3, 3, 3))
    dr[0] = dz_a @ yb_zg
    dr[1] = rz_a @ (dy_b @ rz_g)
    dr[2] = (rz_a @ ry_b) @ dz_g
    return r, dr


def rotation_matrix_derivatives(omega) -> np.ndarray:
    """Partial derivatives (dR/dalpha, dR/dbeta, dR/dgamma), shape (3, 3, 3)."""
    a, b, g = omega
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cg, sg = np.cos(g), np.sin(g)
    rz_a = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    ry_b = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
    rz_g = np.array([[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]])
    dz_a = np.array([[-sa, -ca, 0.0], [ca, -sa, 0.0], [0.0, 0.0, 0.0]])
    dy_b = np.array([[-sb, 0.0, cb], [0.0, 0.0, 0.0], [-cb, 0.0, -sb]])
    dz_g = np.array([[-sg, -cg, 0.0], [cg, -sg, 0.0], [0.0, 0.0, 0.0]])
    return np.stack([dz_a @ ry_b @ rz_g, rz_a @ dy_b @ rz_g, rz_a @ ry_b @ dz_g])


def susceptibility_lab(props: ParticleProps, omega) -> np.ndarray:
    """Lab-frame susceptibility tensor chi(Omega) = R chi_0 R^T."""
    r = rotation_matrix(omega)
    return (r * props.chi_body) @ r.T


def susceptibility_lab_derivatives(props: ParticleProps, omega) -> np.ndarray:
    """(dchi/dalpha, dchi/dbeta, dchi/dgamma), each 3x3 symmetric."""
    r = rotation_matrix(omega)
    dr = rotation_matrix_derivatives(omega)
    chi0 = props.chi_body
    out = np.empty((3, 3, 3))
    for i in range(3):
        m = (dr[i] * chi0) @ r.T
        out[i] = m + m.T
    return out


def inertia_matrix(props: ParticleProps, omega) -> np.ndarray:
    """Mass matrix M(Omega) of the Euler-angle rates, p_Omega = M(Omega) rates.

    Symmetric and positive definite away from sin(beta) = 0.
    """
    ia, ib, ic = props.inertia
    _, b, g = omega
    sb, cb = np.sin(b), np.cos(b)
    sg, cg = np.sin(g), np.cos(g)
    m_ab = (ib - ia) * sb * sg * cg
    return np.array(
        [
            [sb**2 * (ia * cg**2 + ib * sg**2) + ic * cb**2, m_ab, ic * cb],
            [m_ab, ia * sg**2 + ib * cg**2, 0.0],
            [ic * cb, 0.0, ic],
        ]
    )


def momenta_from_euler_rates(props: ParticleProps, omega, rates) -> np.ndarray:
    """Canonical angular momenta (p_alpha, p_beta, p_gamma) from Euler rates."""
    return inertia_matrix(props, omega) @ np.asarray(rates, dtype=float)


def euler_rates_from_momenta(props: ParticleProps, omega, p_omega) -> np.ndarray:
    """Invert the momentum map; singular at sin(beta) = 0."""
    _require_regular(omega)
    return np.linalg.solve(inertia_matrix(props, omega), np.asarray(p_omega, dtype=float))


def _require_regular(omega):
    if abs(np.sin(omega[1])) < SIN_BETA_MIN:
        raise SingularOrientationError(
            f"orientation too close to the chart singularity: sin(beta) = {np.sin(omega[1]):.2e}"
        )


def _body_angular_momentum(props: ParticleProps, omega, p_omega):
    """Angular momentum components (j_1, j_2, j_3) along the body axes."""
    _, b, g = omega
    pa, pb, pg = p_omega
    sb = np.sin(b)
    sg, cg = np.sin(g), np.cos(g)
    u = (pa - pg * np.cos(b)) / sb
    j1 = cg * u - sg * pb
    j2 = sg * u + cg * pb
    return j1, j2, pg


def kinetic_energy(props: ParticleProps, omega, p_omega, p=None) -> float:
    """Free Hamiltonian: rotational kinetic energy plus |p|^2 / 2m."""
    _require_regular(omega)
    ia, ib, ic = props.inertia
    j1, j2, j3 = _body_angular_momentum(props, omega, p_omega)
    h = j1**2 / (2 * ia) + j2**2 / (2 * ib) + j3**2 / (2 * ic)
    if p is not None:
        h += np.dot(p, p) / (2 * props.mass)
    return h


def kinetic_energy_gradients(props: ParticleProps, omega, p_omega):
    """Orientation and momentum gradients of the rotational kinetic energy.

    Returns (dH/dOmega, dH/dp_Omega); the alpha component of the first is
    exactly zero.  Used by the dynamics module for Hamilton's equations.
    """
    _require_regular(omega)
    ia, ib, ic = props.inertia
    _, b, g = omega
    pa, pb, pg = p_omega
    sb, cb = np.sin(b), np.cos(b)
    sg, cg = np.sin(g), np.cos(g)
    u = (pa - pg * cb) / sb
    j1 = cg * u - sg * pb
    j2 = sg * u + cg * pb
    du_db = pg - u * cb / sb
    dh_dbeta = (j1 * cg / ia + j2 * sg / ib) * du_db
    dh_dgamma = j1 * j2 * (1.0 / ib - 1.0 / ia)
    grad_omega = np.array([0.0, dh_dbeta, dh_dgamma])
    grad_p = np.array(
        [
            (j1 * cg / ia + j2 * sg / ib) / sb,
            -j1 * sg / ia + j2 * cg / ib,
            -(j1 * cg / ia + j2 * sg / ib) * cb / sb + pg / ic,
        ]
    )
    return grad_omega, grad_p


def angular_momentum_lab(props: ParticleProps, omega, p_omega) -> np.ndarray:
    """Lab-frame angular momentum vector J reconstructed from (Omega, p_Omega).

    Uses p_alpha = J.e_z, p_beta = J.e_xi, p_gamma = J.n_3, with e_xi the
    nodal line of the beta rotation.
    """
    a = omega[0]
    e_z = np.array([0.0, 0.0, 1.0])
    e_xi = np.array([-np.sin(a), np.cos(a), 0.0])
    n3 = rotation_matrix(omega)[:, 2]
    d = np.vstack([e_z, e_xi, n3])
    return np.linalg.solve(d, np.asarray(p_omega, dtype=float))


def quantum_potential(props: ParticleProps, omega) -> float:
    """Curvature correction to the quantized rotor Hamiltonian.

    Diagnostic only; it never enters the classical dynamics.
    """
    _require_regular(omega)
    ia, ib, _ = props.inertia
    _, b, g = omega
    s2 = np.sin(b) ** 2
    term1 = -(HBAR**2 / 16.0) * (1.0 / ia + 1.0 / ib) * (1.0 / s2 + 1.0)
    term2 = (HBAR**2 / 16.0) * (1.0 / ia - 1.0 / ib) * (5.0 / s2 - 3.0) * np.cos(2 * g)
    return term1 + term2


def depolarization_factors_carlson(spec: ParticleSpec) -> tuple[float, float, float]:
    """Closed-form depolarization factors via Carlson's R_D elliptic integral.

    Independent cross-check of the quadrature route:
    N_l = (l_a l_b l_c / 3) R_D(l_i^2, l_j^2, l_l^2) with {i, j} the other axes.
    """
    from scipy.special import elliprd

    d = _snap_degenerate(spec.diameters)
    la2, lb2, lc2 = d**2
    pref = d[0] * d[1] * d[2] / 3.0
    return (
        pref * elliprd(lb2, lc2, la2),
        pref * elliprd(lc2, la2, lb2),
        pref * elliprd(la2, lb2, lc2),
    )


def mass_matrix_condition_warning(props: ParticleProps, omega, threshold=1e8):
    """Warn when the Euler mass matrix is badly conditioned (near-singular beta)."""
    cond = np.linalg.cond(inertia_matrix(props, omega))
    if cond > threshold:
        warnings.warn(f"Euler mass matrix condition number {cond:.2e}", RuntimeWarning)
    return cond

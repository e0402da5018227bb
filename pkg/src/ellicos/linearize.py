"""Deep-trapping analysis: equilibrium, harmonic expansion, heating, occupations.

Close to the trap minimum the six mechanical coordinates q = (x, y, z, alpha,
beta, gamma) behave as harmonic modes coupled among themselves and to the two
cavity quadratures.  All frequencies and couplings have closed forms in the
setup parameters and the reference cavity amplitude b_0; every one of them is
verifiable against a finite-difference Hessian of the optical potential,
which is what `finite_difference_hessian` provides.

The interaction splits into two independent blocks: cavity mode 1 talks to
{x, y, z, alpha} and mode 2 to {beta, gamma}.  Diagonalizing the mechanical
quadratic form yields normal modes, weak-coupling cooling/heating rates, and
steady-state occupations.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np

from .constants import HBAR, K_B
from .forces import COORDS, effective_masses, generalized_forces
from .optics import CavityConfig, OpticalSetup, TweezerConfig, mode_field
from .particle import ParticleProps, susceptibility_lab
from .cavity import cavity_operators, stationary_field

# Non-vanishing mechanical coupling pairs (all others are identically zero).
MECH_PAIRS = (("x", "y"), ("x", "z"), ("y", "z"), ("x", "alpha"),
              ("y", "alpha"), ("z", "alpha"), ("beta", "gamma"))

# Cavity block of each coordinate: mode 1 for (x, y, z, alpha), mode 2 for (beta, gamma).
BLOCK_OF = (0, 0, 0, 0, 1, 1)


class EquilibriumError(RuntimeError):
    """Newton search for the trap equilibrium failed to converge."""


class InstabilityError(RuntimeError):
    """A mechanical block has a non-positive-definite quadratic form."""


def tweezer_minimum(tweezer: TweezerConfig) -> np.ndarray:
    """Minimum of the bare tweezer potential: R = 0, Omega = (-zeta, pi/2, 0).

    The long axis aligns with the major polarization axis and the short axis
    with the propagation direction.  For psi at the edges of [0, pi/4] one
    libration is unconfined and a degenerate-minimum warning is emitted.
    """
    psi = tweezer.psi
    if psi < 1e-12 or psi > np.pi / 4 - 1e-12:
        warnings.warn(
            "ellipticity at the edge of [0, pi/4]: one librational direction is unconfined",
            RuntimeWarning,
        )
    return np.array([0.0, 0.0, 0.0, -tweezer.zeta, np.pi / 2, 0.0])


def optical_potential_value(setup: OpticalSetup, props: ParticleProps, q, b) -> float:
    """V_opt at generalized coordinates q = (R, Omega) and amplitudes b, in J."""
    u, _ = mode_field(setup, np.asarray(q[:3], dtype=float), b)
    chi = susceptibility_lab(props, np.asarray(q[3:], dtype=float))
    return HBAR * setup.coupling_u0 * np.real(np.vdot(u, chi @ u))


@dataclass(frozen=True)
class LinearizedSystem:
    """Harmonic description around the tweezer minimum.

    omega_sq may be negative for unconfined coordinates; those are flagged in
    `stable` and excluded from the normal-mode analysis.  g_mech[q, q'] are
    the mechanical couplings (rad/s), g_opt[q] the complex light-mechanical
    couplings to the block cavity mode.
    """

    setup: OpticalSetup
    props: ParticleProps
    q_tw: np.ndarray
    b0: complex
    b_tw: np.ndarray
    deltas: tuple[float, float]
    masses: np.ndarray
    omega_sq: np.ndarray
    stable: np.ndarray
    omega: np.ndarray
    q_zp: np.ndarray
    g_mech: np.ndarray
    g_opt: np.ndarray
    q_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None

    @property
    def block_index(self) -> np.ndarray:
        return np.asarray(BLOCK_OF)


def effective_mode_detunings(setup: OpticalSetup, props: ParticleProps) -> tuple[float, float]:
    """Diagonal of the effective detuning matrix at the tweezer minimum."""
    q_tw = tweezer_minimum(setup.tweezer)
    ops = cavity_operators(setup, props, q_tw[:3], q_tw[3:])
    return float(ops.delta_eff[0, 0]), float(ops.delta_eff[1, 1])


def reference_amplitude(setup: OpticalSetup, props: ParticleProps,
                        delta1: float | None = None) -> complex:
    """Mode-1 amplitude b_0 at the tweezer minimum (closed form, no gamma_sc).

    Equal to [b_s(q_tw)]_1 up to corrections of relative order V k^3 chi.
    """
    if delta1 is None:
        delta1, _ = effective_mode_detunings(setup, props)
    _, chi_b, chi_c = props.susceptibility
    tw, cav = setup.tweezer, setup.cavity
    th = cav.theta - tw.zeta
    bracket = chi_c * np.cos(th) * np.cos(tw.psi) - 1j * chi_b * np.sin(th) * np.sin(tw.psi)
    return (-1j * setup.coupling_u0 * setup.epsilon_t * np.cos(cav.phase) * bracket
            / (cav.kappa - 1j * delta1))


def harmonic_parameters(setup: OpticalSetup, props: ParticleProps) -> LinearizedSystem:
    """Closed-form trapping frequencies and couplings of the deep-trapping regime."""
    chi_a, chi_b, chi_c = props.susceptibility
    tw, cav = setup.tweezer, setup.cavity
    eps = setup.epsilon_t
    u0 = setup.coupling_u0
    k = tw.wavenumber
    zr = tw.rayleigh_range
    m = props.mass
    ia, ib, ic = props.inertia
    psi, phi = tw.psi, cav.phase
    th = cav.theta - tw.zeta
    cth, sth = np.cos(cav.theta), np.sin(cav.theta)
    cphi = np.cos(phi)

    delta1, delta2 = effective_mode_detunings(setup, props)
    b0 = reference_amplitude(setup, props, delta1)
    b0c = np.conj(b0)
    ab0sq = abs(b0) ** 2

    chi_eff = chi_c * np.cos(psi) ** 2 + chi_b * np.sin(psi) ** 2
    chi_rot = chi_c * np.cos(th) ** 2 + chi_b * np.sin(th) ** 2
    # recurring polarization brackets
    br1 = chi_c * np.cos(th) * np.cos(psi) - 1j * chi_b * np.sin(th) * np.sin(psi)
    br1p = chi_c * np.cos(th) * np.cos(psi) + 1j * chi_b * np.sin(th) * np.sin(psi)
    br2 = np.sin(th) * np.cos(psi) - 1j * np.cos(th) * np.sin(psi)
    br2p = np.sin(th) * np.cos(psi) + 1j * np.cos(th) * np.sin(psi)
    br3 = np.cos(th) * np.cos(psi) + 1j * np.sin(th) * np.sin(psi)

    v = np.empty(6)
    v[0] = (2 * eps**2 * chi_eff
            + eps * cphi * (k**2 * tw.waist_x**2 * sth**2 + 2) * np.real(b0c * br1)
            + ab0sq * k**2 * tw.waist_x**2 * np.cos(2 * phi) * sth**2 * chi_rot
            ) / (m * tw.waist_x**2)
    v[1] = (2 * eps**2 * chi_eff
            + eps * cphi * (k**2 * tw.waist_y**2 * cth**2 + 2) * np.real(b0c * br1)
            + ab0sq * k**2 * tw.waist_y**2 * np.cos(2 * phi) * cth**2 * chi_rot
            ) / (m * tw.waist_y**2)
    v[2] = (eps**2 * chi_eff
            + eps * cphi * (1 + (zr * k - 1) ** 2) * np.real(b0c * br1)
            ) / (m * zr**2)
    v[3] = (chi_c - chi_b) / ia * (
        eps**2 * np.cos(2 * psi)
        + 2 * eps * cphi * np.real(b0c * br3)
        + ab0sq * cphi**2 * np.cos(2 * th)
    )
    v[4] = (chi_c - chi_a) / ib * (
        eps**2 * np.cos(psi) ** 2
        + 2 * eps * cphi * np.cos(th) * np.cos(psi) * np.real(b0)
        + ab0sq * cphi**2 * np.cos(th) ** 2
    )
    v[5] = (chi_b - chi_a) / ic * (
        eps**2 * np.sin(psi) ** 2
        - 2 * eps * cphi * np.sin(th) * np.sin(psi) * np.imag(b0)
        + ab0sq * cphi**2 * np.sin(th) ** 2
    )

    masses = effective_masses(props)
    omega_sq = -2 * HBAR * u0 * v
    stable = omega_sq > 0
    omega = np.where(stable, np.sqrt(np.abs(omega_sq)), np.nan)
    q_zp = np.where(stable, np.sqrt(HBAR / (2 * masses * np.where(stable, omega, 1.0))), np.nan)

    # mechanical couplings: g_{qq'} = U0 zp zp' G_{qq'} with the Hessian-true
    # normalization (cross-checked against finite differences of V_opt)
    g_big = np.zeros((6, 6))
    g_big[0, 1] = k**2 * np.sin(2 * cav.theta) * (
        eps * cphi * np.real(b0c * br1)
        + ab0sq * np.cos(2 * phi) * chi_rot
    )
    gxz_core = -2.0 * k**2 * eps * (1 - 1 / (k * zr)) * np.sin(phi) * np.imag(b0c * br1)
    g_big[0, 2] = gxz_core * sth
    g_big[1, 2] = gxz_core * cth
    ga_core = -2.0 * k * (chi_c - chi_b) * np.sin(phi) * (
        eps * np.real(b0c * br2) + ab0sq * cphi * np.sin(2 * th)
    )
    g_big[0, 3] = ga_core * sth
    g_big[1, 3] = ga_core * cth
    g_big[2, 3] = -2.0 * k * eps * (chi_c - chi_b) * (1 - 1 / (k * zr)) * cphi * np.imag(b0c * br2)
    g_big[4, 5] = (chi_b - chi_a) * cphi * (
        2 * eps * np.real(b0c * br2) + ab0sq * cphi * np.sin(2 * th)
    )
    g_big = g_big + g_big.T

    zp_safe = np.where(stable, q_zp, 0.0)
    g_mech = u0 * np.outer(zp_safe, zp_safe) * g_big

    # light-mechanical couplings G_{jq} (g = U0 zp G)
    g_1x_core = k * np.sin(phi) * (eps * br1p + 2 * b0c * cphi * chi_rot)
    g_opt_big = np.array(
        [
            g_1x_core * sth,
            g_1x_core * cth,
            1j * k * eps * (1 - 1 / (k * zr)) * cphi * br1p,
            (chi_c - chi_b) * cphi * (eps * br2p + b0c * cphi * np.sin(2 * th)),
            (chi_c - chi_a) * cphi * (eps * np.cos(psi) + b0c * np.cos(th) * cphi),
            (chi_b - chi_a) * cphi * (1j * eps * np.sin(psi) + b0c * np.sin(th) * cphi),
        ],
        dtype=complex,
    )
    g_opt = u0 * zp_safe * g_opt_big

    return LinearizedSystem(
        setup=setup,
        props=props,
        q_tw=tweezer_minimum(tw),
        b0=b0,
        b_tw=np.array([b0, 0.0], dtype=complex),
        deltas=(delta1, delta2),
        masses=masses,
        omega_sq=omega_sq,
        stable=stable,
        omega=omega,
        q_zp=q_zp,
        g_mech=g_mech,
        g_opt=g_opt,
    )


# ---------------------------------------------------------------------------
# Finite-difference oracle
# ---------------------------------------------------------------------------


def _coordinate_scales(setup: OpticalSetup) -> np.ndarray:
    tw = setup.tweezer
    return np.array([tw.waist_x, tw.waist_y, tw.rayleigh_range, 1.0, 1.0, 1.0])


def finite_difference_hessian(setup: OpticalSetup, props: ParticleProps, q0, b_ref,
                              rel_step: float = 1e-4):
    """Richardson-extrapolated central FD Hessian of V_opt at (q0, b_ref).

    Returns (hess_q, mixed_b, b_diag): the 6x6 coordinate Hessian in J, the
    complex Wirtinger mixed derivatives d_{b_j} d_q V (2, 6), and the
    d_{b_j*} d_{b_j} V diagonal (2,).  Steps are rel_step times the natural
    variation scale of each coordinate, halved once for extrapolation.
    """
    q0 = np.asarray(q0, dtype=float)
    b_ref = np.asarray(b_ref, dtype=complex)
    scales = _coordinate_scales(setup) * rel_step
    # V_opt is exactly quadratic in b, so large b steps carry no truncation
    # error and beat the roundoff of the epsilon^2-dominated potential.
    b_scale = max(1.0, 0.05 * np.abs(b_ref).max())

    def val(dq=None, db=None):
        q = q0 if dq is None else q0 + dq
        b = b_ref if db is None else b_ref + db
        return optical_potential_value(setup, props, q, b)

    v0 = val()

    def second_diag(i, h):
        dq = np.zeros(6)
        dq[i] = h
        return (val(dq) - 2 * v0 + val(-dq)) / h**2

    def second_cross(i, j, hi, hj):
        dqi = np.zeros(6); dqi[i] = hi
        dqj = np.zeros(6); dqj[j] = hj
        return (val(dqi + dqj) - val(dqi - dqj) - val(-dqi + dqj) + val(-dqi - dqj)) / (4 * hi * hj)

    def richardson(f):
        # central differences lead at O(h^2); halving the step and combining
        # leaves O(h^4)
        return (4.0 * f(0.5) - f(1.0)) / 3.0

    hess = np.empty((6, 6))
    for i in range(6):
        hess[i, i] = richardson(lambda s, i=i: second_diag(i, s * scales[i]))
        for j in range(i + 1, 6):
            hess[i, j] = hess[j, i] = richardson(
                lambda s, i=i, j=j: second_cross(i, j, s * scales[i], s * scales[j])
            )

    def cross_qb(i, part, hq, hb):
        dq = np.zeros(6); dq[i] = hq
        db = np.zeros(2, dtype=complex)
        db[part[0]] = hb if part[1] == "re" else 1j * hb
        return (val(dq, db) - val(dq, -db) - val(-dq, db) + val(-dq, -db)) / (4 * hq * hb)

    mixed = np.empty((2, 6), dtype=complex)
    for j in range(2):
        for i in range(6):
            d_re = richardson(lambda s, i=i, j=j: cross_qb(i, (j, "re"), s * scales[i], s * b_scale))
            d_im = richardson(lambda s, i=i, j=j: cross_qb(i, (j, "im"), s * scales[i], s * b_scale))
            mixed[j, i] = 0.5 * (d_re - 1j * d_im)

    def second_b(j, part, h):
        db = np.zeros(2, dtype=complex)
        db[j] = h if part == "re" else 1j * h
        return (val(None, db) - 2 * v0 + val(None, -db)) / h**2

    b_diag = np.empty(2)
    for j in range(2):
        d_re = richardson(lambda s, j=j: second_b(j, "re", s * b_scale))
        d_im = richardson(lambda s, j=j: second_b(j, "im", s * b_scale))
        b_diag[j] = 0.25 * (d_re + d_im)
    return hess, mixed, b_diag


def gradient_hessian(setup: OpticalSetup, props: ParticleProps, q0, b_ref,
                     rel_step: float = 1e-3):
    """Central-FD Hessian of V_opt from the analytic generalized forces.

    Differencing the force (zero at the expansion point) avoids the roundoff
    of the large potential offset; Richardson extrapolation removes the h^2
    truncation.  The force itself is validated against direct potential
    differences elsewhere.  Returns (hess_q (6, 6), mixed_b (2, 6) complex).
    """
    q0 = np.asarray(q0, dtype=float)
    b_ref = np.asarray(b_ref, dtype=complex)
    scales = _coordinate_scales(setup) * rel_step

    def force(q, b):
        f, _ = generalized_forces(setup, props, q[:3], q[3:], b)
        return f

    def column(j, h):
        dq = np.zeros(6)
        dq[j] = h
        return -(force(q0 + dq, b_ref) - force(q0 - dq, b_ref)) / (2 * h)

    raw = np.empty((6, 6))
    for j in range(6):
        raw[:, j] = (4.0 * column(j, 0.5 * scales[j]) - column(j, scales[j])) / 3.0
    # F_z forms by cancellation of k-enhanced phase terms, so rows built from
    # F_z are the noisiest; take z-mixed entries from the z column instead.
    hess = 0.5 * (raw + raw.T)
    for i in range(6):
        if i != 2:
            hess[2, i] = hess[i, 2] = raw[i, 2]

    hb = max(1.0, 0.05 * np.abs(b_ref).max())
    mixed = np.empty((2, 6), dtype=complex)
    for j in range(2):
        db = np.zeros(2, dtype=complex)
        db[j] = hb
        d_re = -(force(q0, b_ref + db) - force(q0, b_ref - db)) / (2 * hb)
        db[j] = 1j * hb
        d_im = -(force(q0, b_ref + db) - force(q0, b_ref - db)) / (2 * hb)
        mixed[j] = 0.5 * (d_re - 1j * d_im)
    return hess, mixed


def verify_closed_forms(setup: OpticalSetup, props: ParticleProps, rel_step: float = 1e-4,
                        method: str = "potential"):
    """Compare every closed-form harmonic parameter with the FD oracle.

    method "potential" differences V_opt values directly; "gradient"
    differences the analytic forces (far lower noise floor for the small
    cavity-induced couplings).  Returns a dict of relative errors: omega_sq
    (6,), g_mech for the listed pairs, g_opt (6,), deltas (2,), plus the
    largest stray coupling among the pairs declared to vanish (normalized to
    the largest coupling).
    """
    lin = harmonic_parameters(setup, props)
    if method == "gradient":
        _, _, b_diag = finite_difference_hessian(setup, props, lin.q_tw, lin.b_tw, 1e-2)
        hess, mixed = gradient_hessian(setup, props, lin.q_tw, lin.b_tw, rel_step=1e-3)
        # the vanishing-pair readings are pure FD noise; a slightly larger
        # step sits at the bottom of its noise-vs-truncation trade-off
        hess_stray, _ = gradient_hessian(setup, props, lin.q_tw, lin.b_tw, rel_step=3e-3)
    else:
        hess, mixed, b_diag = finite_difference_hessian(setup, props, lin.q_tw, lin.b_tw, rel_step)
        hess_stray = hess

    omega_sq_fd = np.diag(hess) / lin.masses
    err_w = np.abs(lin.omega_sq - omega_sq_fd) / np.abs(omega_sq_fd)

    idx = {c: i for i, c in enumerate(COORDS)}
    pair_idx = [(idx[a], idx[b]) for a, b in MECH_PAIRS]
    g_fd = np.zeros((6, 6))
    for i in range(6):
        for j in range(6):
            if i != j:
                g_fd[i, j] = -lin.q_zp[i] * lin.q_zp[j] * hess[i, j] / HBAR
    # entries far below the class scale sit at the FD noise floor, where a
    # pure relative comparison is meaningless; floor the denominator there
    gscale = max(np.nanmax(np.abs(g_fd)), np.nanmax(np.abs(lin.g_mech)))
    err_g = {}
    for (i, j) in pair_idx:
        denom = max(abs(g_fd[i, j]), 1e-3 * gscale)
        err_g[(COORDS[i], COORDS[j])] = abs(lin.g_mech[i, j] - g_fd[i, j]) / denom
    g_fd_stray = np.zeros((6, 6))
    for i in range(6):
        for j in range(6):
            if i != j:
                g_fd_stray[i, j] = -lin.q_zp[i] * lin.q_zp[j] * hess_stray[i, j] / HBAR
    stray = 0.0
    for i in range(6):
        for j in range(i + 1, 6):
            if (i, j) not in pair_idx and (j, i) not in pair_idx:
                stray = max(stray, abs(g_fd_stray[i, j]) / gscale)

    g_opt_fd = np.array([-lin.q_zp[i] * mixed[BLOCK_OF[i], i] / HBAR for i in range(6)])
    scale_opt = np.abs(g_opt_fd).max()
    err_gopt = np.abs(lin.g_opt - g_opt_fd) / np.maximum(np.abs(g_opt_fd), 1e-3 * scale_opt)

    deltas_fd = setup.cavity.detuning - b_diag / HBAR
    err_d = np.abs(np.asarray(lin.deltas) - deltas_fd) / np.abs(deltas_fd)

    return {
        "omega_sq": err_w,
        "g_mech": err_g,
        "g_opt": err_gopt,
        "deltas": err_d,
        "stray_coupling": stray,
        "lin": lin,
        "fd": (hess, mixed, b_diag),
    }


# ---------------------------------------------------------------------------
# Equilibrium
# ---------------------------------------------------------------------------


def conservative_force_at(setup: OpticalSetup, props: ParticleProps, q) -> np.ndarray:
    """Generalized conservative force with the cavity at its stationary field."""
    b_s = stationary_field(setup, props, q[:3], q[3:])
    f_cons, _ = generalized_forces(setup, props, q[:3], q[3:], b_s)
    return f_cons

def solve_equilibrium(setup: OpticalSetup, props: ParticleProps,
                      max_iter: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Newton search for the self-consistent conservative equilibrium.

    Solves F_cons(q, b_s(q)) = 0 starting from the tweezer minimum; the
    residual must drop 12 orders of magnitude below its starting value (or be
    absolutely negligible, as at a cavity node where b_0 = 0).
    """
    q = tweezer_minimum(setup.tweezer).copy()
    f = conservative_force_at(setup, props, q)
    scales = _coordinate_scales(setup)
    f0 = np.linalg.norm(f)
    if f0 == 0.0:
        return q, stationary_field(setup, props, q[:3], q[3:])
    tol = 1e-12 * f0
    for _ in range(max_iter):
        if np.linalg.norm(f) <= tol:
            break
        jac = np.empty((6, 6))
        for i in range(6):
            h = 1e-7 * scales[i]
            dq = np.zeros(6)
            dq[i] = h
            jac[:, i] = (conservative_force_at(setup, props, q + dq)
                         - conservative_force_at(setup, props, q - dq)) / (2 * h)
        q = q - np.linalg.solve(jac, f)
        f = conservative_force_at(setup, props, q)
    else:
        raise EquilibriumError(
            f"equilibrium Newton did not converge in {max_iter} iterations "
            f"(|F| = {np.linalg.norm(f):.3e}, target {tol:.3e})"
        )
    return q, stationary_field(setup, props, q[:3], q[3:])


def with_equilibrium(lin: LinearizedSystem) -> LinearizedSystem:
    """Return a copy of the linearized system with (q_eq, b_eq) solved."""
    q_eq, b_eq = solve_equilibrium(lin.setup, lin.props)
    return dataclasses.replace(lin, q_eq=q_eq, b_eq=b_eq)


# ---------------------------------------------------------------------------
# Heating rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GasConfig:
    """Residual gas: pressure in Pa, temperature in K, molecule mass in kg."""

    pressure: float
    temperature: float
    molecule_mass: float

    def __post_init__(self):
        if self.pressure < 0 or self.temperature <= 0 or self.molecule_mass <= 0:
            raise ValueError("gas pressure must be >= 0, temperature and mass positive")


@dataclass(frozen=True)
class HeatingRates:
    """Per-coordinate heating rates in quanta/s (nan for unstable coordinates)."""

    recoil: np.ndarray
    gas: np.ndarray
    gas_friction: float

    @property
    def total(self) -> np.ndarray:
        return self.recoil + self.gas


def recoil_rates(lin: LinearizedSystem) -> np.ndarray:
    """Photon-recoil heating rates for all six coordinates."""
    setup, props = lin.setup, lin.props
    chi_a, chi_b, chi_c = props.susceptibility
    psi = setup.tweezer.psi
    k = setup.tweezer.wavenumber
    zr = setup.tweezer.rayleigh_range
    pref = setup.gamma_sc * setup.epsilon_t**2
    u_ax = 5.0 * (1 - 1 / (k * zr)) ** 2
    cc, ss = np.cos(psi) ** 2, np.sin(psi) ** 2
    mix = chi_c**2 * cc + chi_b**2 * ss

    xi = np.empty(6)
    zp2 = lin.q_zp**2
    xi[0] = pref / 5 * k**2 * zp2[0] * (2 * mix - chi_c**2 * cc)
    xi[1] = pref / 5 * k**2 * zp2[1] * (2 * mix - chi_b**2 * ss)
    xi[2] = pref / 5 * k**2 * zp2[2] * mix * (2 + u_ax)
    dchi = (abs(chi_b - chi_c), abs(chi_c - chi_a), abs(chi_a - chi_b))
    xi[3] = pref * zp2[3] * dchi[0] ** 2
    xi[4] = pref * zp2[4] * dchi[1] ** 2 * (1 - ss)
    xi[5] = pref * zp2[5] * dchi[2] ** 2 * (1 - cc)
    return xi


def gas_rates(gas: GasConfig, lin: LinearizedSystem) -> tuple[float, np.ndarray]:
    """Gas friction rate (equal for all coordinates) and heating rates.

    Uses the sphere formula with the middle diameter l_b; xi_q = k_B gamma
    T_g / (hbar omega_q).
    """
    # middle diameter from the inertia triple: l_b^2 = 10 (I_a - I_b + I_c) / m
    m = lin.props.mass
    ia, ib, ic = lin.props.inertia
    lb2 = 10.0 * (ia - ib + ic) / m
    gamma = (5.0 * gas.pressure * lb2 / (6.0 * m)
             * np.sqrt(2 * np.pi * gas.molecule_mass / (K_B * gas.temperature)))
    xi = K_B * gamma * gas.temperature / (HBAR * lin.omega)
    return float(gamma), xi


def heating_rates(lin: LinearizedSystem, gas: GasConfig | None = None) -> HeatingRates:
    rec = recoil_rates(lin)
    if gas is None or gas.pressure == 0.0:
        return HeatingRates(recoil=rec, gas=np.zeros(6), gas_friction=0.0)
    gamma, xi_gas = gas_rates(gas, lin)
    return HeatingRates(recoil=rec, gas=xi_gas, gas_friction=gamma)


# ---------------------------------------------------------------------------
# Normal modes and occupations
# ---------------------------------------------------------------------------

BLOCK_COORDS = ((0, 1, 2, 3), (4, 5))
PRIME_NAMES = ("x'", "y'", "z'", "alpha'", "beta'", "gamma'")


@dataclass(frozen=True)
class NormalModeSystem:
    """Block-diagonalized mechanical modes with transformed couplings.

    Mode Q couples only to the cavity mode of its block; the transform
    matrices map scaled quadratures and are symplectic by construction (the
    residual is recorded in symplectic_error).
    """

    lin: LinearizedSystem
    names: tuple[str, ...]
    omega: np.ndarray
    g: np.ndarray
    xi: np.ndarray
    block: np.ndarray
    source_index: np.ndarray
    transforms: tuple[np.ndarray, ...]
    block_members: tuple[tuple[int, ...], ...]
    excluded: tuple[str, ...]
    symplectic_error: float


def normal_modes(lin: LinearizedSystem, heating: HeatingRates) -> NormalModeSystem:
    """Diagonalize the mechanical quadratic form block by block.

    Unstable coordinates are dropped with a flag; a residual non-positive
    quadratic form raises InstabilityError naming the block.
    """
    names, omegas, gs, xis, blocks, src = [], [], [], [], [], []
    transforms = []
    members_all = []
    excluded = [COORDS[i] for i in range(6) if not lin.stable[i]]
    max_symp_err = 0.0
    xi_total = heating.total

    for jblock, members in enumerate(BLOCK_COORDS):
        keep = [i for i in members if lin.stable[i]]
        if not keep:
            transforms.append(np.zeros((0, 0)))
            members_all.append(tuple())
            continue
        w = lin.omega[keep]
        kmat = np.diag(w)
        for a in range(len(keep)):
            for b in range(a + 1, len(keep)):
                kmat[a, b] = kmat[b, a] = -2.0 * lin.g_mech[keep[a], keep[b]]
        sqrt_w = np.sqrt(w)
        wmat = (sqrt_w[:, None] * kmat) * sqrt_w[None, :]
        evals, s = np.linalg.eigh(wmat)
        if np.any(evals <= 0):
            raise InstabilityError(
                f"mechanical block {jblock + 1} has a non-positive normal-mode "
                f"frequency (coordinates {[COORDS[i] for i in keep]})"
            )
        w_q = np.sqrt(evals)

        # symplectic residual of the full (x, p) transform
        n = len(keep)
        t = np.zeros((2 * n, 2 * n))
        t[:n, :n] = sqrt_w[:, None] * s
        t[n:, n:] = s / sqrt_w[:, None]
        j_sym = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
        max_symp_err = max(max_symp_err, np.abs(t.T @ j_sym @ t - j_sym).max())

        ratio = sqrt_w[:, None] / np.sqrt(w_q)[None, :]
        g_new = (s * ratio).T @ lin.g_opt[keep]
        xi_new = (s**2 * ratio**2).T @ xi_total[keep]

        # label each normal mode by its dominant original coordinate
        order = np.argsort(-np.abs(s), axis=0)
        used = set()
        labels = []
        for col in range(n):
            for row in order[:, col]:
                cand = PRIME_NAMES[keep[row]]
                if cand not in used:
                    labels.append(cand)
                    used.add(cand)
                    break
        for col in range(n):
            names.append(labels[col])
            omegas.append(w_q[col])
            gs.append(g_new[col])
            xis.append(xi_new[col])
            blocks.append(jblock)
            src.append(keep[int(np.argmax(np.abs(s[:, col])))])
        transforms.append(s)
        members_all.append(tuple(keep))

    return NormalModeSystem(
        lin=lin,
        names=tuple(names),
        omega=np.array(omegas),
        g=np.array(gs, dtype=complex),
        xi=np.array(xis),
        block=np.array(blocks, dtype=int),
        source_index=np.array(src, dtype=int),
        transforms=tuple(transforms),
        block_members=tuple(members_all),
        excluded=tuple(excluded),
        symplectic_error=max_symp_err,
    )


@dataclass(frozen=True)
class SteadyState:
    """Weak-coupling rates and stationary occupations per normal mode.

    gamma_minus/plus are the cavity cooling/heating rates; n is the
    stationary occupation, negative or infinite values are flagged in
    `cooled` (False means heating-dominated or uncooled).
    """

    names: tuple[str, ...]
    omega_shifted: np.ndarray
    gamma_minus: np.ndarray
    gamma_plus: np.ndarray
    gamma_net: np.ndarray
    n: np.ndarray
    cooled: np.ndarray
    weak_coupling_ok: bool


def occupations(nm: NormalModeSystem, kappa: float | None = None) -> SteadyState:
    """Stationary occupations n_Q = (gamma_+ + xi_Q) / (gamma_- - gamma_+)."""
    lin = nm.lin
    if kappa is None:
        kappa = lin.setup.cavity.kappa
    deltas = np.asarray(lin.deltas)[nm.block]
    g2 = np.abs(nm.g) ** 2
    gamma_minus = 2 * g2 * kappa / (kappa**2 + (deltas + nm.omega) ** 2)
    gamma_plus = 2 * g2 * kappa / (kappa**2 + (deltas - nm.omega) ** 2)
    gamma_net = gamma_minus - gamma_plus
    chi_p = 1.0 / (kappa - 1j * (deltas + nm.omega))
    chi_m = 1.0 / (kappa - 1j * (deltas - nm.omega))
    omega_shifted = nm.omega + g2 * np.imag(chi_p + chi_m)

    cooled = gamma_net > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        n = np.where(cooled, (gamma_plus + nm.xi) / gamma_net, np.inf)
    weak = bool(np.all(gamma_minus < 0.1 * kappa))
    if not weak:
        warnings.warn("weak-coupling validity is marginal: gamma_- is not << kappa",
                      RuntimeWarning)
    return SteadyState(
        names=nm.names,
        omega_shifted=omega_shifted,
        gamma_minus=gamma_minus,
        gamma_plus=gamma_plus,
        gamma_net=gamma_net,
        n=n,
        cooled=cooled,
        weak_coupling_ok=weak,
    )


# ---------------------------------------------------------------------------
# Detuning policies
# ---------------------------------------------------------------------------

POLICIES = ("fixed", "mean-librational", "mean-all")


def _policy_detuning(policy: str, omega_sq: np.ndarray) -> float:
    mags = np.sqrt(np.abs(omega_sq))
    if policy == "mean-librational":
        return -float(np.mean(mags[3:]))
    if policy == "mean-all":
        return -float(np.mean(mags))
    raise ValueError(f"unknown detuning policy {policy!r}")


def linearize_with_policy(tweezer: TweezerConfig, cavity: CavityConfig,
                          props: ParticleProps, policy: str = "fixed",
                          max_iter: int = 20, rtol: float = 1e-9):
    """Linearize with the detuning fixed or chosen self-consistently.

    The mode frequencies depend on the detuning through b_0, so for the mean
    policies the pair (Delta, b_0) is iterated to a fixed point starting from
    b_0 = 0 (for which the frequencies are detuning-independent).
    """
    if policy == "fixed":
        setup = OpticalSetup.assemble(tweezer, cavity, props)
        return setup, harmonic_parameters(setup, props)
    delta = None
    cav = cavity
    for _ in range(max_iter):
        if delta is None:
            # b_0 = 0 start: frequencies from the bare-tweezer terms only
            setup0 = OpticalSetup.assemble(tweezer, cavity, props)
            lin0 = _bare_frequencies(setup0, props)
            delta = _policy_detuning(policy, lin0)
            continue
        cav = dataclasses.replace(cavity, detuning=delta)
        setup = OpticalSetup.assemble(tweezer, cav, props)
        lin = harmonic_parameters(setup, props)
        new_delta = _policy_detuning(policy, lin.omega_sq)
        if abs(new_delta - delta) <= rtol * abs(new_delta):
            delta = new_delta
            break
        delta = new_delta
    cav = dataclasses.replace(cavity, detuning=delta)
    setup = OpticalSetup.assemble(tweezer, cav, props)
    return setup, harmonic_parameters(setup, props)


def _bare_frequencies(setup: OpticalSetup, props: ParticleProps) -> np.ndarray:
    """omega_q^2 with the cavity amplitude set to zero (tweezer terms only)."""
    chi_a, chi_b, chi_c = props.susceptibility
    tw = setup.tweezer
    eps2 = setup.epsilon_t**2
    psi = tw.psi
    m = props.mass
    ia, ib, ic = props.inertia
    chi_eff = chi_c * np.cos(psi) ** 2 + chi_b * np.sin(psi) ** 2
    v = np.array(
        [
            2 * eps2 * chi_eff / (m * tw.waist_x**2),
            2 * eps2 * chi_eff / (m * tw.waist_y**2),
            eps2 * chi_eff / (m * tw.rayleigh_range**2),
            (chi_c - chi_b) / ia * eps2 * np.cos(2 * psi),
            (chi_c - chi_a) / ib * eps2 * np.cos(psi) ** 2,
            (chi_b - chi_a) / ic * eps2 * np.sin(psi) ** 2,
        ]
    )
    return -2 * HBAR * setup.coupling_u0 * v

"""Time integration of the coupled particle-cavity system.

The full system integrates Hamilton's equations for (R, Omega, p, p_Omega)
together with the driven-damped cavity amplitudes; the quasi-static variant
eliminates the cavity and drives the mechanics with the stationary-field
force plus the retardation friction.

The Euler chart is singular at sin(beta) = 0.  When a trajectory approaches
the singularity the integrator re-anchors: the orientation is re-expressed as
R = S R(Omega') with a fixed rotation S chosen so the new chart starts at
beta' = pi/2, and the canonical momenta are rebuilt from the conserved
angular momentum vector.  Re-anchor times are logged on the trajectory.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .constants import HBAR
from .cavity import operators_from_chi, stationary_field_derivatives, _inv2
from .forces import _generalized_forces_core
from .linearize import _bare_frequencies
from .optics import OpticalSetup, cavity_mode, mode_field, tweezer_mode
from .particle import (
    ParticleProps,
    angular_momentum_lab,
    inertia_matrix,
    kinetic_energy,
    kinetic_energy_gradients,
    rotation_and_derivatives,
    rotation_matrix,
)

# Re-anchoring threshold on |sin beta|.  Triggering well before the chart
# degrades keeps the event dip wide enough for step-endpoint sign detection;
# the re-anchor map itself is exact, so an early trigger costs nothing.
SIN_BETA_REANCHOR = 0.05


class StiffFailureError(RuntimeError):
    """The adaptive integrator failed (step-size underflow or solver error)."""


@dataclass
class FullState:
    """Phase-space point of the coupled system."""

    position: np.ndarray       # m
    orientation: np.ndarray    # Euler angles, rad
    momentum: np.ndarray       # kg m/s
    euler_momenta: np.ndarray  # kg m^2/s
    modes: np.ndarray          # complex cavity amplitudes (2,)
    time: float = 0.0

    def pack(self) -> np.ndarray:
        y = np.empty(16)
        y[0:3] = self.position
        y[3:6] = self.orientation
        y[6:9] = self.momentum
        y[9:12] = self.euler_momenta
        y[12] = self.modes[0].real
        y[13] = self.modes[0].imag
        y[14] = self.modes[1].real
        y[15] = self.modes[1].imag
        return y

    @classmethod
    def unpack(cls, y, t=0.0) -> "FullState":
        return cls(
            position=y[0:3].copy(),
            orientation=y[3:6].copy(),
            momentum=y[6:9].copy(),
            euler_momenta=y[9:12].copy(),
            modes=np.array([y[12] + 1j * y[13], y[14] + 1j * y[15]]),
            time=t,
        )


@dataclass
class TrajectoryRecord:
    """Sampled trajectory with diagnostics; immutable once produced."""

    times: np.ndarray
    position: np.ndarray          # (n, 3)
    euler: np.ndarray             # (n, 3), lab-frame angles
    momentum: np.ndarray          # (n, 3)
    euler_momenta: np.ndarray     # (n, 3), lab-frame canonical projections
    modes: np.ndarray             # (n, 2) complex
    energy_mech: np.ndarray       # H_0 + V_opt, J
    energy_total: np.ndarray      # including -hbar Delta |b|^2, J
    angular_momentum: np.ndarray  # (n, 3), kg m^2/s
    log_volume: np.ndarray | None = None
    reanchor_times: tuple[float, ...] = ()

    @property
    def cavity_population(self) -> np.ndarray:
        return np.abs(self.modes) ** 2

    def energy_drift(self) -> np.ndarray:
        e0 = self.energy_total[0]
        scale = max(abs(e0), np.abs(self.energy_total).max())
        return (self.energy_total - e0) / scale

    def to_csv(self, path) -> None:
        from .csvio import write_csv

        cols = [
            ("t_s", self.times),
            ("x_m", self.position[:, 0]),
            ("y_m", self.position[:, 1]),
            ("z_m", self.position[:, 2]),
            ("alpha_rad", self.euler[:, 0]),
            ("beta_rad", self.euler[:, 1]),
            ("gamma_rad", self.euler[:, 2]),
            ("px_kg_m_s", self.momentum[:, 0]),
            ("py_kg_m_s", self.momentum[:, 1]),
            ("pz_kg_m_s", self.momentum[:, 2]),
            ("p_alpha_kg_m2_s", self.euler_momenta[:, 0]),
            ("p_beta_kg_m2_s", self.euler_momenta[:, 1]),
            ("p_gamma_kg_m2_s", self.euler_momenta[:, 2]),
            ("re_b1", self.modes[:, 0].real),
            ("im_b1", self.modes[:, 0].imag),
            ("re_b2", self.modes[:, 1].real),
            ("im_b2", self.modes[:, 1].imag),
            ("n_cav1", self.cavity_population[:, 0]),
            ("n_cav2", self.cavity_population[:, 1]),
            ("jx_kg_m2_s", self.angular_momentum[:, 0]),
            ("jy_kg_m2_s", self.angular_momentum[:, 1]),
            ("jz_kg_m2_s", self.angular_momentum[:, 2]),
            ("energy_mech_j", self.energy_mech),
            ("energy_total_j", self.energy_total),
            ("energy_drift_rel", self.energy_drift()),
        ]
        if self.log_volume is not None:
            cols.append(("log_phase_volume", self.log_volume))
        write_csv(path, cols, schema="trajectory v1")


# ---------------------------------------------------------------------------
# chart helpers
# ---------------------------------------------------------------------------


def _anchored_chi(props, omega, anchor):
    """Susceptibility and derivatives when the true rotation is S R(omega)."""
    r, dr = rotation_and_derivatives(omega)
    if anchor is not None:
        r = anchor @ r
        dr = anchor @ dr    # broadcasts over the leading derivative axis
    chi0 = props.chi_body
    rt = r.T
    chi = (r * chi0) @ rt
    m = (dr * chi0) @ rt
    dchi = m + np.transpose(m, (0, 2, 1))
    return chi, dchi


def euler_from_matrix(r: np.ndarray) -> np.ndarray:
    """Extract z-y'-z'' Euler angles from a rotation matrix."""
    beta = np.arccos(np.clip(r[2, 2], -1.0, 1.0))
    if abs(np.sin(beta)) > 1e-9:
        alpha = np.arctan2(r[1, 2], r[0, 2])
        gamma = np.arctan2(r[2, 1], -r[2, 0])
    else:
        alpha = np.arctan2(r[1, 0], r[0, 0])
        gamma = 0.0
    return np.array([alpha, beta, gamma])


def _reanchor(props, omega, p_omega, anchor):
    """New (anchor, omega, p_omega) with the chart recentered at beta = pi/2."""
    r_chart = rotation_matrix(omega)
    r_full = r_chart if anchor is None else anchor @ r_chart
    j_chart = angular_momentum_lab(props, omega, p_omega)
    j_full = j_chart if anchor is None else anchor @ j_chart

    omega_new = np.array([0.0, np.pi / 2, 0.0])
    anchor_new = r_full @ rotation_matrix(omega_new).T
    j_new = anchor_new.T @ j_full
    # p_alpha = J.e_z, p_beta = J.e_xi(alpha=0) = J.e_y, p_gamma = J.n_3 = J.e_x
    p_new = np.array([j_new[2], j_new[1], j_new[0]])
    return anchor_new, omega_new, p_new


def _true_frame(props, omega, p_omega, anchor):
    """Lab-frame Euler angles, canonical momenta, and J for a chart state."""
    r_chart = rotation_matrix(omega)
    j_chart = angular_momentum_lab(props, omega, p_omega)
    if anchor is None:
        r_full, j_full = r_chart, j_chart
    else:
        r_full, j_full = anchor @ r_chart, anchor @ j_chart
    euler = euler_from_matrix(r_full)
    e_xi = np.array([-np.sin(euler[0]), np.cos(euler[0]), 0.0])
    p_true = np.array([j_full[2], j_full @ e_xi, j_full @ r_full[:, 2]])
    return euler, p_true, j_full


# ---------------------------------------------------------------------------
# full coupled integration
# ---------------------------------------------------------------------------


def derivatives_full(setup: OpticalSetup, props: ParticleProps, y: np.ndarray,
                     anchor=None, include_radiation: bool = True) -> np.ndarray:
    """RHS of the coupled equations for the packed 16-component state."""
    r = y[0:3]
    om = y[3:6]
    p = y[6:9]
    pom = y[9:12]
    b = np.array([y[12] + 1j * y[13], y[14] + 1j * y[15]])

    chi, dchi = _anchored_chi(props, om, anchor)
    ft, grad_ft = tweezer_mode(setup.tweezer, r)
    fc, grad_fc = cavity_mode(setup.cavity, setup.tweezer.wavenumber, r)
    bas = setup.basis
    e_tw = setup.epsilon_t * bas.e_t
    e_cav = b[0] * bas.e_1 + b[1] * bas.e_2
    u = e_tw * ft + e_cav * fc
    jac = grad_ft[:, None] * e_tw[None, :] + grad_fc[:, None] * e_cav[None, :]
    f_cons, f_rad = _generalized_forces_core(
        chi, dchi, u, jac, HBAR * setup.coupling_u0, HBAR * setup.gamma_sc
    )
    f_total = f_cons + f_rad if include_radiation else f_cons

    grad_om, grad_p = kinetic_energy_gradients(props, om, pom)
    ops = operators_from_chi(setup, chi, fc, ft)
    bdot = ops.a_matrix @ b + ops.eta

    dy = np.empty(16)
    dy[0:3] = p / props.mass
    dy[3:6] = grad_p
    dy[6:9] = f_total[:3]
    dy[9:12] = -grad_om + f_total[3:]
    dy[12] = bdot[0].real
    dy[13] = bdot[0].imag
    dy[14] = bdot[1].real
    dy[15] = bdot[1].imag
    return dy


def total_energy(setup: OpticalSetup, props: ParticleProps, y: np.ndarray, anchor=None):
    """(mechanical energy, total energy) for a packed full state."""
    r, om, p, pom = y[0:3], y[3:6], y[6:9], y[9:12]
    b = np.array([y[12] + 1j * y[13], y[14] + 1j * y[15]])
    chi, _ = _anchored_chi(props, om, anchor)
    u, _ = mode_field(setup, r, b)
    v_opt = HBAR * setup.coupling_u0 * np.real(np.vdot(u, chi @ u))
    h0 = kinetic_energy(props, om, pom, p)
    e_mech = h0 + v_opt
    return e_mech, e_mech - HBAR * setup.cavity.detuning * float(np.sum(np.abs(b) ** 2))


def _beta_step_cap(props: ParticleProps, omega, p_omega) -> float:
    """Step bound so beta cannot sweep past a pole undetected within one step.

    |beta_dot| <= |J| (1/I_a + 1/I_b); the event function dips only near
    sin(beta) = 0, so per-step beta travel must stay below a fraction of the
    dip width.  The 2x margin covers slow angular-momentum growth.
    """
    j = angular_momentum_lab(props, omega, p_omega)
    rate = 2.0 * np.linalg.norm(j) * (1.0 / props.inertia[0] + 1.0 / props.inertia[1])
    if rate <= 0.0:
        return np.inf
    return 0.5 * SIN_BETA_REANCHOR / rate


def _state_scales(setup: OpticalSetup, props: ParticleProps, b_scale: float) -> np.ndarray:
    tw = setup.tweezer
    omega_ref = np.sqrt(np.abs(_bare_frequencies(setup, props)).max())
    scales = np.empty(16)
    scales[0:3] = (tw.waist_x, tw.waist_y, tw.rayleigh_range)
    scales[3:6] = 1.0
    scales[6:9] = props.mass * omega_ref * scales[0:3]
    scales[9:12] = np.asarray(props.inertia) * omega_ref
    scales[12:] = max(1.0, b_scale)
    return scales


def integrate_full(setup: OpticalSetup, props: ParticleProps, state0: FullState,
                   t_end: float, rtol: float = 1e-9, atol_scale: float = 1e-12,
                   n_samples: int = 1000, include_radiation: bool = True,
                   method: str = "DOP853") -> TrajectoryRecord:
    """Integrate the coupled system with adaptive error control.

    atol per component is atol_scale times a characteristic magnitude of that
    component.  Chart singularities trigger re-anchoring events.
    """
    y = state0.pack()
    t = state0.time
    t_final = t + t_end
    anchor = None
    scales = _state_scales(setup, props, np.abs(state0.modes).max())
    t_grid = np.linspace(t, t_final, n_samples)
    reanchors = []

    samples_y = np.empty((n_samples, 16))
    samples_anchor_idx = np.empty(n_samples, dtype=int)
    anchors = [None]
    filled = 0

    def event_singular(tt, yy):
        return np.sin(yy[4]) ** 2 - SIN_BETA_REANCHOR**2

    event_singular.terminal = True
    event_singular.direction = -1.0

    for _ in range(10000):
        if np.sin(y[4]) ** 2 < SIN_BETA_REANCHOR**2:
            anchor, y[3:6], y[9:12] = _reanchor(props, y[3:6], y[9:12], anchor)
            anchors.append(anchor)
            reanchors.append(t)
        remaining = t_grid[filled:]
        sol = solve_ivp(
            lambda tt, yy: derivatives_full(setup, props, yy, anchor, include_radiation),
            (t, t_final),
            y,
            method=method,
            rtol=rtol,
            atol=atol_scale * scales,
            dense_output=True,
            events=event_singular,
            max_step=_beta_step_cap(props, y[3:6], y[9:12]),
        )
        if sol.status == -1:
            raise StiffFailureError(
                f"integration failed at t = {sol.t[-1]:.3e} s: {sol.message}"
            )
        t_reached = sol.t[-1]
        take = remaining[remaining <= t_reached + 1e-15 * max(abs(t_reached), 1.0)]
        if take.size:
            vals = sol.sol(take)
            samples_y[filled:filled + take.size] = vals.T
            samples_anchor_idx[filled:filled + take.size] = len(anchors) - 1
            filled += take.size
        if sol.status == 0:
            break
        # re-anchor and continue
        t = t_reached
        y = sol.y[:, -1].copy()
        anchor, om_new, pom_new = _reanchor(props, y[3:6], y[9:12], anchor)
        y[3:6] = om_new
        y[9:12] = pom_new
        anchors.append(anchor)
        reanchors.append(t)
    else:
        raise StiffFailureError("re-anchor loop did not terminate")

    return _build_record(setup, props, t_grid[:filled], samples_y[:filled],
                         [anchors[i] for i in samples_anchor_idx[:filled]],
                         tuple(reanchors))


def _build_record(setup, props, times, ys, anchors, reanchors, log_volume=None):
    n = len(times)
    position = ys[:, 0:3].copy()
    momentum = ys[:, 6:9].copy()
    euler = np.empty((n, 3))
    pom_true = np.empty((n, 3))
    jlab = np.empty((n, 3))
    modes = ys[:, 12:16:2] + 1j * ys[:, 13:16:2] if ys.shape[1] == 16 else np.zeros((n, 2), complex)
    e_mech = np.empty(n)
    e_tot = np.empty(n)
    for i in range(n):
        euler[i], pom_true[i], jlab[i] = _true_frame(props, ys[i, 3:6], ys[i, 9:12], anchors[i])
        if ys.shape[1] == 16:
            e_mech[i], e_tot[i] = total_energy(setup, props, ys[i], anchors[i])
    return TrajectoryRecord(
        times=np.asarray(times),
        position=position,
        euler=euler,
        momentum=momentum,
        euler_momenta=pom_true,
        modes=modes,
        energy_mech=e_mech,
        energy_total=e_tot,
        angular_momentum=jlab,
        log_volume=log_volume,
        reanchor_times=reanchors,
    )


# ---------------------------------------------------------------------------
# static-field rotor integration (plane waves, free flight)
# ---------------------------------------------------------------------------


def integrate_static_field(props: ParticleProps, field, hbar_u0: float, hbar_gsc: float,
                           state0: FullState, t_end: float, rtol: float = 1e-9,
                           atol: float = 1e-30, n_samples: int = 1000,
                           include_radiation: bool = True,
                           method: str = "DOP853") -> TrajectoryRecord:
    """Mechanical integration in a fixed external field (no cavity back-action).

    `field` provides .field(r) -> (u, jacobian); pass amplitude zero for free
    flight.  Re-anchoring handles chart singularities exactly as in the full
    integration (free rotors tumble through the poles).
    """
    y = np.concatenate([state0.position, state0.orientation,
                        state0.momentum, state0.euler_momenta])
    t = state0.time
    t_final = t + t_end
    anchor = None
    t_grid = np.linspace(t, t_final, n_samples)
    reanchors = []
    samples_y = np.empty((n_samples, 12))
    samples_anchor_idx = np.empty(n_samples, dtype=int)
    anchors = [None]
    filled = 0

    def rhs(tt, yy):
        r, om, p, pom = yy[0:3], yy[3:6], yy[6:9], yy[9:12]
        chi, dchi = _anchored_chi(props, om, anchor)
        u, jac = field.field(r)
        f_cons, f_rad = _generalized_forces_core(chi, dchi, u, jac, hbar_u0, hbar_gsc)
        f_total = f_cons + f_rad if include_radiation else f_cons
        grad_om, grad_p = kinetic_energy_gradients(props, om, pom)
        return np.concatenate([p / props.mass, grad_p, f_total[:3], -grad_om + f_total[3:]])

    def event_singular(tt, yy):
        return np.sin(yy[4]) ** 2 - SIN_BETA_REANCHOR**2

    event_singular.terminal = True
    event_singular.direction = -1.0

    for _ in range(100000):
        if np.sin(y[4]) ** 2 < SIN_BETA_REANCHOR**2:
            anchor, y[3:6], y[9:12] = _reanchor(props, y[3:6], y[9:12], anchor)
            anchors.append(anchor)
            reanchors.append(t)
        sol = solve_ivp(rhs, (t, t_final), y, method=method, rtol=rtol, atol=atol,
                        dense_output=True, events=event_singular,
                        max_step=_beta_step_cap(props, y[3:6], y[9:12]))
        if sol.status == -1:
            raise StiffFailureError(f"integration failed at t = {sol.t[-1]:.3e} s: {sol.message}")
        t_reached = sol.t[-1]
        remaining = t_grid[filled:]
        take = remaining[remaining <= t_reached + 1e-15 * max(abs(t_reached), 1.0)]
        if take.size:
            samples_y[filled:filled + take.size] = sol.sol(take).T
            samples_anchor_idx[filled:filled + take.size] = len(anchors) - 1
            filled += take.size
        if sol.status == 0:
            break
        t = t_reached
        y = sol.y[:, -1].copy()
        anchor, om_new, pom_new = _reanchor(props, y[3:6], y[9:12], anchor)
        y[3:6] = om_new
        y[9:12] = pom_new
        anchors.append(anchor)
        reanchors.append(t)
    else:
        raise StiffFailureError("re-anchor loop did not terminate")

    rec = _build_record(None, props, t_grid[:filled], samples_y[:filled],
                        [anchors[i] for i in samples_anchor_idx[:filled]], tuple(reanchors))
    # energies for the static-field case
    n = len(rec.times)
    for i in range(n):
        om = samples_y[i, 3:6]
        chi, _ = _anchored_chi(props, om, anchors[samples_anchor_idx[i]])
        u, _ = field.field(samples_y[i, 0:3])
        v_opt = hbar_u0 * np.real(np.vdot(u, chi @ u))
        h0 = kinetic_energy(props, om, samples_y[i, 9:12], samples_y[i, 6:9])
        rec.energy_mech[i] = h0 + v_opt
        rec.energy_total[i] = rec.energy_mech[i]
    return rec


# ---------------------------------------------------------------------------
# quasi-static integration
# ---------------------------------------------------------------------------


def quasistatic_rhs(setup: OpticalSetup, props: ParticleProps, y: np.ndarray,
                    include_radiation: bool = True, include_friction: bool = True) -> np.ndarray:
    """Mechanical RHS with the cavity eliminated: stationary-field force plus friction."""
    r, om, p, pom = y[0:3], y[3:6], y[6:9], y[9:12]
    ops, b_s, grad = stationary_field_derivatives(setup, props, r, om)
    chi, dchi = _anchored_chi(props, om, None)
    u, jac = mode_field(setup, r, b_s)
    f_cons, f_rad = _generalized_forces_core(
        chi, dchi, u, jac, HBAR * setup.coupling_u0, HBAR * setup.gamma_sc
    )
    f_total = f_cons + f_rad if include_radiation else f_cons

    if include_friction:
        grad_om, grad_p = kinetic_energy_gradients(props, om, pom)
        qdot = np.empty(6)
        qdot[:3] = p / props.mass
        qdot[3:] = grad_p
        db = _inv2(ops.a_matrix) @ (qdot @ grad)
        a_grad = grad @ ops.a_matrix.T
        fric = np.empty(6)
        for q in range(6):
            fric[q] = -2.0 * HBAR * np.imag(np.vdot(db, a_grad[q]))
        if include_radiation and setup.gamma_sc != 0.0:
            fc, _ = cavity_mode(setup.cavity, setup.tweezer.wavenumber, r)
            bas = setup.basis
            chi_v = np.vstack([chi @ bas.e_1, chi @ bas.e_2]) * fc
            for q in range(6):
                d_chi_us = chi @ jac[q] if q < 3 else dchi[q - 3] @ u
                fric[q] += 2.0 * HBAR * setup.gamma_sc * np.imag(np.dot(np.conj(db), chi_v @ d_chi_us))
        f_total = f_total + fric
    else:
        _, grad_p = kinetic_energy_gradients(props, om, pom)

    grad_om, _ = kinetic_energy_gradients(props, om, pom)
    return np.concatenate([p / props.mass, grad_p, f_total[:3], -grad_om + f_total[3:]])


def integrate_quasistatic(setup: OpticalSetup, props: ParticleProps, state0: FullState,
                          t_end: float, rtol: float = 1e-9, atol_scale: float = 1e-12,
                          n_samples: int = 1000, include_radiation: bool = True,
                          include_friction: bool = True, monodromy: bool = False,
                          method: str = "DOP853") -> TrajectoryRecord:
    """Quasi-static reduction: mechanics driven by the adiabatic cavity field.

    With monodromy=True the 12x12 tangent flow is integrated alongside (its
    Jacobian taken by central differences of the RHS) and log|det| of the
    monodromy matrix is recorded, for phase-space contraction diagnostics.
    """
    y0 = np.concatenate([state0.position, state0.orientation,
                         state0.momentum, state0.euler_momenta])
    scales = _state_scales(setup, props, 1.0)[:12]

    def rhs_mech(yy):
        return quasistatic_rhs(setup, props, yy, include_radiation, include_friction)

    if not monodromy:
        sol = solve_ivp(lambda tt, yy: rhs_mech(yy), (state0.time, state0.time + t_end),
                        y0, method=method, rtol=rtol, atol=atol_scale * scales,
                        t_eval=np.linspace(state0.time, state0.time + t_end, n_samples))
        if sol.status != 0:
            raise StiffFailureError(f"quasi-static integration failed: {sol.message}")
        ys = sol.y.T
        log_volume = None
        times = sol.t
    else:
        fd_steps = 1e-7 * scales

        def rhs_aug(tt, yy):
            z = yy[:12]
            phi = yy[12:].reshape(12, 12)
            dz = rhs_mech(z)
            jac = np.empty((12, 12))
            for k in range(12):
                dzk = np.zeros(12)
                dzk[k] = fd_steps[k]
                jac[:, k] = (rhs_mech(z + dzk) - rhs_mech(z - dzk)) / (2 * fd_steps[k])
            return np.concatenate([dz, (jac @ phi).ravel()])

        y_aug0 = np.concatenate([y0, np.eye(12).ravel()])
        sol = solve_ivp(rhs_aug, (state0.time, state0.time + t_end), y_aug0,
                        method=method, rtol=rtol,
                        atol=np.concatenate([atol_scale * scales, np.full(144, 1e-12)]),
                        t_eval=np.linspace(state0.time, state0.time + t_end, n_samples))
        if sol.status != 0:
            raise StiffFailureError(f"quasi-static integration failed: {sol.message}")
        ys = sol.y[:12].T
        times = sol.t
        log_volume = np.empty(len(times))
        worst_cond = 0.0
        for i in range(len(times)):
            phi = sol.y[12:, i].reshape(12, 12)
            sign, logdet = np.linalg.slogdet(phi)
            log_volume[i] = logdet
            worst_cond = max(worst_cond, np.linalg.cond(phi))
        if worst_cond > 1e12:
            warnings.warn(f"monodromy matrix is ill-conditioned (cond = {worst_cond:.2e})",
                          RuntimeWarning)

    rec = _build_record(setup, props, times, ys, [None] * len(times), (), log_volume)
    for i in range(len(times)):
        r, om, p, pom = ys[i, 0:3], ys[i, 3:6], ys[i, 6:9], ys[i, 9:12]
        from .cavity import stationary_field

        b_s = stationary_field(setup, props, r, om)
        chi, _ = _anchored_chi(props, om, None)
        u, _ = mode_field(setup, r, b_s)
        v_opt = HBAR * setup.coupling_u0 * np.real(np.vdot(u, chi @ u))
        h0 = kinetic_energy(props, om, pom, p)
        rec.energy_mech[i] = h0 + v_opt
        rec.energy_total[i] = rec.energy_mech[i]
        rec.modes[i] = b_s
    return rec


def phase_volume_rate(record: TrajectoryRecord) -> np.ndarray:
    """Sampled d/dt log det of the tangent flow (negative of the contraction rate)."""
    if record.log_volume is None:
        raise ValueError("trajectory was integrated without monodromy tracking")
    return np.gradient(record.log_volume, record.times)

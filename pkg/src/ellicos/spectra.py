"""Cavity output power spectra and the stochastic time-domain oracle.

Analytic side: the harmonic steady-state PSD of each cavity output mode (a
coherent shot-noise-driven term plus an incoherent heating term), and the
corrections from the cubic rotational nonlinearity, which add combination
peaks at sums and differences of the librational frequencies.

Oracle side: classical Langevin integration of the same linearized mode
equations with an exact Ornstein-Uhlenbeck propagator.  Cavity vacuum noise
is represented by complex white noise reproducing the symmetrized quantum
correlations (<eta eta*> = delta/2), so simulated second moments estimate
symmetrized quantum moments: <|a_Q|^2> -> n_Q + 1/2, and the simulated PSD
carries an extra flat-filtered vacuum term (kappa/2pi)|chi_j|^2 on top of the
analytic normal-ordered spectrum.

Frequency axis convention: a signal component e^{-i w0 t} appears at +w0; the
cavity susceptibility chi_j peaks at -Delta_j.  PSDs are per rad/s, i.e. the
integral over the grid (d omega) recovers the corresponding moment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sp_signal
from scipy.linalg import expm

from .constants import HBAR
from .linearize import LinearizedSystem, NormalModeSystem, SteadyState


def cavity_susceptibility(omega, kappa: float, delta_j: float):
    """chi_j(w) = 1/(kappa - i(Delta_j + w)); peaks at w = -Delta_j."""
    return 1.0 / (kappa - 1j * (delta_j + np.asarray(omega)))


def mechanical_susceptibility(omega, gamma_q: float, omega_tilde: float):
    """chi_Q(w) = 1/(gamma_Q/2 + i(w~_Q - w)); peaks at w = +w~_Q."""
    return 1.0 / (0.5 * gamma_q + 1j * (omega_tilde - np.asarray(omega)))


def default_grid(nm: NormalModeSystem, ss: SteadyState, n_points: int = 2**14,
                 span_factor: float = 1.5) -> np.ndarray:
    """Frequency grid resolving the mechanical peaks and the cavity resonance."""
    deltas = np.asarray(nm.lin.deltas)
    top = span_factor * max(np.max(ss.omega_shifted), np.max(np.abs(deltas)))
    return np.linspace(-top, top, n_points)


@dataclass(frozen=True)
class BlockRates:
    """Per-mode spectral inputs of one cavity block."""

    omega_tilde: np.ndarray
    gamma: np.ndarray
    g: np.ndarray
    xi: np.ndarray


def _block(nm: NormalModeSystem, ss: SteadyState, j: int) -> BlockRates:
    sel = nm.block == j
    return BlockRates(
        omega_tilde=ss.omega_shifted[sel],
        gamma=ss.gamma_net[sel],
        g=nm.g[sel],
        xi=nm.xi[sel],
    )


def harmonic_psd_from_rates(kappa: float, delta_j: float, omega_tilde, gamma, g, xi,
                            grid) -> np.ndarray:
    """Harmonic steady-state output PSD for explicit per-mode rates.

    Two terms: the coherent square of the summed shot-noise-driven mechanical
    response (cooling-limiting even at zero mechanical noise), and the
    incoherent per-mode heating term weighted by xi_Q.
    """
    w = np.asarray(grid)
    chi_j = cavity_susceptibility(w, kappa, delta_j)
    chi_j_m = cavity_susceptibility(-w, kappa, delta_j)
    g = np.asarray(g, dtype=complex)
    coh = np.zeros_like(w, dtype=complex)
    inc = np.zeros_like(w)
    for i in range(g.size):
        chi_q = mechanical_susceptibility(w, gamma[i], omega_tilde[i])
        chi_q_m = mechanical_susceptibility(-w, gamma[i], omega_tilde[i])
        resp = chi_q - np.conj(chi_q_m)
        coh += np.conj(g[i]) ** 2 * resp
        inc += np.abs(g[i]) ** 2 * xi[i] * np.abs(resp) ** 2
    s0 = np.abs(chi_j) ** 2 * (2 * kappa * np.abs(chi_j_m) ** 2 * np.abs(coh) ** 2 + inc)
    return s0 / (2 * np.pi)


def harmonic_psd(nm: NormalModeSystem, ss: SteadyState, mode_j: int, grid) -> np.ndarray:
    """Harmonic steady-state output PSD of cavity mode j (0 or 1)."""
    blk = _block(nm, ss, mode_j)
    return harmonic_psd_from_rates(nm.lin.setup.cavity.kappa, nm.lin.deltas[mode_j],
                                   blk.omega_tilde, blk.gamma, blk.g, blk.xi, grid)


@dataclass(frozen=True)
class CubicCoefficients:
    """Amplitudes of the two cubic libration couplings, rad/s."""

    c_plus: float
    c_minus: float


def cubic_coefficients(lin: LinearizedSystem) -> CubicCoefficients:
    """c_pm = w_a a_zp b_zp g_zp [I_c w_g pm (I_a - I_b) w_b] / hbar.

    Requires all three librations confined; equal transverse inertia makes
    the two coefficients coincide.
    """
    if not bool(np.all(lin.stable[3:])):
        raise ValueError("cubic coefficients need all three librations confined")
    ia, ib, ic = lin.props.inertia
    w_a, w_b, w_g = lin.omega[3:]
    zp3 = float(np.prod(lin.q_zp[3:]))
    base = w_a * zp3 / HBAR
    return CubicCoefficients(
        c_plus=base * (ic * w_g + (ia - ib) * w_b),
        c_minus=base * (ic * w_g - (ia - ib) * w_b),
    )


def _cauchy(w, gamma_sum_half2, center):
    return 1.0 / (gamma_sum_half2 + (np.asarray(w) - center) ** 2)


def _mode_rates(nm: NormalModeSystem, ss: SteadyState, name: str):
    i = nm.names.index(name)
    return ss.omega_shifted[i], ss.gamma_net[i], nm.g[i], nm.xi[i]


def cubic_psd_corrections(nm: NormalModeSystem, ss: SteadyState, cubic: CubicCoefficients,
                          grid) -> dict[str, np.ndarray]:
    """Correction spectra from the cubic libration coupling.

    Returns {"alpha": S^a' (adds to mode 1), "beta": S^b', "gamma": S^g'
    (add to mode 2)}; peaks sit at the pairwise combination frequencies of
    the partner modes, with widths (gamma_Q + gamma_Q')/2, and every term
    carries the product of the partner heating rates.
    """
    w = np.asarray(grid)
    kappa = nm.lin.setup.cavity.kappa
    cp, cm = cubic.c_plus, cubic.c_minus
    wa, ga, g_a, xa = _mode_rates(nm, ss, "alpha'")
    wb, gb, g_b, xb = _mode_rates(nm, ss, "beta'")
    wg, gg, g_g, xg = _mode_rates(nm, ss, "gamma'")
    chi1 = cavity_susceptibility(w, kappa, nm.lin.deltas[0])
    chi2 = cavity_susceptibility(w, kappa, nm.lin.deltas[1])

    out = {}

    # alpha' correction, driven by the (beta', gamma') noise product
    chi_a = mechanical_susceptibility(w, ga, wa)
    chi_a_m = mechanical_susceptibility(-w, ga, wa)
    resp_a2 = np.abs(chi_a - np.conj(chi_a_m)) ** 2
    g2 = 0.25 * (gb + gg) ** 2
    cau = (cp**2 * _cauchy(w, g2, wb + wg) + cp**2 * _cauchy(w, g2, -wb - wg)
           + cm**2 * _cauchy(w, g2, wg - wb) + cm**2 * _cauchy(w, g2, wb - wg))
    out["alpha"] = (4 * xb * xg * np.abs(g_a) ** 2 / (2 * np.pi)
                    * (1.0 / gb + 1.0 / gg) * np.abs(chi1) ** 2 * resp_a2 * cau)

    # beta' correction, driven by (alpha', gamma')
    chi_b = mechanical_susceptibility(w, gb, wb)
    chi_b_m = mechanical_susceptibility(-w, gb, wb)
    g2 = 0.25 * (ga + gg) ** 2
    w_minus = np.abs(cm * chi_b - cp * np.conj(chi_b_m)) ** 2
    w_plus = np.abs(cp * chi_b - cm * np.conj(chi_b_m)) ** 2
    out["beta"] = (xa * xg * np.abs(g_b) ** 2 / (2 * np.pi)
                   * (1.0 / ga + 1.0 / gg) * np.abs(chi2) ** 2
                   * (w_minus * (_cauchy(w, g2, wa + wg) + _cauchy(w, g2, wg - wa))
                      + w_plus * (_cauchy(w, g2, -wa - wg) + _cauchy(w, g2, wa - wg))))

    # gamma' correction, driven by (alpha', beta'); the second bracket is a
    # sum of the two Cauchy terms, by symmetry with the others
    chi_g = mechanical_susceptibility(w, gg, wg)
    chi_g_m = mechanical_susceptibility(-w, gg, wg)
    g2 = 0.25 * (ga + gb) ** 2
    w_minus = np.abs(cm * chi_g + cp * np.conj(chi_g_m)) ** 2
    w_plus = np.abs(cp * chi_g + cm * np.conj(chi_g_m)) ** 2
    out["gamma"] = (xa * xb * np.abs(g_g) ** 2 / (2 * np.pi)
                    * (1.0 / ga + 1.0 / gb) * np.abs(chi2) ** 2
                    * (w_minus * (_cauchy(w, g2, wa + wb) + _cauchy(w, g2, wb - wa))
                       + w_plus * (_cauchy(w, g2, -wa - wb) + _cauchy(w, g2, wa - wb))))
    return out


# ---------------------------------------------------------------------------
# time-domain Langevin oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LangevinModel:
    """Linear(ized) mode system for the time-domain simulation.

    omega, g, xi: per mechanical mode; block gives the cavity mode (0/1) it
    couples to.  kappa and deltas describe the two cavity modes.  Optional
    cubic coupling acts on the three modes named by cubic_indices, in the
    order (alpha', beta', gamma').
    """

    omega: np.ndarray
    g: np.ndarray
    xi: np.ndarray
    block: np.ndarray
    kappa: float
    deltas: tuple[float, float]
    c_plus: float = 0.0
    c_minus: float = 0.0
    cubic_indices: tuple[int, int, int] | None = None

    @classmethod
    def from_normal_modes(cls, nm: NormalModeSystem, cubic: CubicCoefficients | None = None):
        # modes with no cavity coupling neither damp nor radiate into b; an
        # undamped noisy mode would drift without bound in the simulation
        keep = [i for i in range(len(nm.names)) if abs(nm.g[i]) > 0]
        names = [nm.names[i] for i in keep]
        idx = None
        cp = cm = 0.0
        if cubic is not None:
            idx = tuple(names.index(n) for n in ("alpha'", "beta'", "gamma'"))
            cp, cm = cubic.c_plus, cubic.c_minus
        return cls(
            omega=nm.omega[keep].copy(),
            g=nm.g[keep].copy(),
            xi=nm.xi[keep].copy(),
            block=nm.block[keep].copy(),
            kappa=nm.lin.setup.cavity.kappa,
            deltas=nm.lin.deltas,
            c_plus=cp,
            c_minus=cm,
            cubic_indices=idx,
        )

    @property
    def n_modes(self) -> int:
        return self.omega.size


def _drift_and_noise(model: LangevinModel):
    """Real drift matrix and noise input matrix of the coupled linear system.

    State layout: [Re b1, Im b1, Re b2, Im b2, Re a_1, Im a_1, ...].  Noise
    inputs: (x, y) quadrature white noises per cavity with <eta eta*> =
    delta/2, then one real unit white noise per mechanical mode.
    """
    n = model.n_modes
    dim = 4 + 2 * n
    m = np.zeros((dim, dim))

    def add(row_z, col_z, c=0.0, d=0.0):
        """dz_row/dt += c * z_col + d * conj(z_col) for complex pairs."""
        r, cidx = 2 * row_z, 2 * col_z
        m[r, cidx] += np.real(c) + np.real(d)
        m[r, cidx + 1] += -np.imag(c) + np.imag(d)
        m[r + 1, cidx] += np.imag(c) + np.imag(d)
        m[r + 1, cidx + 1] += np.real(c) - np.real(d)

    for j in (0, 1):
        add(j, j, c=1j * model.deltas[j] - model.kappa)
    for q in range(n):
        zq = 2 + q
        add(zq, zq, c=-1j * model.omega[q])
        j = int(model.block[q])
        # cavity j driven by i g* (a + a*), mode q by i (g b + g* b*)
        add(j, zq, c=1j * np.conj(model.g[q]), d=1j * np.conj(model.g[q]))
        add(zq, j, c=1j * model.g[q], d=1j * np.conj(model.g[q]))

    noise = np.zeros((dim, 4 + n))
    for j in (0, 1):
        # sqrt(2 kappa) eta with eta = (nu_x + i nu_y)/2: symmetrized vacuum
        noise[2 * j, 2 * j] = np.sqrt(2 * model.kappa) / 2
        noise[2 * j + 1, 2 * j + 1] = np.sqrt(2 * model.kappa) / 2
    for q in range(n):
        # i sqrt(xi) eta_Q with real unit white noise: momentum quadrature
        noise[2 * (2 + q) + 1, 4 + q] = np.sqrt(model.xi[q])
    return m, noise


def _van_loan(m: np.ndarray, noise: np.ndarray, dt: float):
    """Exact one-step propagator and noise covariance of the OU system."""
    dim = m.shape[0]
    q = noise @ noise.T
    block = np.zeros((2 * dim, 2 * dim))
    block[:dim, :dim] = -m
    block[:dim, dim:] = q
    block[dim:, dim:] = m.T
    eb = expm(block * dt)
    phi = eb[dim:, dim:].T
    cov = phi @ eb[:dim, dim:]
    cov = 0.5 * (cov + cov.T)
    evals, evecs = np.linalg.eigh(cov)
    l_noise = evecs * np.sqrt(np.clip(evals, 0.0, None))
    return phi, l_noise


def _cubic_force_batch(model: LangevinModel, state: np.ndarray) -> np.ndarray:
    """Classical cubic forces on the three librational modes, batched over
    the trailing ensemble axis of the real state array."""
    ia, ib_, ig = model.cubic_indices
    a = state[2 * (2 + ia)] + 1j * state[2 * (2 + ia) + 1]
    b = state[2 * (2 + ib_)] + 1j * state[2 * (2 + ib_) + 1]
    g = state[2 * (2 + ig)] + 1j * state[2 * (2 + ig) + 1]
    cp, cm = model.c_plus, model.c_minus
    da = -1j * (cp * (b * g - np.conj(b) * np.conj(g)) + cm * (np.conj(b) * g - b * np.conj(g)))
    db = 1j * (cm * a * g + cp * np.conj(a) * np.conj(g) - cp * a * np.conj(g) - cm * np.conj(a) * g)
    dg = 1j * (-cm * a * b + cp * np.conj(a) * np.conj(b) - cp * a * np.conj(b) + cm * np.conj(a) * b)
    out = np.zeros_like(state)
    for idx, dz in ((ia, da), (ib_, db), (ig, dg)):
        out[2 * (2 + idx)] = dz.real
        out[2 * (2 + idx) + 1] = dz.imag
    return out


@dataclass
class LangevinResult:
    """Simulation output: one recorded trajectory plus ensemble statistics."""

    times: np.ndarray
    b_series: np.ndarray          # (n_keep, 2) complex, ensemble member 0
    occupations: np.ndarray       # <|a_Q|^2> - 1/2 per mode (symmetrized estimate)
    occupations_raw: np.ndarray   # <|a_Q|^2>
    psd_freq: np.ndarray | None = None
    psd: np.ndarray | None = None  # (nfreq, 2)


def langevin_simulate(model: LangevinModel, duration: float, dt: float, seed: int,
                      n_ensemble: int = 64, transient_fraction: float = 0.2,
                      compute_psd: bool = False, nperseg: int = 4096,
                      record_stride: int = 1) -> LangevinResult:
    """Integrate the mode equations with an exact OU step (splitting for cubic).

    Deterministic for a given seed.  Occupation estimates average over time
    (after the transient) and the ensemble; <|a|^2> - 1/2 estimates the
    normal-ordered occupation because the injected cavity noise carries the
    symmetrized half-quantum.
    """
    rng = np.random.default_rng(seed)
    m, noise = _drift_and_noise(model)
    phi, l_noise = _van_loan(m, noise, dt)
    dim = m.shape[0]
    n_steps = int(round(duration / dt))
    n_skip = int(transient_fraction * n_steps)
    x = np.zeros((dim, n_ensemble))

    n_rec = (n_steps - n_skip) // record_stride
    b_series = np.empty((n_rec, 2), dtype=complex)
    b_all = np.empty((n_rec, 2, n_ensemble), dtype=complex) if compute_psd else None
    occ_accum = np.zeros(model.n_modes)
    n_occ = 0
    cubic = model.cubic_indices is not None and (model.c_plus != 0 or model.c_minus != 0)

    rec = 0
    chunk = 1024
    noise_buf = None
    for step in range(n_steps):
        if step % chunk == 0:
            noise_buf = rng.standard_normal((chunk, dim, n_ensemble))
        if cubic:
            # splitting: cubic kick, then exact linear-stochastic step
            x += dt * _cubic_force_batch(model, x)
        x = phi @ x + l_noise @ noise_buf[step % chunk]
        if step >= n_skip:
            k = step - n_skip
            if k % record_stride == 0 and rec < n_rec:
                b_series[rec, 0] = x[0, 0] + 1j * x[1, 0]
                b_series[rec, 1] = x[2, 0] + 1j * x[3, 0]
                if compute_psd:
                    b_all[rec, 0] = x[0] + 1j * x[1]
                    b_all[rec, 1] = x[2] + 1j * x[3]
                rec += 1
            amp2 = x[4::2] ** 2 + x[5::2] ** 2
            occ_accum += amp2.mean(axis=1)
            n_occ += 1

    occ_raw = occ_accum / max(n_occ, 1)
    times = (n_skip + record_stride * np.arange(n_rec)) * dt
    result = LangevinResult(
        times=times,
        b_series=b_series,
        occupations=occ_raw - 0.5,
        occupations_raw=occ_raw,
    )
    if compute_psd:
        fs = 1.0 / (dt * record_stride)
        nseg = min(nperseg, n_rec)
        psd = []
        for j in (0, 1):
            f, p = sp_signal.welch(b_all[:, j, :], fs=fs, axis=0,
                                   return_onesided=False, scaling="density",
                                   nperseg=nseg, detrend=False)
            psd.append(p.mean(axis=1))
        # map to the analytic convention: e^{-i w t} lives at w = -2 pi f,
        # and per-rad/s densities carry a 1/2pi
        omega = -2 * np.pi * f
        order = np.argsort(omega)
        result.psd_freq = omega[order]
        result.psd = np.stack([psd[0][order], psd[1][order]], axis=1) / (2 * np.pi)
    return result


def simulated_psd_reference(model: LangevinModel, nm: NormalModeSystem, ss: SteadyState,
                            grid) -> np.ndarray:
    """Analytic target for the simulated PSD of each cavity mode.

    The classical simulation with symmetrized vacuum noise adds the filtered
    flat term (kappa/2pi)|chi_j|^2 to the normal-ordered harmonic spectrum.
    """
    w = np.asarray(grid)
    out = np.empty((w.size, 2))
    for j in (0, 1):
        chi_j = cavity_susceptibility(w, model.kappa, model.deltas[j])
        out[:, j] = harmonic_psd(nm, ss, j, w) + model.kappa / (2 * np.pi) * np.abs(chi_j) ** 2
    return out

import numpy as np
import pytest

from ellicos.constants import EPS0, HBAR
from ellicos.forces import (
    COORDS,
    effective_masses,
    force_torque,
    generalized_forces,
    generalized_radiation_force,
    induced_dipole,
    optical_potential,
    scattered_power,
)
from ellicos.linearize import optical_potential_value, tweezer_minimum
from ellicos.optics import OpticalSetup, mode_field, total_field
from ellicos.particle import rotation_matrix, susceptibility_lab


def random_state(rng):
    r = rng.normal(scale=0.3e-6, size=3)
    om = np.array([rng.uniform(0, 2 * np.pi), rng.uniform(0.2, np.pi - 0.2),
                   rng.uniform(0, 2 * np.pi)])
    b = rng.normal(size=2) + 1j * rng.normal(size=2)
    return r, om, b


def test_induced_dipole_basics(prolate_props, sphere_props, generic_setup):
    k = generic_setup.tweezer.wavenumber
    om = np.array([0.2, 1.2, 0.5])
    assert np.allclose(induced_dipole(prolate_props, om, np.zeros(3), k), 0.0)

    e_field = np.array([1.0 + 0.5j, -0.3j, 0.7])
    p = induced_dipole(sphere_props, om, e_field, k)
    chi = sphere_props.susceptibility[0]
    v = sphere_props.volume
    scalar = EPS0 * v * chi * (1 + 1j * v * k**3 * chi / (6 * np.pi))
    assert np.allclose(p, scalar * e_field, rtol=1e-12)
    # imaginary correction has the stated relative size
    ratio = v * k**3 * chi / (6 * np.pi)
    assert abs(p[2].imag / p[2].real) == pytest.approx(ratio, rel=1e-12)


def test_potential_real_and_matches_dimensionless(prolate_props, generic_setup):
    rng = np.random.default_rng(1)
    r, om, b = random_state(rng)
    E, _ = total_field(generic_setup, r, b)
    v = optical_potential(prolate_props, om, E)
    assert np.isreal(v)
    q = np.concatenate([r, om])
    assert v == pytest.approx(optical_potential_value(generic_setup, prolate_props, q, b),
                              rel=1e-12)


def test_tweezer_minimum_location(prolate_props, generic_setup):
    """Coarse 6D scan: no configuration beats the aligned minimum."""
    q_tw = tweezer_minimum(generic_setup.tweezer)
    v_min = optical_potential_value(generic_setup, prolate_props, q_tw, np.zeros(2))
    rng = np.random.default_rng(2)
    tw = generic_setup.tweezer
    for _ in range(400):
        q = np.concatenate([
            rng.uniform(-1, 1, 3) * np.array([tw.waist_x, tw.waist_y, tw.rayleigh_range]),
            [rng.uniform(0, 2 * np.pi), rng.uniform(0.05, np.pi - 0.05), rng.uniform(0, 2 * np.pi)],
        ])
        assert optical_potential_value(generic_setup, prolate_props, q, np.zeros(2)) >= v_min - 1e-30


def test_sphere_torque_vanishes(sphere_props, generic_setup):
    rng = np.random.default_rng(3)
    k = generic_setup.tweezer.wavenumber
    for _ in range(50):
        r, om, b = random_state(rng)
        E, jac = total_field(generic_setup, r, b)
        w = force_torque(sphere_props, om, E, jac, k)
        scale = EPS0 * sphere_props.volume * np.abs(E).max() ** 2
        assert np.abs(w.torque).max() < 1e-14 * scale


def test_conservative_force_is_minus_gradient(prolate_props, generic_setup):
    rng = np.random.default_rng(4)
    k = generic_setup.tweezer.wavenumber
    for _ in range(20):
        r, om, b = random_state(rng)
        E, jac = total_field(generic_setup, r, b)
        w = force_torque(prolate_props, om, E, jac, k)
        # translational gradient by central differences with Richardson
        for i in range(3):
            e = np.zeros(3)
            def grad(h):
                rp, rm = r + h * e, r - h * e
                return -(optical_potential(prolate_props, om, total_field(generic_setup, rp, b)[0])
                         - optical_potential(prolate_props, om, total_field(generic_setup, rm, b)[0])) / (2 * h)
            e[i] = 1.0
            h0 = 1e-10
            fd = (4 * grad(h0 / 2) - grad(h0)) / 3
            assert w.force_conservative[i] == pytest.approx(fd, rel=1e-6)


def test_conservative_torque_projections(prolate_props, generic_setup):
    """Torque projected on (e_z, e_xi, n_3) equals -dV/d(alpha, beta, gamma)."""
    rng = np.random.default_rng(5)
    k = generic_setup.tweezer.wavenumber
    for _ in range(10):
        r, om, b = random_state(rng)
        E, jac = total_field(generic_setup, r, b)
        w = force_torque(prolate_props, om, E, jac, k)
        a = om[0]
        axes = [np.array([0.0, 0.0, 1.0]),
                np.array([-np.sin(a), np.cos(a), 0.0]),
                rotation_matrix(om)[:, 2]]
        for i, axis in enumerate(axes):
            e = np.zeros(3)
            e[i] = 1e-6
            vp = optical_potential(prolate_props, om + e, E)
            vm = optical_potential(prolate_props, om - e, E)
            fd = -(vp - vm) / 2e-6
            assert w.torque_conservative @ axis == pytest.approx(fd, rel=1e-6)


def test_radiation_force_cartesian_consistency(prolate_props, generic_setup):
    """Generalized translational radiation forces equal the wrench expression."""
    rng = np.random.default_rng(6)
    k = generic_setup.tweezer.wavenumber
    for _ in range(10):
        r, om, b = random_state(rng)
        E, jac = total_field(generic_setup, r, b)
        w = force_torque(prolate_props, om, E, jac, k)
        _, f_rad = generalized_forces(generic_setup, prolate_props, r, om, b)
        assert np.allclose(w.force_radiation, f_rad[:3], rtol=1e-10)
        # ... and rotational ones equal the projected radiation torque
        a = om[0]
        axes = [np.array([0.0, 0.0, 1.0]),
                np.array([-np.sin(a), np.cos(a), 0.0]),
                rotation_matrix(om)[:, 2]]
        for i, axis in enumerate(axes):
            assert w.torque_radiation @ axis == pytest.approx(f_rad[3 + i], rel=1e-10)


def test_plane_wave_radiation_symmetries(prolate_props, generic_setup):
    """Linear polarization: no torque about the polarization axis; positive push."""
    from ellicos.constants import HBAR
    from ellicos.forces import _generalized_forces_core
    from ellicos.optics import PlaneWaveField
    from ellicos.particle import susceptibility_lab_derivatives

    k = generic_setup.tweezer.wavenumber
    pw = PlaneWaveField(1.0, np.array([0.0, 0.0, 1.0]), np.array([0.0, k, 0.0]))
    # polarization along z: generalized alpha-rotation is about e_z... use
    # polarization e_x and check the torque component along e_x instead
    pw = PlaneWaveField(1.0, np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, k]))
    rng = np.random.default_rng(7)
    for _ in range(10):
        r = rng.normal(scale=1e-7, size=3)
        om = np.array([rng.uniform(0, 2 * np.pi), rng.uniform(0.2, np.pi - 0.2),
                       rng.uniform(0, 2 * np.pi)])
        u, jac = pw.field(r)
        chi = susceptibility_lab(prolate_props, om)
        from ellicos.particle import susceptibility_lab_derivatives as dlab

        f_cons, f_rad = _generalized_forces_core(chi, dlab(prolate_props, om), u, jac, HBAR, HBAR)
        # SI wrench route for the torque vector
        E = u
        w = force_torque(prolate_props, om, E, jac, k)
        scale = np.abs(w.torque_radiation).max() + np.abs(w.torque_conservative).max()
        assert abs(w.torque @ np.array([1.0, 0, 0])) < 1e-12 * scale
        # radiation pressure pushes along the propagation direction
        assert f_rad[2] > 0


def test_radiation_scaling_with_volume(prolate_spec, generic_setup):
    """Radiation terms scale as V^2 k^3 at fixed shape ratios and chi."""
    import dataclasses

    from ellicos.particle import ParticleSpec, particle_properties

    rng = np.random.default_rng(8)
    r, om, b = random_state(rng)
    k = generic_setup.tweezer.wavenumber
    E, jac = total_field(generic_setup, r, om @ np.zeros((3, 2)) if False else b)

    s = 1.3
    spec2 = ParticleSpec(tuple(np.array(prolate_spec.diameters) * s),
                         prolate_spec.permittivity, prolate_spec.density)
    p1 = particle_properties(prolate_spec)
    p2 = particle_properties(spec2)
    # same chi (shape ratios unchanged)
    assert np.allclose(p1.susceptibility, p2.susceptibility, rtol=1e-9)
    w1 = force_torque(p1, om, E, jac, k)
    w2 = force_torque(p2, om, E, jac, k)
    assert np.allclose(w2.force_radiation, s**6 * w1.force_radiation, rtol=1e-9)
    assert np.allclose(w2.torque_radiation, s**6 * w1.torque_radiation, rtol=1e-9)
    assert np.allclose(w2.force_conservative, s**3 * w1.force_conservative, rtol=1e-9)


def test_scattered_power_properties(prolate_props, generic_setup):
    k = generic_setup.tweezer.wavenumber
    w_l = generic_setup.tweezer.omega
    om = np.array([0.3, 1.4, 2.0])
    assert scattered_power(prolate_props, om, np.zeros(3), k, w_l) == 0.0
    e_field = np.array([1.0 + 2j, 0.5, -1j]) * 1e5
    p1 = scattered_power(prolate_props, om, e_field, k, w_l)
    p2 = scattered_power(prolate_props, om, 2 * e_field, k, w_l)
    assert p2 == pytest.approx(4 * p1, rel=1e-12)


def sphere_quadrature_power(props, om, e_field, k, omega_laser, n_nodes=40):
    """Independent oracle: polarization-summed quadrature over emission directions."""
    chi = susceptibility_lab(props, om)
    chi_e = chi @ np.asarray(e_field, dtype=complex)
    mu, wts = np.polynomial.legendre.leggauss(n_nodes)
    phis = 2 * np.pi * np.arange(n_nodes) / n_nodes
    total = 0.0
    for m, wt in zip(mu, wts):
        s = np.sqrt(1 - m**2)
        for phi in phis:
            n = np.array([s * np.cos(phi), s * np.sin(phi), m])
            t1 = np.cross(n, [0.0, 0.0, 1.0])
            if np.linalg.norm(t1) < 1e-9:
                t1 = np.cross(n, [1.0, 0.0, 0.0])
            t1 /= np.linalg.norm(t1)
            t2 = np.cross(n, t1)
            amp = abs(np.vdot(t1, chi_e)) ** 2 + abs(np.vdot(t2, chi_e)) ** 2
            total += wt * (2 * np.pi / n_nodes) * amp
    # hbar omega * sum |L|^2 with the monitoring normalization
    return omega_laser * (EPS0 * k**3 / 2) * (props.volume / (4 * np.pi)) ** 2 * total


def test_scattered_power_vs_sphere_quadrature(prolate_props, generic_setup):
    rng = np.random.default_rng(9)
    k = generic_setup.tweezer.wavenumber
    w_l = generic_setup.tweezer.omega
    for _ in range(3):
        om = np.array([rng.uniform(0, 2 * np.pi), rng.uniform(0.2, np.pi - 0.2),
                       rng.uniform(0, 2 * np.pi)])
        e_field = (rng.normal(size=3) + 1j * rng.normal(size=3)) * 1e5
        closed = scattered_power(prolate_props, om, e_field, k, w_l)
        quad = sphere_quadrature_power(prolate_props, om, e_field, k, w_l)
        assert closed == pytest.approx(quad, rel=1e-6)


def test_effective_masses(prolate_props):
    m = effective_masses(prolate_props)
    assert np.allclose(m[:3], prolate_props.mass)
    assert np.allclose(m[3:], prolate_props.inertia)
    assert COORDS == ("x", "y", "z", "alpha", "beta", "gamma")


def test_generalized_radiation_force_single(prolate_props, generic_setup):
    rng = np.random.default_rng(10)
    r, om, b = random_state(rng)
    _, f_rad = generalized_forces(generic_setup, prolate_props, r, om, b)
    assert generalized_radiation_force(generic_setup, prolate_props, r, om, b, "z") == f_rad[2]

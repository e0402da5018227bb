import numpy as np
import pytest
from scipy.integrate import dblquad

from ellicos.optics import (
    CavityConfig,
    OpticalSetup,
    PlaneWaveField,
    TweezerConfig,
    cavity_mode,
    drive_amplitude,
    mode_field,
    polarization_basis,
    total_field,
    tweezer_mode,
)


@pytest.fixture(scope="module")
def tweezer():
    return TweezerConfig(0.1, 1.6e-6, 1.3e-6, 1550e-9, np.pi / 6, 0.3)


@pytest.fixture(scope="module")
def cavity():
    return CavityConfig(3e-3, 40e-6, 0.4, 2e6, 1.2, -2e6)


def test_tweezer_origin(tweezer):
    f, _ = tweezer_mode(tweezer, np.zeros(3))
    assert f == pytest.approx(1.0)


def test_tweezer_on_axis(tweezer):
    z = 2.3e-6
    zr = tweezer.rayleigh_range
    f, _ = tweezer_mode(tweezer, (0.0, 0.0, z))
    assert abs(f) == pytest.approx(1 / np.sqrt(1 + z**2 / zr**2), rel=1e-12)
    expected_phase = tweezer.wavenumber * z - np.arctan(z / zr)
    assert np.angle(f) == pytest.approx(np.angle(np.exp(1j * expected_phase)), abs=1e-12)


def test_tweezer_gradient_fd(tweezer):
    rng = np.random.default_rng(1)
    for _ in range(5):
        r = rng.normal(scale=0.5e-6, size=3)
        _, grad = tweezer_mode(tweezer, r)
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1e-10
            fd = (tweezer_mode(tweezer, r + e)[0] - tweezer_mode(tweezer, r - e)[0]) / 2e-10
            assert abs(fd - grad[i]) < 1e-6 * np.abs(grad).max()


def test_cavity_origin_and_node(tweezer, cavity):
    k = tweezer.wavenumber
    f, _ = cavity_mode(cavity, k, np.zeros(3))
    assert f == pytest.approx(np.cos(cavity.phase), rel=1e-12)
    import dataclasses

    node = dataclasses.replace(cavity, phase=np.pi / 2)
    f0, _ = cavity_mode(node, k, np.zeros(3))
    assert abs(f0) < 1e-15


def test_cavity_standing_wave_period(tweezer, cavity):
    k = tweezer.wavenumber
    axis = np.array([np.sin(cavity.theta), np.cos(cavity.theta), 0.0])
    r0 = np.array([0.1e-6, -0.2e-6, 0.05e-6])
    f0, _ = cavity_mode(cavity, k, r0)
    f_half, _ = cavity_mode(cavity, k, r0 + np.pi / k * axis)
    # half a period flips the standing-wave factor; envelope barely moves
    assert f_half == pytest.approx(-f0, rel=1e-3)
    f_full, _ = cavity_mode(cavity, k, r0 + 2 * np.pi / k * axis)
    assert f_full == pytest.approx(f0, rel=1e-3)


def test_cavity_gradient_fd(tweezer, cavity):
    rng = np.random.default_rng(2)
    k = tweezer.wavenumber
    for _ in range(5):
        r = rng.normal(scale=0.5e-6, size=3)
        _, grad = cavity_mode(cavity, k, r)
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1e-10
            fd = (cavity_mode(cavity, k, r + e)[0] - cavity_mode(cavity, k, r - e)[0]) / 2e-10
            assert abs(fd - grad[i]) < 1e-6 * max(np.abs(grad).max(), k)


def test_polarization_basis_invariants():
    rng = np.random.default_rng(3)
    for _ in range(20):
        psi, zeta, theta = rng.uniform(0, np.pi / 4), rng.uniform(-1, 1), rng.uniform(0, np.pi)
        bas = polarization_basis(psi, zeta, theta)
        assert abs(np.vdot(bas.e_t, bas.e_t) - 1) < 1e-14
        assert abs(bas.e_t1 @ bas.e_t2) < 1e-14
        assert abs(bas.e_1 @ bas.e_2) < 1e-14
        assert np.allclose(np.cross(bas.e_2, bas.e_1), bas.cavity_axis, atol=1e-15)
        assert abs(bas.cavity_axis @ bas.e_1) < 1e-14


def test_transverse_power_independent_of_z(tweezer):
    def power_at(z):
        val, _ = dblquad(
            lambda y, x: abs(tweezer_mode(tweezer, (x, y, z))[0]) ** 2,
            -6 * tweezer.waist_x, 6 * tweezer.waist_x,
            -6 * tweezer.waist_y, 6 * tweezer.waist_y,
            epsabs=1e-18,
        )
        return val

    p0 = power_at(0.0)
    p1 = power_at(1.5 * tweezer.rayleigh_range)
    assert p1 == pytest.approx(p0, rel=1e-6)
    assert p0 == pytest.approx(np.pi * tweezer.waist_x * tweezer.waist_y / 2, rel=1e-6)


def test_drive_amplitude_scaling(tweezer, cavity):
    import dataclasses

    e1 = drive_amplitude(tweezer, cavity)
    e4 = drive_amplitude(dataclasses.replace(tweezer, power=0.4), cavity)
    assert e4 == pytest.approx(2 * e1, rel=1e-12)
    assert drive_amplitude(dataclasses.replace(tweezer, power=0.0), cavity) == 0.0


def test_drive_amplitude_regression_near_sphere():
    # frozen from direct evaluation with the near-sphere beam parameters
    tw = TweezerConfig(0.1, 800e-9, 650e-9, 1550e-9, 0.0)
    cav = CavityConfig(1.5e-3, 30e-6, 3 * np.pi / 8, 6e5, np.pi / 4, 0.0)
    assert drive_amplitude(tw, cav) == pytest.approx(58125.58623121623, rel=1e-12)


def test_field_additivity_and_jacobian(prolate_props, tweezer, cavity):
    setup = OpticalSetup.assemble(tweezer, cavity, prolate_props)
    rng = np.random.default_rng(4)
    r = rng.normal(scale=0.3e-6, size=3)
    b = np.array([0.4 - 0.7j, -0.2 + 0.1j])
    u_full, _ = mode_field(setup, r, b)
    u_t, _ = mode_field(setup, r, np.zeros(2, complex))
    import dataclasses

    dark = dataclasses.replace(setup, epsilon_t=0.0)
    u_c, _ = mode_field(dark, r, b)
    assert np.allclose(u_full, u_t + u_c, rtol=0, atol=1e-12 * np.abs(u_full).max())

    # pure-cavity field: only the driven mode appears
    u_c1, _ = mode_field(dark, r, np.array([1.0, 0.0]))
    fc, _ = cavity_mode(cavity, tweezer.wavenumber, r)
    assert np.allclose(u_c1, setup.basis.e_1 * fc, atol=1e-15)

    # jacobian against central differences at random points
    for _ in range(20):
        r = rng.normal(scale=0.4e-6, size=3)
        E, jac = total_field(setup, r, b)
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1e-10
            fd = (total_field(setup, r + e, b)[0] - total_field(setup, r - e, b)[0]) / 2e-10
            assert np.abs(fd - jac[i]).max() < 1e-6 * np.abs(jac).max()


def test_plane_wave_field():
    pw = PlaneWaveField(2.0, np.array([1.0, 0, 0]), np.array([0, 0, 4e6]))
    r = np.array([0.1e-6, 0.2e-6, 0.3e-6])
    u, jac = pw.field(r)
    assert abs(u[0]) == pytest.approx(2.0)
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1e-10
        fd = (pw.field(r + e)[0] - pw.field(r - e)[0]) / 2e-10
        assert np.abs(fd - jac[i]).max() < 1e-5 * np.abs(u).max() * 4e6


def test_invalid_configs():
    with pytest.raises(ValueError):
        TweezerConfig(0.1, 1e-6, 1e-6, 1550e-9, np.pi / 2)
    with pytest.raises(ValueError):
        TweezerConfig(-0.1, 1e-6, 1e-6, 1550e-9, 0.1)
    with pytest.raises(ValueError):
        CavityConfig(3e-3, -1e-6, 0.0, 2e6, 0.0, 0.0)

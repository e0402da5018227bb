import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ellicos.constants import HBAR
from ellicos.particle import (
    InvalidParticleError,
    ParticleSpec,
    SingularOrientationError,
    angular_momentum_lab,
    depolarization_factors,
    depolarization_factors_carlson,
    euler_rates_from_momenta,
    inertia_matrix,
    kinetic_energy,
    kinetic_energy_gradients,
    momenta_from_euler_rates,
    particle_properties,
    quantum_potential,
    rotation_matrix,
    susceptibility_body,
    susceptibility_lab,
    susceptibility_lab_derivatives,
)


def random_spec(rng):
    d = np.sort(rng.uniform(20e-9, 200e-9, 3))
    return ParticleSpec(tuple(d), rng.uniform(1.2, 4.0), 2200.0)


def test_sphere_depolarization():
    spec = ParticleSpec((70e-9, 70e-9, 70e-9), 2.1, 2200.0)
    n = depolarization_factors(spec)
    assert np.allclose(n, 1 / 3, atol=1e-10)
    assert abs(sum(n) - 1) < 1e-10


def test_depolarization_sum_and_ordering():
    rng = np.random.default_rng(11)
    for _ in range(100):
        spec = random_spec(rng)
        n = depolarization_factors(spec)
        assert abs(sum(n) - 1) < 1e-9
        assert all(0 < x < 1 for x in n)
        # smaller diameter -> larger factor
        assert n[0] >= n[1] >= n[2]


def test_depolarization_matches_elliptic_closed_form(prolate_spec):
    nq = depolarization_factors(prolate_spec)
    nc = depolarization_factors_carlson(prolate_spec)
    assert np.allclose(nq, nc, rtol=1e-9)
    assert nq[0] > nq[1] > nq[2]


def test_invalid_specs():
    with pytest.raises(InvalidParticleError):
        ParticleSpec((-1e-9, 2e-9, 3e-9), 2.1, 2200.0)
    with pytest.raises(InvalidParticleError):
        ParticleSpec((3e-9, 2e-9, 1e-9), 2.1, 2200.0)
    with pytest.raises(InvalidParticleError):
        ParticleSpec((1e-9, 2e-9, 3e-9), 0.9, 2200.0)


def test_susceptibility_sphere_clausius_mossotti(sphere_spec):
    chi = susceptibility_body(sphere_spec)
    eps = sphere_spec.permittivity
    expect = 3 * (eps - 1) / (eps + 2)
    assert np.allclose(chi, expect, rtol=1e-9)


def test_susceptibility_vanishing_contrast():
    spec = ParticleSpec((40e-9, 60e-9, 140e-9), 1.0 + 1e-9, 2200.0)
    chi = susceptibility_body(spec)
    assert all(abs(c) < 1e-8 for c in chi)


def test_susceptibility_ordering(prolate_spec):
    chi = susceptibility_body(prolate_spec)
    assert chi[0] < chi[1] < chi[2]


def test_props_volume_mass_inertia(prolate_spec):
    props = particle_properties(prolate_spec)
    la, lb, lc = prolate_spec.diameters
    assert np.isclose(props.volume, np.pi * la * lb * lc / 6, rtol=1e-14)
    assert np.isclose(props.mass, 2200.0 * props.volume, rtol=1e-14)
    m = props.mass
    assert np.isclose(props.inertia[0], m * (lb**2 + lc**2) / 20, rtol=1e-14)
    assert np.isclose(props.inertia[1], m * (la**2 + lc**2) / 20, rtol=1e-14)
    assert np.isclose(props.inertia[2], m * (la**2 + lb**2) / 20, rtol=1e-14)


def test_rotation_matrix_basics():
    assert np.allclose(rotation_matrix((0, 0, 0)), np.eye(3), atol=1e-15)
    # pure z rotation maps e_x to e_y
    r = rotation_matrix((np.pi / 2, 0, 0))
    assert np.allclose(r @ [1, 0, 0], [0, 1, 0], atol=1e-15)


@given(st.tuples(st.floats(0, 2 * np.pi), st.floats(0.01, np.pi - 0.01), st.floats(0, 2 * np.pi)))
@settings(max_examples=50, deadline=None)
def test_rotation_orthogonality(angles):
    r = rotation_matrix(angles)
    assert np.abs(r @ r.T - np.eye(3)).max() < 1e-12
    assert abs(np.linalg.det(r) - 1) < 1e-12


def test_lab_susceptibility_eigenvalues_invariant(prolate_props):
    rng = np.random.default_rng(5)
    for _ in range(20):
        om = (rng.uniform(0, 2 * np.pi), rng.uniform(0.05, np.pi - 0.05), rng.uniform(0, 2 * np.pi))
        chi = susceptibility_lab(prolate_props, om)
        assert np.abs(chi - chi.T).max() < 1e-15
        ev = np.sort(np.linalg.eigvalsh(chi))
        assert np.allclose(ev, prolate_props.susceptibility, atol=1e-12)


def test_lab_susceptibility_sphere_isotropic(sphere_props):
    chi = susceptibility_lab(sphere_props, (0.7, 1.1, 2.3))
    assert np.allclose(chi, sphere_props.susceptibility[0] * np.eye(3), atol=1e-14)


def test_susceptibility_derivatives_match_fd(prolate_props):
    rng = np.random.default_rng(6)
    om = np.array([0.5, 1.2, 2.0])
    dchi = susceptibility_lab_derivatives(prolate_props, om)
    h = 1e-7
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (susceptibility_lab(prolate_props, om + e)
              - susceptibility_lab(prolate_props, om - e)) / (2 * h)
        assert np.abs(fd - dchi[i]).max() < 1e-7


def test_kinetic_energy_zero_momenta(prolate_props):
    assert kinetic_energy(prolate_props, (0.3, 1.0, 0.2), np.zeros(3), np.zeros(3)) == 0.0


def test_kinetic_energy_sphere_is_j_squared(sphere_props):
    rng = np.random.default_rng(7)
    om = np.array([0.4, 1.3, 2.2])
    p_om = momenta_from_euler_rates(sphere_props, om, rng.normal(size=3) * 1e4)
    j = angular_momentum_lab(sphere_props, om, p_om)
    i0 = sphere_props.inertia[0]
    assert np.isclose(kinetic_energy(sphere_props, om, p_om), np.dot(j, j) / (2 * i0), rtol=1e-10)


def test_kinetic_energy_quadratic_form(prolate_props):
    rng = np.random.default_rng(8)
    for _ in range(10):
        om = np.array([rng.uniform(0, 2 * np.pi), rng.uniform(0.1, np.pi - 0.1),
                       rng.uniform(0, 2 * np.pi)])
        p_om = rng.normal(size=3) * 1e-29
        ke = kinetic_energy(prolate_props, om, p_om)
        m = inertia_matrix(prolate_props, om)
        assert np.isclose(ke, 0.5 * p_om @ np.linalg.solve(m, p_om), rtol=1e-10)


def test_kinetic_energy_gauge_shift(prolate_props):
    om = np.array([0.7, 1.1, 0.9])
    p_om = np.array([1.0, -2.0, 0.5]) * 1e-29
    e0 = kinetic_energy(prolate_props, om, p_om)
    e1 = kinetic_energy(prolate_props, om + np.array([2 * np.pi, 0, 2 * np.pi]), p_om)
    assert np.isclose(e0, e1, rtol=1e-12)


def test_kinetic_energy_singular(prolate_props):
    with pytest.raises(SingularOrientationError):
        kinetic_energy(prolate_props, (0.1, 1e-9, 0.3), np.ones(3) * 1e-30)


def test_kinetic_gradients_match_fd(prolate_props):
    om = np.array([0.4, 1.2, 2.5])
    p_om = np.array([2.0, -1.0, 0.7]) * 1e-29
    g_om, g_p = kinetic_energy_gradients(prolate_props, om, p_om)
    assert g_om[0] == 0.0
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1e-7
        fd = (kinetic_energy(prolate_props, om + e, p_om)
              - kinetic_energy(prolate_props, om - e, p_om)) / 2e-7
        assert np.isclose(g_om[i], fd, rtol=1e-6, atol=1e-40)
        hp = 1e-7 * np.abs(p_om).max()
        ep = np.zeros(3)
        ep[i] = hp
        fdp = (kinetic_energy(prolate_props, om, p_om + ep)
               - kinetic_energy(prolate_props, om, p_om - ep)) / (2 * hp)
        assert np.isclose(g_p[i], fdp, rtol=1e-6)


def test_momenta_trivial_cases(prolate_props):
    om = np.array([0.3, np.pi / 2, 0.9])
    assert np.allclose(momenta_from_euler_rates(prolate_props, om, np.zeros(3)), 0.0)
    # pure gamma rate at beta = pi/2: p_gamma = I_c * rate, p_alpha = 0
    p = momenta_from_euler_rates(prolate_props, om, [0.0, 0.0, 3e4])
    assert np.isclose(p[2], prolate_props.inertia[2] * 3e4, rtol=1e-12)
    # limited only by cos(pi/2) rounding
    assert abs(p[0]) < 1e-15 * abs(p[2])


@given(st.floats(0.02, np.pi - 0.02), st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi),
       st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_momentum_map_roundtrip(beta, alpha, gamma, seed):
    props = particle_properties(ParticleSpec((40e-9, 60e-9, 140e-9), 2.1, 2200.0))
    rng = np.random.default_rng(seed)
    rates = rng.normal(size=3) * 1e5
    om = np.array([alpha, beta, gamma])
    p = momenta_from_euler_rates(props, om, rates)
    back = euler_rates_from_momenta(props, om, p)
    assert np.allclose(back, rates, rtol=1e-10, atol=1e-10 * np.abs(rates).max() + 1e-30)


def test_angular_momentum_projections(prolate_props):
    rng = np.random.default_rng(9)
    om = np.array([0.8, 1.3, 2.1])
    p_om = momenta_from_euler_rates(prolate_props, om, rng.normal(size=3) * 1e4)
    j = angular_momentum_lab(prolate_props, om, p_om)
    e_xi = np.array([-np.sin(om[0]), np.cos(om[0]), 0.0])
    n3 = rotation_matrix(om)[:, 2]
    assert np.isclose(j[2], p_om[0], rtol=1e-10)
    assert np.isclose(j @ e_xi, p_om[1], rtol=1e-10)
    assert np.isclose(j @ n3, p_om[2], rtol=1e-10)


def test_quantum_potential_symmetries():
    spec = ParticleSpec((40e-9, 60e-9, 140e-9), 2.1, 2200.0)
    props = particle_properties(spec)
    om = np.array([0.3, 1.1, 0.7])

    # swapping I_a <-> I_b while shifting gamma by pi/2 leaves it unchanged
    import dataclasses

    swapped = dataclasses.replace(props, inertia=(props.inertia[1], props.inertia[0],
                                                  props.inertia[2]))
    v1 = quantum_potential(props, om)
    v2 = quantum_potential(swapped, om + np.array([0, 0, np.pi / 2]))
    assert np.isclose(v1, v2, rtol=1e-12)

    # symmetric rotor: independent of gamma, and -hbar^2/(4I) at beta = pi/2
    sym = dataclasses.replace(props, inertia=(props.inertia[0], props.inertia[0],
                                              props.inertia[2]))
    vals = [quantum_potential(sym, (0.1, 1.2, g)) for g in np.linspace(0, 2 * np.pi, 7)]
    assert np.ptp(vals) < 1e-12 * abs(vals[0])
    v = quantum_potential(sym, (0.0, np.pi / 2, 0.0))
    assert np.isclose(v, -HBAR**2 / (4 * sym.inertia[0]), rtol=1e-12)


def test_degenerate_diameters_snap():
    a = 70e-9
    spec = ParticleSpec((a, a * (1 + 1e-13), a * (1 + 2e-13)), 2.1, 2200.0)
    n = depolarization_factors(spec)
    assert np.allclose(n, 1 / 3, atol=1e-10)

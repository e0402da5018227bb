import numpy as np
import pytest

from ellicos.optics import CavityConfig, OpticalSetup, TweezerConfig
from ellicos.particle import ParticleSpec, particle_properties


@pytest.fixture(scope="session")
def prolate_spec():
    return ParticleSpec((40e-9, 60e-9, 140e-9), 2.1, 2200.0)


@pytest.fixture(scope="session")
def prolate_props(prolate_spec):
    return particle_properties(prolate_spec)


@pytest.fixture(scope="session")
def sphere_spec():
    return ParticleSpec((70e-9, 70e-9, 70e-9), 2.1, 2200.0)


@pytest.fixture(scope="session")
def sphere_props(sphere_spec):
    return particle_properties(sphere_spec)


@pytest.fixture(scope="session")
def prolate_tweezer():
    # prolate trend-sweep beam: P = 0.1 W, waists 1.6/1.3 um, default wavelength
    return TweezerConfig(0.1, 1.6e-6, 1.3e-6, 1550e-9, np.pi / 6, 0.0)


@pytest.fixture(scope="session")
def prolate_cavity():
    return CavityConfig(3e-3, 40e-6, 0.0, 2e6, np.pi / 2, -2.4e6)


@pytest.fixture(scope="session")
def prolate_setup(prolate_tweezer, prolate_cavity, prolate_props):
    return OpticalSetup.assemble(prolate_tweezer, prolate_cavity, prolate_props)


@pytest.fixture(scope="session")
def generic_setup(prolate_props):
    """Setup with every symmetry-breaking angle nonzero."""
    tw = TweezerConfig(0.1, 1.6e-6, 1.3e-6, 1550e-9, np.pi / 6, 0.3)
    cav = CavityConfig(3e-3, 40e-6, 0.4, 2e6, np.pi / 2 - 0.2, -2.0e6)
    return OpticalSetup.assemble(tw, cav, prolate_props)

"""Physical constants (SI), taken from scipy's CODATA table."""

from scipy import constants as _c

HBAR = _c.hbar            # J s
C_LIGHT = _c.c            # m / s
EPS0 = _c.epsilon_0       # F / m
K_B = _c.k                # J / K
AMU = _c.atomic_mass      # kg

HELIUM_MASS_AMU = 4.002602

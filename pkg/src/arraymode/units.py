"""Unit system and the fixed dipole orientation.

Everything in this package is expressed in natural optical units:

    wavelength   lambda = 1   (all lengths are in units of lambda)
    wavenumber   k = 2*pi
    linewidth    gamma = 1    (all rates are in units of gamma)

The dipole constants (d, hbar, eps0) are absorbed into the field
normalization: incident and scattered fields share one scale fixed by
requiring that the field a dipole radiates onto a neighbor equals the
interaction-matrix coupling (see arraymode.dipoles).

The atomic transition is circularly polarized in the array plane,
e_d = (e_x + i e_y)/sqrt(2), fixed once for the whole package.
"""

import numpy as np

WAVELENGTH = 1.0
K = 2.0 * np.pi
GAMMA = 1.0

# Circular in-plane dipole orientation, e_d . e_z = 0, |e_d| = 1.
E_D = np.array([1.0, 1.0j, 0.0]) / np.sqrt(2.0)


def dipole_orientation() -> np.ndarray:
    """Return a copy of the fixed circular dipole unit vector."""
    return E_D.copy()

"""Multi-beam mode matching and coupled-dipole scattering for 2D atomic arrays.

Design a multi-beam optical mode matched to the diffraction pattern of a
2D atomic lattice and quantify the resulting light-matter interface
efficiency r0, both analytically (infinite- and finite-array theory) and
from first-principles coupled-dipole scattering, including numerical
aperture limits, waist and spacing optimization, atom-number scaling,
and robustness to positioning errors.

Units: lengths in the transition wavelength (lambda = 1, k = 2 pi),
rates in the single-atom linewidth (gamma = 1).
"""

__version__ = "0.1.0"

from .diffraction import (
    ModeCoefficient,
    OrderSet,
    first_shell_orders,
    gamma_order,
    gamma_zero,
    mode_coefficients,
    r0_infinite,
    radiative_orders,
)
from .lattice import (
    SQUARE,
    TRIANGULAR,
    AtomArray,
    LatticeSpec,
    apply_disorder,
    apply_shift,
    build_patch,
    reciprocal_vector,
)
from .results import InterfaceResult

__all__ = [
    "AtomArray",
    "InterfaceResult",
    "LatticeSpec",
    "ModeCoefficient",
    "OrderSet",
    "SQUARE",
    "TRIANGULAR",
    "apply_disorder",
    "apply_shift",
    "build_patch",
    "first_shell_orders",
    "gamma_order",
    "gamma_zero",
    "mode_coefficients",
    "r0_infinite",
    "radiative_orders",
    "reciprocal_vector",
    "__version__",
]

"""Infinite-array diffraction theory.

A uniformly excited 2D lattice radiates into the plane waves whose
in-plane wavevector is a reciprocal lattice vector q_m with |q_m| < k.
Each radiative order carries a decay rate

    Gamma_m = Gamma_0 * (1 - |q_m . e_d|^2 / k^2) / cos(theta_m),
    Gamma_0 = gamma * (3 / 4 pi) * lambda^2 / A_cell,

with cos(theta_m) = sqrt(1 - |q_m|^2/k^2) and A_cell the unit-cell
area.  For the fixed circular dipole, |v . e_d|^2 = |v|^2 / 2 for any
real in-plane v.  The ideal interface efficiency of a target mode that
collects a subset of the radiative orders is the ratio of collected to
total radiated rate, r0 = Gamma / (Gamma + gamma_loss).

Note on Gamma_0: the cell-area normalization (a^2 sin psi) is what the
dyadic Green's function gives for a general Bravais lattice; it reduces
to the familiar lambda^2/a^2 form for the square lattice.  Efficiencies
are ratios of rates, so they do not depend on this overall scale.
"""

from dataclasses import dataclass, field

import numpy as np

from .lattice import LatticeSpec, reciprocal_vector
from .results import INFINITE_THEORY, InterfaceResult
from .units import E_D, GAMMA, K

# Orders closer to grazing than this in cos(theta) are excluded from
# order sets (the 1/cos divergence makes their rate meaningless).
GRAZING_COS = 1e-6

LABEL_ALL = "all_radiative"
LABEL_FIRST_SHELL = "first_shell"
LABEL_CUSTOM = "custom"


@dataclass(frozen=True)
class DiffractionOrder:
    """One radiative diffraction order of the lattice."""

    m: tuple
    q: np.ndarray
    cos_theta: float

    @property
    def theta(self) -> float:
        return float(np.arcsin(min(np.linalg.norm(self.q) / K, 1.0)))

    @property
    def phi(self) -> float:
        # Azimuth of the zeroth order is defined as 0.
        if self.m == (0, 0):
            return 0.0
        return float(np.arctan2(self.q[1], self.q[0]))

    @property
    def radiative(self) -> bool:
        return self.cos_theta > 0.0


@dataclass
class OrderSet:
    """A set of radiative orders used as (part of) a target mode."""

    lattice: LatticeSpec
    orders: list
    label: str = LABEL_CUSTOM
    k_shift: np.ndarray = field(default_factory=lambda: np.zeros(2))
    grazing: list = field(default_factory=list)

    @property
    def includes_zero(self) -> bool:
        return any(o.m == (0, 0) for o in self.orders)

    def ms(self) -> list:
        return [o.m for o in self.orders]

    def __len__(self) -> int:
        return len(self.orders)


def gamma_zero(lattice: LatticeSpec) -> float:
    """Decay rate of the uniform mode into the zeroth order, units gamma."""
    return GAMMA * (3.0 / (4.0 * np.pi)) / lattice.cell_area


def _cos_theta(lattice: LatticeSpec, m, k_shift) -> float:
    q = reciprocal_vector(lattice, m) + np.asarray(k_shift, dtype=float)
    s2 = float(q @ q) / K**2
    return float(np.sqrt(1.0 - s2)) if s2 < 1.0 else -1.0


def radiative_orders(lattice: LatticeSpec, k_shift=(0.0, 0.0)) -> OrderSet:
    """Enumerate all orders m with |q_m + k_shift| < k.

    Bounded search over |m1|, |m2| <= ceil(a/lambda) + 1, which covers
    every radiative order for in-zone k_shift.  Orders within GRAZING_COS
    of the light cone are excluded and reported in the grazing list.
    """
    k_shift = np.asarray(k_shift, dtype=float)
    mmax = int(np.ceil(lattice.spacing)) + 1
    found, grazing = [], []
    for m1 in range(-mmax, mmax + 1):
        for m2 in range(-mmax, mmax + 1):
            m = (m1, m2)
            ct = _cos_theta(lattice, m, k_shift)
            if ct <= 0.0:
                continue
            q = reciprocal_vector(lattice, m) + k_shift
            order = DiffractionOrder(m=m, q=q, cos_theta=ct)
            if ct < GRAZING_COS:
                grazing.append(order)
            else:
                found.append(order)
    found.sort(key=lambda o: (round(np.linalg.norm(o.q), 12), o.phi, o.m))
    return OrderSet(
        lattice=lattice, orders=found, label=LABEL_ALL, k_shift=k_shift, grazing=grazing
    )


def first_shell_orders(lattice: LatticeSpec) -> OrderSet:
    """The zeroth order plus the closest ring of radiative orders.

    This is the standard target-mode order set: for the triangular
    lattice in 2/sqrt(3) < a < 2 it holds 7 orders, for the square
    lattice in 1 < a < sqrt(2) it holds 5.
    """
    full = radiative_orders(lattice)
    radii = sorted({round(float(np.linalg.norm(o.q)), 9) for o in full.orders})
    keep = set(radii[:2]) if len(radii) > 1 else set(radii)
    orders = [o for o in full.orders if round(float(np.linalg.norm(o.q)), 9) in keep]
    return OrderSet(lattice=lattice, orders=orders, label=LABEL_FIRST_SHELL)


def gamma_order(lattice: LatticeSpec, m, k_shift=(0.0, 0.0)) -> float:
    """Decay rate Gamma_m(k_shift) of one diffraction order, units gamma.

    Raises if the order is evanescent or grazing at the given k_shift.
    """
    ct = _cos_theta(lattice, m, k_shift)
    if ct <= 0.0:
        raise ValueError(f"order {m} is evanescent at k_shift={tuple(k_shift)}")
    if ct < GRAZING_COS:
        raise ValueError(f"order {m} is grazing (cos theta = {ct:.2e}); rate diverges")
    q = reciprocal_vector(lattice, m) + np.asarray(k_shift, dtype=float)
    # Circular dipole: |q . e_d|^2 = |q|^2 / 2.
    pol = 1.0 - 0.5 * float(q @ q) / K**2
    return gamma_zero(lattice) * pol / ct


def polarization_vectors(theta: float, phi: float, direction: str = "+"):
    """s and p unit polarization vectors of a plane wave at (theta, phi).

    Forward (+z) propagation uses
        e_p+ = (cos t cos f, cos t sin f, -sin t),  e_s+ = (-sin f, cos f, 0);
    the backward basis is the z-mirror of the forward one (e_s unchanged,
    e_p z-component flipped).  Physical results do not depend on the sign
    choices; they are fixed for reproducibility.
    """
    st, ct = np.sin(theta), np.cos(theta)
    sf, cf = np.sin(phi), np.cos(phi)
    e_s = np.array([-sf, cf, 0.0])
    e_p = np.array([ct * cf, ct * sf, -st])
    if direction == "-":
        e_p = e_p * np.array([1.0, 1.0, -1.0])
    return e_s, e_p


@dataclass(frozen=True)
class ModeCoefficient:
    """Superposition coefficient of one (order, polarization) beam."""

    m: tuple
    mu: str  # "s" or "p"
    direction: str  # "+" or "-"
    c: complex
    e: np.ndarray  # real polarization unit vector (lab frame)
    theta: float
    phi: float


def mode_coefficients(orders: OrderSet, direction: str = "+") -> list:
    """Target-mode coefficients c_m_mu = (e_m_mu . e_d) / sqrt(cos theta_m).

    These maximize the drive of the circular collective dipole, and obey
    sum_mu |c_m_mu|^2 = Gamma_m / Gamma_0 for every radiative order.  The
    backward (direction "-") coefficients coincide with the forward ones
    because e_d has no z component.
    """
    coeffs = []
    for o in orders.orders:
        e_s, e_p = polarization_vectors(o.theta, o.phi, direction)
        root = np.sqrt(o.cos_theta)
        for mu, e in (("s", e_s), ("p", e_p)):
            c = complex(e @ E_D) / root
            coeffs.append(
                ModeCoefficient(
                    m=o.m, mu=mu, direction=direction, c=c, e=e,
                    theta=o.theta, phi=o.phi,
                )
            )
    return coeffs


def r0_infinite(lattice: LatticeSpec, target: OrderSet) -> InterfaceResult:
    """Ideal efficiency of a target mode collecting the given orders.

    Gamma sums the rates of the target orders, gamma_loss those of every
    other radiative order; r0 = Gamma / (Gamma + gamma_loss) = 1 exactly
    when the target covers the whole radiative set.
    """
    all_orders = radiative_orders(lattice)
    target_ms = set(target.ms())
    if not target_ms <= {o.m for o in all_orders.orders}:
        raise ValueError("target contains a non-radiative order")
    gamma = sum(gamma_order(lattice, m) for m in sorted(target_ms))
    total = sum(gamma_order(lattice, o.m) for o in all_orders.orders)
    loss = total - gamma
    return InterfaceResult(
        r0=gamma / total,
        gamma=gamma,
        gamma_loss=loss,
        delta_res=0.0,
        source=INFINITE_THEORY,
        diagnostics={"n_orders_target": len(target_ms), "n_orders_total": len(all_orders)},
    )


def first_shell_angle(lattice: LatticeSpec) -> float:
    """Diffraction angle of the first shell, radians.

    arcsin(2 lambda / (sqrt(3) a)) for triangular, arcsin(lambda / a)
    for square; monotonically decreasing in the spacing.
    """
    shell = [o for o in first_shell_orders(lattice).orders if o.m != (0, 0)]
    if not shell:
        raise ValueError("no radiative shell beyond the zeroth order")
    return shell[0].theta

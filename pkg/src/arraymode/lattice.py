"""Lattice geometry, reciprocal vectors, and finite atom patches.

A 2D Bravais lattice in the z = 0 plane with primitive vectors
a1 = a (1, 0) and a2 = a (cos psi, sin psi), where psi = pi/3 for the
triangular lattice and psi = pi/2 for the square one.  Finite arrays
are disk-shaped cuts of the ideal lattice, optionally rigidly shifted
or perturbed by Gaussian position disorder.
"""

from dataclasses import dataclass, field

import numpy as np

TRIANGULAR = "triangular"
SQUARE = "square"

_ANGLES = {TRIANGULAR: np.pi / 3.0, SQUARE: np.pi / 2.0}


@dataclass(frozen=True)
class LatticeSpec:
    """Lattice kind and spacing (in units of the wavelength).

    The lattice angle psi is fixed by the kind: pi/3 (triangular) or
    pi/2 (square).
    """

    kind: str
    spacing: float

    def __post_init__(self):
        if self.kind not in _ANGLES:
            raise ValueError(f"unknown lattice kind {self.kind!r}")
        if not self.spacing > 0:
            raise ValueError("lattice spacing must be positive")

    @property
    def psi(self) -> float:
        return _ANGLES[self.kind]

    @property
    def cell_area(self) -> float:
        """Primitive-cell area a^2 sin(psi)."""
        return self.spacing**2 * np.sin(self.psi)

    def primitive_vectors(self) -> np.ndarray:
        """(2, 2) array with rows a1, a2."""
        a, psi = self.spacing, self.psi
        return np.array([[a, 0.0], [a * np.cos(psi), a * np.sin(psi)]])

    def site(self, n1, n2) -> np.ndarray:
        """In-plane position of lattice site (n1, n2)."""
        a, psi = self.spacing, self.psi
        return np.stack(
            [n1 * a + n2 * a * np.cos(psi), n2 * a * np.sin(psi)], axis=-1
        )


def reciprocal_vector(lattice: LatticeSpec, m) -> np.ndarray:
    """Reciprocal lattice vector q_m for integer order m = (m1, m2).

    q_m = (2 pi / a) * (m1, -m1 cot(psi) + m2 / sin(psi)), chosen so
    that q_m . r_n is a multiple of 2 pi for every lattice site r_n.
    """
    m1, m2 = m
    a, psi = lattice.spacing, lattice.psi
    return (2.0 * np.pi / a) * np.array(
        [m1, -m1 / np.tan(psi) + m2 / np.sin(psi)]
    )


def reciprocal_basis(lattice: LatticeSpec) -> np.ndarray:
    """(2, 2) array with rows b1 = q_(1,0) and b2 = q_(0,1)."""
    return np.array(
        [reciprocal_vector(lattice, (1, 0)), reciprocal_vector(lattice, (0, 1))]
    )


@dataclass
class AtomArray:
    """A finite set of atom positions cut from a lattice.

    positions is an (N, 3) float array in units of lambda.  linear_size
    is the side L_a of the square with the same area as the patch,
    L_a = sqrt(N a^2 sin psi), used to normalize beam waists.
    """

    lattice: LatticeSpec
    positions: np.ndarray
    rng_seed: int | None = None
    indices: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]

    @property
    def linear_size(self) -> float:
        return float(np.sqrt(self.n_atoms * self.lattice.cell_area))


def build_patch(lattice: LatticeSpec, n_target: int) -> AtomArray:
    """Cut the n_target lattice sites closest to the origin (disk cut).

    Deterministic: sites are ordered by (radius, polar angle, n1, n2),
    so rebuilding with equal arguments yields bit-identical positions.
    """
    if n_target < 1:
        raise ValueError("n_target must be at least 1")
    # Bounding box generously covering a disk of n_target sites.
    radius = np.sqrt(n_target * lattice.cell_area / np.pi)
    nmax = int(np.ceil(1.8 * radius / lattice.spacing)) + 3
    n1, n2 = np.meshgrid(np.arange(-nmax, nmax + 1), np.arange(-nmax, nmax + 1))
    n1, n2 = n1.ravel(), n2.ravel()
    xy = lattice.site(n1, n2)
    r = np.hypot(xy[:, 0], xy[:, 1])
    phi = np.mod(np.arctan2(xy[:, 1], xy[:, 0]), 2.0 * np.pi)
    order = np.lexsort((n2, n1, np.round(phi, 12), np.round(r, 12)))
    take = order[:n_target]
    if len(take) < n_target:
        raise RuntimeError("enumeration box too small")  # unreachable by construction
    positions = np.zeros((n_target, 3))
    positions[:, :2] = xy[take]
    return AtomArray(
        lattice=lattice,
        positions=positions,
        indices=np.stack([n1[take], n2[take]], axis=1),
    )


def apply_shift(array: AtomArray, d) -> AtomArray:
    """Rigidly translate all atoms by the 3-vector d (beam focus stays put)."""
    d = np.asarray(d, dtype=float)
    return AtomArray(
        lattice=array.lattice,
        positions=array.positions + d[None, :],
        rng_seed=array.rng_seed,
        indices=array.indices,
    )


def apply_disorder(array: AtomArray, dr: float, seed: int) -> AtomArray:
    """Add i.i.d. Gaussian displacement, std dr per Cartesian component.

    Deterministic for a fixed seed.  dr = 0 returns an identical copy.
    """
    if dr < 0:
        raise ValueError("dr must be non-negative")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, dr, size=array.positions.shape) if dr > 0 else 0.0
    return AtomArray(
        lattice=array.lattice,
        positions=array.positions + noise,
        rng_seed=seed,
        indices=array.indices,
    )

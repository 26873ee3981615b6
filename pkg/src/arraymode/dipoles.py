"""Coupled-dipole steady state via the free-space dyadic Green's tensor.

N two-level atoms with the fixed circular orientation e_d respond
linearly to a drive field.  Projecting everything onto e_d gives the
scalar steady-state system

    (delta + i gamma/2) sigma_n + (3/2) gamma sum_{m != n} G_nm sigma_m
        = -drive_n,        drive_n = e_d^dag . E_0(r_n),

where G_nm = e_d^dag . Gbar(r_n - r_m) . e_d is the projected dyadic
Green's tensor

    Gbar(r) = (e^{ikr} / 4 pi r) [ (1 + i/kr - 1/(kr)^2) I
                                   + (-1 - 3i/kr + 3/(kr)^2) rhat rhat ],

in units lambda = 1, k = 2 pi.  The self term is the analytic
i gamma/2 (the divergent real part is dropped by convention), which is
consistent with Im G(0) = k / 6 pi of the same tensor: the single-atom
linewidth anchors the normalization.  The scattered field is

    E_sc(r) = (3/2) gamma sum_n Gbar(r - r_n) . e_d sigma_n,

so the field one dipole exerts on another equals the matrix coupling;
its plane-wave (Weyl) expansion gives the angular spectrum used for all
flux bookkeeping.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .lattice import AtomArray
from .spectrum import BACKWARD, FORWARD, AngularSpectrum, KGrid
from .units import E_D, GAMMA, K

COUPLING = 1.5 * GAMMA  # (3/2) gamma lambda in natural units


class SolverError(RuntimeError):
    """Steady-state solve failed (near-singular collective resonances)."""


def greens_dyadic(r) -> np.ndarray:
    """Outgoing free-space dyadic Green's tensor at separation r (3-vector)."""
    r = np.asarray(r, dtype=float)
    dist = np.linalg.norm(r)
    if dist <= 0.0:
        raise ValueError("Green's tensor diverges at r = 0; the self term is analytic")
    kr = K * dist
    rhat = r / dist
    outer = np.outer(rhat, rhat)
    pref = np.exp(1j * kr) / (4.0 * np.pi * dist)
    return pref * (
        (1.0 + 1j / kr - 1.0 / kr**2) * np.eye(3)
        + (-1.0 - 3j / kr + 3.0 / kr**2) * outer
    )


def greens_projected(r) -> complex:
    """e_d^dag . Gbar(r) . e_d for the fixed circular orientation."""
    g = greens_dyadic(r)
    return complex(np.conj(E_D) @ g @ E_D)


def _projected_green_pairs(diff: np.ndarray) -> np.ndarray:
    """Vectorized e_d-projected Green's function for (..., 3) separations.

    For the circular in-plane e_d the projection reads
    (Gxx + Gyy)/2 + i (Gxy - Gyx)/2; the tensor is symmetric, so only
    the isotropic and rhat-rhat parts survive.
    """
    dist = np.linalg.norm(diff, axis=-1)
    kr = K * dist
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / kr
        pref = np.exp(1j * kr) / (4.0 * np.pi * dist)
        iso = 1.0 + 1j * inv - inv**2
        aniso = -1.0 - 3j * inv + 3.0 * inv**2
        # e_d^dag (rhat rhat) e_d = (rx^2 + ry^2) / 2 / r^2
        perp = (diff[..., 0] ** 2 + diff[..., 1] ** 2) / (2.0 * dist**2)
        out = pref * (iso + aniso * perp)
    return out


def interaction_matrix(array: AtomArray) -> np.ndarray:
    """Dense N x N matrix M with M_nn = i gamma/2, M_nm = (3/2) gamma G_nm."""
    pos = array.positions
    n = pos.shape[0]
    m = np.empty((n, n), dtype=complex)
    chunk = max(1, int(2e6) // max(n, 1))
    for s0 in range(0, n, chunk):
        sl = slice(s0, min(s0 + chunk, n))
        diff = pos[sl, None, :] - pos[None, :, :]
        m[sl] = COUPLING * _projected_green_pairs(diff)
    np.fill_diagonal(m, 0.5j * GAMMA)
    return m


def decay_matrix(m: np.ndarray) -> np.ndarray:
    """Hermitian radiation matrix (M - M^dag) / 2i; eigenvalues are half
    the collective decay rates and must be non-negative (no gain)."""
    return (m - m.conj().T) / 2j


@dataclass
class CoupledDipoleSystem:
    """Assembled linear system for one array, drive, and detuning."""

    array: AtomArray
    delta: float
    drive: np.ndarray  # (N,) complex, e_d-projected incident field
    matrix: np.ndarray  # (N, N), detuning-independent part


def build_system(array: AtomArray, delta: float, drive) -> CoupledDipoleSystem:
    drive = np.asarray(drive, dtype=complex)
    if drive.shape != (array.n_atoms,):
        raise ValueError("drive must hold one complex amplitude per atom")
    return CoupledDipoleSystem(
        array=array, delta=delta, drive=drive, matrix=interaction_matrix(array)
    )


@dataclass
class SteadyState:
    sigma: np.ndarray
    residual: float


def solve_steady_state(system: CoupledDipoleSystem) -> SteadyState:
    """Direct dense solve of (M + delta I) sigma = -drive."""
    n = system.array.n_atoms
    a = system.matrix + system.delta * np.eye(n)
    try:
        sigma = np.linalg.solve(a, -system.drive)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular steady-state system: {exc}") from exc
    denom = np.linalg.norm(system.drive)
    residual = float(np.linalg.norm(a @ sigma + system.drive) / denom) if denom > 0 else 0.0
    if residual > 1e-8:
        cond = np.linalg.cond(a)
        raise SolverError(
            f"steady-state residual {residual:.2e} too large (cond ~ {cond:.2e}); "
            "likely an exceptional collective resonance"
        )
    return SteadyState(sigma=sigma, residual=residual)


def scattered_spectrum(
    sigma: np.ndarray, array: AtomArray, grid: KGrid, half_space: str
) -> AngularSpectrum:
    """Angular spectrum of the field radiated by the solved dipoles.

    A(k_perp) = (3 gamma/2) (i / 2 k_z) (I - khat khat) e_d
                * sum_n sigma_n exp(-i k khat . r_n),
    with khat = (k_perp, +-k_z)/k per half-space.  The prefactor matches
    the interaction matrix: reconstructing the field at a second atom
    reproduces M_nm (tested), so drive and scattered fields share one
    normalization.
    """
    sz = 1.0 if half_space == FORWARD else -1.0
    mask = grid.mask
    kvec = np.stack([grid.KX[mask], grid.KY[mask], sz * grid.KZ[mask]], axis=-1)
    phases = np.exp(-1j * (kvec @ array.positions.T))  # (M, N)
    s = phases @ np.asarray(sigma, dtype=complex)  # (M,)
    khat = kvec / K
    ed_t = E_D[None, :] - khat * (khat @ E_D)[:, None]  # (I - khat khat) e_d
    amp = (COUPLING * 0.5j / grid.KZ[mask])[:, None] * ed_t * s[:, None]
    out = np.zeros((grid.n, grid.n, 3), dtype=complex)
    out[mask] = amp
    return AngularSpectrum(grid, out, half_space)


class ArraySolver:
    """Cached factorizations for repeated solves on one atom array.

    The interaction matrix depends only on relative positions, so one
    Hessenberg reduction M = Q H Q^dag serves every detuning: each
    (H + delta I) y = b solve is O(N^2) via a Givens sweep.  Used by the
    resonance search and the sweep drivers; results are verified against
    a direct dense solve at the reported detuning.
    """

    def __init__(self, array: AtomArray):
        self.array = array
        self._matrix = None
        self._hess = None

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = interaction_matrix(self.array)
        return self._matrix

    @property
    def hessenberg(self):
        if self._hess is None:
            h, q = scipy.linalg.hessenberg(self.matrix, calc_q=True)
            self._hess = (h, q)
        return self._hess

    def to_hess_basis(self, vec: np.ndarray) -> np.ndarray:
        _, q = self.hessenberg
        return q.conj().T @ vec

    def from_hess_basis(self, vec: np.ndarray) -> np.ndarray:
        _, q = self.hessenberg
        return q @ vec

    def shifted_solve_hess(self, delta: float, b: np.ndarray) -> np.ndarray:
        """Solve (H + delta I) y = b with H upper Hessenberg (Givens QR)."""
        h, _ = self.hessenberg
        n = h.shape[0]
        r = h.copy()
        r[np.diag_indices(n)] += delta
        y = b.astype(complex, copy=True)
        for i in range(n - 1):
            a_, c_ = r[i, i], r[i + 1, i]
            if c_ == 0.0:
                continue
            nrm = np.sqrt(abs(a_) ** 2 + abs(c_) ** 2)
            ga, gc = np.conj(a_) / nrm, np.conj(c_) / nrm
            top = ga * r[i, i:] + gc * r[i + 1, i:]
            bot = -c_ / nrm * r[i, i:] + a_ / nrm * r[i + 1, i:]
            r[i, i:], r[i + 1, i:] = top, bot
            y[i], y[i + 1] = ga * y[i] + gc * y[i + 1], -c_ / nrm * y[i] + a_ / nrm * y[i + 1]
        return scipy.linalg.solve_triangular(r, y)

    def solve(self, delta: float, drive: np.ndarray) -> SteadyState:
        """Steady state via the cached Hessenberg form, residual-checked."""
        y = self.shifted_solve_hess(delta, self.to_hess_basis(-np.asarray(drive, complex)))
        sigma = self.from_hess_basis(y)
        a = self.matrix + delta * np.eye(self.array.n_atoms)
        denom = np.linalg.norm(drive)
        residual = float(np.linalg.norm(a @ sigma + drive) / denom) if denom > 0 else 0.0
        if residual > 1e-8:
            raise SolverError(f"shifted solve residual {residual:.2e} too large")
        return SteadyState(sigma=sigma, residual=residual)

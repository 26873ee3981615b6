"""Interface efficiency from scattering: modal reflectivity and resonance.

The efficiency of the light-matter interface equals the array's modal
reflection amplitude at resonance: drive the array with the (NA
filtered, flux-normalized) incident target mode, solve the coupled
dipoles, decompose the back-scattered field over plane waves, filter it
with the same aperture, and project it onto the mirror target mode (the
z-reflection of the incident one, same coefficients).  r0 = |rho| is
the magnitude of that amplitude overlap, the same convention in which
the one-channel input-output model gives |rho| = Gamma/(Gamma +
gamma_loss) on resonance.
"""

from dataclasses import dataclass

import numpy as np

from .beams import TargetMode, assemble_mode, mode_spectrum
from .diffraction import OrderSet
from .dipoles import COUPLING, ArraySolver
from .lattice import AtomArray
from .results import SCATTERING, InterfaceResult
from .spectrum import (
    BACKWARD,
    DEFAULT_NK,
    AngularSpectrum,
    flux_inner,
    make_grid,
    na_filter,
)
from .units import E_D, GAMMA, K

# Projection convention for the NA-filtered run: the reflected field is
# projected on the filtered, renormalized mirror mode ("filtered") or on
# the unfiltered one ("raw").  The filtered mode is what the objective
# actually delivers and collects, so it is the default.
MIRROR_FILTERED = "filtered"
MIRROR_RAW = "raw"


def oracle_1d(gamma: float, gamma_loss: float, shift: float, delta: float) -> complex:
    """Reflection amplitude of the one-channel input-output model.

    A collective dipole coupled at rate gamma to a single symmetric
    propagating mode and at gamma_loss to everything else, driven from
    one side, reflects with

        rho(delta) = -(gamma/2) / ( -i (delta - shift)
                                     + (gamma + gamma_loss)/2 ),

    so |rho| on resonance equals gamma / (gamma + gamma_loss) = r0.
    """
    if gamma < 0 or gamma_loss < 0:
        raise ValueError("rates must be non-negative")
    return -(0.5 * gamma) / (-1j * (delta - shift) + 0.5 * (gamma + gamma_loss))


@dataclass
class ReflectivityPipeline:
    """Precomputed linear maps for repeated reflectivity evaluations.

    For a fixed (array, mode, NA, grid) the reflected amplitude is a
    linear functional of the dipole amplitudes, rho = p . sigma, and the
    drive vector is fixed; only the detuning changes between evaluations,
    which the cached Hessenberg solver handles in O(N^2).
    """

    solver: ArraySolver
    mode: TargetMode
    na: float
    n_k: int
    drive: np.ndarray
    proj: np.ndarray  # p vector: rho = proj . sigma
    incident: AngularSpectrum
    mirror: AngularSpectrum
    _drive_h: np.ndarray = None
    _proj_h: np.ndarray = None

    def rho(self, delta: float) -> complex:
        if self._drive_h is None:
            self._drive_h = self.solver.to_hess_basis(-self.drive)
            _, q = self.solver.hessenberg
            self._proj_h = q.T @ self.proj
        y = self.solver.shifted_solve_hess(delta, self._drive_h)
        return complex(self._proj_h @ y)

    def result(self, delta: float) -> InterfaceResult:
        state = self.solver.solve(delta, self.drive)
        rho = complex(self.proj @ state.sigma)
        return InterfaceResult(
            r0=abs(rho),
            delta_res=delta,
            source=SCATTERING,
            diagnostics={
                "rho": rho,
                "residual": state.residual,
                "n_k": self.n_k,
                "na": self.na,
                "waist": self.mode.w,
                "n_atoms": self.solver.array.n_atoms,
            },
        )


def _significant(spec: AngularSpectrum, floor: float = 1e-10):
    """Indices and values of nodes carrying non-negligible amplitude."""
    g = spec.grid
    amp2 = np.einsum("ijc,ijc->ij", np.conj(spec.amplitudes), spec.amplitudes).real
    cut = amp2 > floor**2 * amp2.max() if amp2.max() > 0 else g.mask
    sel = g.mask & cut
    return sel


def build_pipeline(
    array: AtomArray,
    mode: TargetMode,
    na: float = 1.0,
    n_k: int = DEFAULT_NK,
    solver: ArraySolver | None = None,
    mirror_convention: str = MIRROR_FILTERED,
) -> ReflectivityPipeline:
    """Assemble drive and projection vectors for the scattering run.

    Steps fixed here: (1) incident spectrum, NA-filtered and
    renormalized; (2) drive = e_d-projected field reconstructed from the
    filtered spectrum at the atom positions; (3) mirror-mode spectrum,
    NA-filtered and (by default) renormalized; (4) projection row for
    the NA-filtered back-scattered spectrum.
    """
    if mode.direction != "+":
        raise ValueError("incident mode must be forward-propagating")
    grid = make_grid(n_k)
    inc = mode_spectrum(mode, n_k=n_k)
    if na < 1.0:
        inc = na_filter(inc, na, renormalize=True)
    mirror_mode = assemble_mode(mode.lattice, mode.orders, mode.w, direction="-")
    mir = mode_spectrum(mirror_mode, n_k=n_k)
    if na < 1.0:
        mir = na_filter(mir, na, renormalize=(mirror_convention == MIRROR_FILTERED))

    pos = array.positions
    # Drive: inverse transform of the filtered incident spectrum.
    sel = _significant(inc)
    kvec = np.stack([grid.KX[sel], grid.KY[sel], grid.KZ[sel]], axis=-1)
    scal = inc.amplitudes[sel] @ np.conj(E_D)  # e_d^dag . A
    phases = np.exp(1j * (pos @ kvec.T))
    drive = (phases @ scal) * grid.dk**2 / (2.0 * np.pi) ** 2

    # Projection: rho = <mirror, scattered>, restricted to mirror support
    # (and to the aperture: the mirror spectrum is already NA-filtered).
    selm = _significant(mir)
    kvec_m = np.stack([grid.KX[selm], grid.KY[selm], -grid.KZ[selm]], axis=-1)
    khat = kvec_m / K
    ed_t = E_D[None, :] - khat * (khat @ E_D)[:, None]
    radial = np.einsum("mc,mc->m", np.conj(mir.amplitudes[selm]), ed_t)
    wgt = mir.grid.flux_w[selm] * (grid.KZ[selm] / K)
    coeff = wgt * radial * (COUPLING * 0.5j / grid.KZ[selm])
    proj = np.exp(-1j * (pos @ kvec_m.T)) @ coeff

    return ReflectivityPipeline(
        solver=solver or ArraySolver(array),
        mode=mode, na=na, n_k=n_k,
        drive=drive, proj=proj, incident=inc, mirror=mir,
    )


def reflectivity(
    array: AtomArray,
    mode: TargetMode,
    delta: float,
    na: float = 1.0,
    n_k: int = DEFAULT_NK,
    solver: ArraySolver | None = None,
) -> InterfaceResult:
    """Modal reflection |rho| of the array at a fixed detuning."""
    if array.n_atoms == 0:
        return InterfaceResult(r0=0.0, delta_res=delta, source=SCATTERING)
    pipe = build_pipeline(array, mode, na=na, n_k=n_k, solver=solver)
    return pipe.result(delta)


def find_resonance(
    array: AtomArray,
    mode: TargetMode,
    na: float = 1.0,
    n_k: int = DEFAULT_NK,
    window: float = 5.0 * GAMMA,
    center: float | None = None,
    n_scan: int = 41,
    tol: float = 1e-3 * GAMMA,
    solver: ArraySolver | None = None,
    pipeline: ReflectivityPipeline | None = None,
) -> InterfaceResult:
    """Maximize |rho(delta)| by coarse scan plus golden-section refinement.

    The scan covers [center - window, center + window]; center defaults
    to the collective shift of the Gaussian mode (see
    finite_theory.d_matrix_00) and may be passed in when precomputed.
    Warns if the optimum sits on the window edge.
    """
    import warnings

    from .golden import golden_max

    pipe = pipeline or build_pipeline(array, mode, na=na, n_k=n_k, solver=solver)
    if center is None:
        from .finite_theory import GaussianCollectiveMode, d_matrix_00

        gm = GaussianCollectiveMode(waist=mode.w, array=array)
        center = d_matrix_00(gm, array).imag
    deltas = np.linspace(center - window, center + window, n_scan)
    vals = np.array([abs(pipe.rho(d)) for d in deltas])
    ibest = int(np.argmax(vals))
    if ibest in (0, n_scan - 1):
        warnings.warn(
            f"resonance scan maximum at window edge (delta = {deltas[ibest]:.3f})",
            stacklevel=2,
        )
    lo = deltas[max(ibest - 1, 0)]
    hi = deltas[min(ibest + 1, n_scan - 1)]
    d_best, _, _ = golden_max(lambda d: abs(pipe.rho(d)), lo, hi, tol)
    result = pipe.result(d_best)
    result.diagnostics["scan_center"] = center
    result.diagnostics["scan_window"] = window
    return result

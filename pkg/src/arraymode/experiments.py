"""Figure-level studies: sweeps, optimizations, shift scans, disorder.

Every study produces a list of row dicts (stable column order, suitable
for CSV) and is deterministic given its arguments and seeds.  Rows are
independent; when ARRAYMODE_WORKERS is set above 1 the sweep drivers
farm rows out to a process pool and reassemble them in grid order.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .beams import assemble_mode
from .diffraction import first_shell_angle, first_shell_orders, r0_infinite
from .dipoles import ArraySolver
from .finite_theory import (
    DEFAULT_BZ_RES,
    BZQuadrature,
    GaussianCollectiveMode,
    d_matrix_00,
    r0_finite_theory,
)
from .golden import golden_max
from .lattice import LatticeSpec, apply_disorder, apply_shift, build_patch
from .metrics import find_resonance
from .results import InterfaceResult
from .spectrum import DEFAULT_NK
from .units import K

# Spacing windows with a single radiative shell beyond the zeroth order.
SPACING_WINDOW = {
    "triangular": (2.0 / np.sqrt(3.0), 2.0),
    "square": (1.0, np.sqrt(2.0)),
}

# Shift-scan preset: array and beam of the position-robustness study.
SHIFT_PRESET = {"kind": "triangular", "n_atoms": 537, "spacing": 1.76, "w_rel": 0.25}

WAIST_BOUNDS = (0.08, 0.6)  # search range for w / L_a
WAIST_TOL = 0.005


@dataclass
class SweepSpec:
    """Declarative description of one study (CLI-facing record)."""

    study: str
    lattice_kind: str = "triangular"
    grid: list = field(default_factory=list)
    n_atoms: int = 149
    spacing: float = 1.76
    na: float = 1.0
    waist_policy: object = "optimize"  # "optimize" or w/L_a value
    delta_policy: object = "resonant"  # "resonant" or detuning value
    seeds: list = field(default_factory=lambda: [0])
    n_k: int = DEFAULT_NK
    bz_resolution: int = DEFAULT_BZ_RES

    def __post_init__(self):
        if len(self.grid) > 1 and not np.all(np.diff(self.grid) > 0):
            raise ValueError("sweep grid must be strictly increasing")
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be at least 1")
        if not 0.0 < self.na <= 1.0:
            raise ValueError("NA must be in (0, 1]")


def workers_from_env() -> int:
    try:
        return max(1, int(os.environ.get("ARRAYMODE_WORKERS", "1")))
    except ValueError:
        return 1


def _map_rows(fn, args_list):
    n_workers = workers_from_env()
    if n_workers <= 1 or len(args_list) <= 1:
        return [fn(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, args_list))


def lambda_eff(lattice: LatticeSpec) -> float:
    """Axial rephasing period 2 pi / (k - k_z) of the first shell."""
    theta = first_shell_angle(lattice)
    return 2.0 * np.pi / (K * (1.0 - np.cos(theta)))


def resolve_detuning(policy, array, mode, na, n_k, solver=None, center=None) -> InterfaceResult:
    """Run at a fixed detuning or search for the resonance per policy."""
    if policy == "resonant":
        return find_resonance(array, mode, na=na, n_k=n_k, solver=solver, center=center)
    from .metrics import reflectivity

    return reflectivity(array, mode, float(policy), na=na, n_k=n_k, solver=solver)


def optimize_waist(
    array,
    lattice: LatticeSpec,
    target,
    na: float = 1.0,
    n_k: int = DEFAULT_NK,
    solver: ArraySolver | None = None,
    bounds: tuple = WAIST_BOUNDS,
    tol: float = WAIST_TOL,
):
    """Maximize the resonant r0 over the waist, returns (w_opt, result).

    Golden-section search over w / L_a; every probe includes its own
    resonance search.  Warns when the optimum hugs a search boundary.
    """
    import warnings

    solver = solver or ArraySolver(array)
    la = array.linear_size
    cache: dict = {}

    def probe(w_rel: float) -> float:
        key = round(w_rel, 12)
        if key not in cache:
            mode = assemble_mode(lattice, target, w=w_rel * la)
            cache[key] = find_resonance(array, mode, na=na, n_k=n_k, solver=solver)
        return cache[key].r0

    w_rel, _, _ = golden_max(probe, bounds[0], bounds[1], tol)
    if min(w_rel - bounds[0], bounds[1] - w_rel) < 2 * tol:
        warnings.warn(f"optimal waist w/L_a = {w_rel:.3f} sits at the search boundary")
    return w_rel * la, cache[round(w_rel, 12)]


def _spacing_row(args):
    kind, a, n_atoms, na, waist_policy, n_k, bz_res = args
    lattice = LatticeSpec(kind, a)
    array = build_patch(lattice, n_atoms)
    target = first_shell_orders(lattice)
    inf = r0_infinite(lattice, target)
    solver = ArraySolver(array)
    if waist_policy == "optimize":
        w_opt, res = optimize_waist(array, lattice, target, na=na, n_k=n_k, solver=solver)
    else:
        w_opt = float(waist_policy) * array.linear_size
        mode = assemble_mode(lattice, target, w=w_opt)
        res = find_resonance(array, mode, na=na, n_k=n_k, solver=solver)
    gm = GaussianCollectiveMode(waist=w_opt, array=array)
    fin = r0_finite_theory(gm, lattice, target, BZQuadrature(lattice, bz_res))
    return {
        "spacing": a,
        "n_atoms": n_atoms,
        "na": na,
        "r0": res.r0,
        "r0_theory": fin.r0,
        "r0_infinite": inf.r0,
        "gamma": fin.gamma,
        "gamma_loss": fin.gamma_loss,
        "delta_res": res.delta_res,
        "w_opt": w_opt,
        "w_opt_rel": w_opt / array.linear_size,
        "eta": gm.eta_discrete,
        "residual": res.diagnostics.get("residual", float("nan")),
    }


def sweep_spacing(spec: SweepSpec) -> list:
    """r0 versus lattice spacing: infinite theory, finite theory, scattering."""
    lo, hi = SPACING_WINDOW[spec.lattice_kind]
    for a in spec.grid:
        if not lo < a < hi:
            raise ValueError(f"spacing {a} outside the single-shell window ({lo:.4f}, {hi:.4f})")
    args = [
        (spec.lattice_kind, a, spec.n_atoms, spec.na, spec.waist_policy, spec.n_k, spec.bz_resolution)
        for a in spec.grid
    ]
    return _map_rows(_spacing_row, args)


def _scale_row(args):
    kind, n_atoms, na, n_k = args
    lo, hi = SPACING_WINDOW[kind]
    lo, hi = lo + 0.02, hi - 0.02
    best: dict = {}

    def probe(a: float) -> float:
        key = round(a, 12)
        if key not in best:
            lattice = LatticeSpec(kind, a)
            array = build_patch(lattice, n_atoms)
            target = first_shell_orders(lattice)
            solver = ArraySolver(array)
            w_opt, res = optimize_waist(array, lattice, target, na=na, n_k=n_k, solver=solver)
            best[key] = (w_opt / array.linear_size, res)
        return best[key][1].r0

    a_opt, _, _ = golden_max(probe, lo, hi, 0.01)
    w_rel, res = best[round(a_opt, 12)]
    return {
        "n_atoms": n_atoms,
        "na": na,
        "a_opt": a_opt,
        "w_opt_rel": w_rel,
        "r0": res.r0,
        "one_minus_r0": 1.0 - res.r0,
        "delta_res": res.delta_res,
        "residual": res.diagnostics.get("residual", float("nan")),
    }


def fit_loglog_slope(xs, ys) -> tuple:
    """Least-squares slope and intercept of log(y) against log(x)."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    keep = (xs > 0) & (ys > 0)
    coeffs = np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)
    return float(coeffs[0]), float(coeffs[1])


def scale_n(spec: SweepSpec, fit_min_atoms: int = 203) -> tuple:
    """Inefficiency versus atom number with joint (a, w) optimization.

    Returns (rows, fit) where fit holds the log-log slope of 1 - r0
    against N restricted to N >= fit_min_atoms.
    """
    args = [(spec.lattice_kind, int(n), spec.na, spec.n_k) for n in spec.grid]
    rows = _map_rows(_scale_row, args)
    ns = [r["n_atoms"] for r in rows if r["n_atoms"] >= fit_min_atoms]
    errs = [r["one_minus_r0"] for r in rows if r["n_atoms"] >= fit_min_atoms]
    slope, intercept = fit_loglog_slope(ns, errs) if len(ns) >= 2 else (float("nan"),) * 2
    return rows, {"slope": slope, "intercept": intercept, "fit_min_atoms": fit_min_atoms}


def scan_shift(spec: SweepSpec, axis: str = "x") -> list:
    """r0 versus a rigid array shift along x (lateral) or z (axial).

    The interaction matrix depends only on relative positions, so one
    factorization serves the whole scan; the resonance is re-found at
    every point.  Axial grids are naturally expressed in units of the
    first-shell beating period lambda_eff = 2 pi / (k - k_z).
    """
    if axis not in ("x", "z"):
        raise ValueError("axis must be 'x' or 'z'")
    lattice = LatticeSpec(spec.lattice_kind, spec.spacing)
    array = build_patch(lattice, spec.n_atoms)
    target = first_shell_orders(lattice)
    w = (float(spec.waist_policy) if spec.waist_policy != "optimize" else 0.25)
    mode = assemble_mode(lattice, target, w=w * array.linear_size)
    solver = ArraySolver(array)
    gm = GaussianCollectiveMode(waist=mode.w, array=array)
    center = d_matrix_00(gm, array).imag
    rows = []
    for d in spec.grid:
        vec = (d, 0.0, 0.0) if axis == "x" else (0.0, 0.0, d)
        shifted = apply_shift(array, vec)
        res = resolve_detuning(
            spec.delta_policy, shifted, mode, spec.na, spec.n_k, solver=solver, center=center
        )
        rows.append(
            {
                "shift": d,
                "axis": axis,
                "r0": res.r0,
                "delta_res": res.delta_res,
                "n_atoms": spec.n_atoms,
                "spacing": spec.spacing,
                "lambda_eff": lambda_eff(lattice),
                "residual": res.diagnostics.get("residual", float("nan")),
            }
        )
    return rows


def estimate_period(xs, ys) -> float:
    """Spacing of local maxima of y(x), refined by quadratic interpolation."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    peaks = []
    for i in range(1, len(xs) - 1):
        if ys[i] >= ys[i - 1] and ys[i] >= ys[i + 1] and (ys[i] > ys[i - 1] or ys[i] > ys[i + 1]):
            denom = ys[i - 1] - 2 * ys[i] + ys[i + 1]
            off = 0.5 * (ys[i - 1] - ys[i + 1]) / denom if denom != 0 else 0.0
            peaks.append(xs[i] + off * (xs[i + 1] - xs[i]))
    if ys[0] > ys[1]:
        peaks.insert(0, xs[0])
    if len(peaks) < 2:
        raise ValueError("fewer than two maxima; enlarge the scan range")
    return float(np.mean(np.diff(peaks)))


def _disorder_row(args):
    kind, a, n_atoms, w_rel, na, n_k, dr, seeds, delta_policy = args
    lattice = LatticeSpec(kind, a)
    array = build_patch(lattice, n_atoms)
    target = first_shell_orders(lattice)
    mode = assemble_mode(lattice, target, w=w_rel * array.linear_size)
    vals = []
    for seed in seeds:
        perturbed = apply_disorder(array, dr, seed) if dr > 0 else array
        solver = ArraySolver(perturbed)
        res = resolve_detuning(delta_policy, perturbed, mode, na, n_k, solver=solver)
        vals.append(1.0 - res.r0)
    vals = np.array(vals)
    sem = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return {
        "dr": dr,
        "dr_rel": dr / a,
        "n_seeds": len(vals),
        "one_minus_r0_mean": float(vals.mean()),
        "one_minus_r0_sem": sem,
        "n_atoms": n_atoms,
        "spacing": a,
        "na": na,
    }


def disorder_study(spec: SweepSpec) -> tuple:
    """Monte Carlo over Gaussian position errors; grid entries are dr/a.

    Returns (rows, fit): rows hold mean and s.e.m. of 1 - r0 per dr; the
    fit is the log-log exponent of the disorder-induced excess
    mean(1 - r0)(dr) - (1 - r0)(0) over the dr > 0 points.
    """
    w_rel = float(spec.waist_policy) if spec.waist_policy != "optimize" else 0.25
    a = spec.spacing
    args = [
        (spec.lattice_kind, a, spec.n_atoms, w_rel, spec.na, spec.n_k,
         dr_rel * a, tuple(spec.seeds), spec.delta_policy)
        for dr_rel in [0.0] + [g for g in spec.grid if g > 0]
    ]
    rows = _map_rows(_disorder_row, args)
    base = rows[0]["one_minus_r0_mean"]
    drs = [r["dr"] for r in rows[1:]]
    excess = [max(r["one_minus_r0_mean"] - base, 0.0) for r in rows[1:]]
    slope, intercept = fit_loglog_slope(drs, excess) if len(drs) >= 2 else (float("nan"),) * 2
    return rows, {"exponent": slope, "intercept": intercept, "clean_inefficiency": base}


def r0_convergence(array, mode, na, delta, n_k: int = DEFAULT_NK) -> dict:
    """Grid-resolution diagnostic: |r0(n_k) - r0(1.5 n_k)| at fixed detuning."""
    from .metrics import reflectivity

    r1 = reflectivity(array, mode, delta, na=na, n_k=n_k)
    r2 = reflectivity(array, mode, delta, na=na, n_k=int(1.5 * n_k))
    return {"r0": r1.r0, "r0_fine": r2.r0, "delta_r0": abs(r1.r0 - r2.r0)}

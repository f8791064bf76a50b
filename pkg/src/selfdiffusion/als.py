"""Alternating least squares over rank-1 separable environment functions.

A separable function assigns each site an (empty, occupied) factor pair and
takes the product over sites; on such functions the 2^N-term functional
collapses to per-site products computable in O(K N^2).  Restricted to one
site's factor pair the functional is an exact bivariate quadratic, so the
alternating minimization sweeps the sites in ascending order, fits the slice
quadratic through six probe evaluations, and replaces the pair by the slice
minimizer.  Sweeps repeat until the relative objective change drops below a
tolerance.  Random multi-starts with per-restart RNG streams spawned from a
single seed make the search reproducible and embarrassingly parallel.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .lattice import LatticeSpec, jump_dots, move_tables


@dataclass(frozen=True)
class SeparableFunction:
    """Rank-1 product function; ``factors[s]`` is (empty, occupied) at site s."""

    factors: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.factors, dtype=np.float64)
        if f.ndim != 2 or f.shape[1] != 2:
            raise ValueError(f"factors must have shape (N, 2), got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("factors must be finite")
        object.__setattr__(self, "factors", f)


def densify(spec: LatticeSpec, R: SeparableFunction) -> np.ndarray:
    """Tabulate a separable function on all 2^N configurations."""
    from .functional import check_dense_size

    check_dense_size(spec.num_sites)
    if R.factors.shape[0] != spec.num_sites:
        raise ValueError("factor count does not match the lattice")
    cfgs = np.arange(spec.num_configs, dtype=np.int64)
    values = np.ones(spec.num_configs)
    for s in range(spec.num_sites):
        bit = (cfgs >> s) & 1
        values *= np.where(bit == 1, R.factors[s, 1], R.factors[s, 0])
    return values


def _kernel_args(spec: LatticeSpec, u):
    tabs = move_tables(spec)
    dots = jump_dots(spec, u)
    n_half = float(1 << (spec.num_sites - 1))
    return (tabs.probs, dots, tabs.gate_sites, tabs.sigma, tabs.out_kind,
            tabs.swap_jump, tabs.swap_y, tabs.swap_w, n_half)


def eval_separable_A(spec: LatticeSpec, R: SeparableFunction, u) -> float:
    """Functional value of a separable function via per-site products."""
    if R.factors.shape[0] != spec.num_sites:
        raise ValueError("factor count does not match the lattice")
    return float(kernels.separable_value(
        np.ascontiguousarray(R.factors), *_kernel_args(spec, u)))


@dataclass(frozen=True)
class SiteQuadratic:
    """Coefficients of the objective restricted to one site's pair (a, b):
    alpha1 a^2 + alpha2 b^2 + alpha3 ab + alpha4 a + alpha5 b + alpha6."""

    alpha1: float
    alpha2: float
    alpha3: float
    alpha4: float
    alpha5: float
    alpha6: float


_PROBES = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (2.0, 0.0), (0.0, 2.0),
           (1.0, 1.0))


def fit_site_quadratic(spec: LatticeSpec, R: SeparableFunction, u,
                       site: int) -> SiteQuadratic:
    """Extract the slice quadratic at one site by six probe evaluations.

    Probes (a, b) = (occupied, empty) at (0,0), (1,0), (0,1), (2,0), (0,2),
    (1,1) and inverts the resulting 6x6 system by closed-form differences.
    """
    if not 0 <= site < spec.num_sites:
        raise ValueError(f"site {site} outside [0, {spec.num_sites})")
    work = R.factors.copy()
    args = _kernel_args(spec, u)
    vals = []
    for a, b in _PROBES:
        work[site, 1] = a
        work[site, 0] = b
        vals.append(float(kernels.separable_value(work, *args)))
    f00, f10, f01, f20, f02, f11 = vals
    a1 = 0.5 * (f20 - 2.0 * f10 + f00)
    a2 = 0.5 * (f02 - 2.0 * f01 + f00)
    a6 = f00
    a4 = f10 - a1 - a6
    a5 = f01 - a2 - a6
    a3 = f11 - (a1 + a2 + a4 + a5 + a6)
    return SiteQuadratic(a1, a2, a3, a4, a5, a6)


def solve_site(quad: SiteQuadratic) -> tuple[float, float]:
    """Minimizer (a, b) of a slice quadratic.

    Near-singular slices (all remaining factors zero, say) fall back to the
    minimum-norm least-squares solution of the stationarity system.
    """
    a, b, _ = kernels.solve_slice_scalars(
        quad.alpha1, quad.alpha2, quad.alpha3, quad.alpha4, quad.alpha5)
    return a, b


@dataclass
class AlsReport:
    """Outcome of one ALS run from one starting point."""

    factors: SeparableFunction
    final_value: float
    sweep_values: list = field(default_factory=list)
    sweeps: int = 0
    converged: bool = False
    singular_slices: int = 0
    seed: int | None = None


def run_als(spec: LatticeSpec, u, start: SeparableFunction,
            epsilon: float = 1e-5, max_sweeps: int = 500,
            seed: int | None = None) -> AlsReport:
    """Sweep sites until the relative objective change falls below epsilon.

    The objective is recomputed once after each full sweep; the recorded
    sweep values (starting value included) are non-increasing because every
    site update is an exact slice minimization.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if start.factors.shape[0] != spec.num_sites:
        raise ValueError("factor count does not match the lattice")
    args = _kernel_args(spec, u)
    factors = np.ascontiguousarray(start.factors.copy())
    v_new = float(kernels.separable_value(factors, *args))
    values = [v_new]
    v_old = math.inf
    sweeps = 0
    n_singular = 0
    while abs(v_old - v_new) > epsilon * abs(v_new) and sweeps < max_sweeps:
        v_old = v_new
        n_singular += int(kernels.als_sweep(factors, *args))
        v_new = float(kernels.separable_value(factors, *args))
        values.append(v_new)
        sweeps += 1
    return AlsReport(
        factors=SeparableFunction(factors),
        final_value=v_new,
        sweep_values=values,
        sweeps=sweeps,
        converged=abs(v_old - v_new) <= epsilon * abs(v_new),
        singular_slices=n_singular,
        seed=seed,
    )


@dataclass
class MultiStartResult:
    """Best run and per-restart reports of an ALS multi-start."""

    best: AlsReport
    reports: list
    seed: int

    @property
    def final_values(self) -> np.ndarray:
        return np.array([r.final_value for r in self.reports])

    def summary(self) -> dict:
        vals = self.final_values
        return {
            "restarts": len(self.reports),
            "mean": float(vals.mean()),
            "min": float(vals.min()),
            "max": float(vals.max()),
            "seed": self.seed,
        }


def multi_start(spec: LatticeSpec, u, restarts: int = 100, seed: int = 0,
                epsilon: float = 1e-5, max_sweeps: int = 500) -> MultiStartResult:
    """Run ALS from ``restarts`` random starting points.

    Starting factors are sampled independently and uniformly on [0, 1] from
    per-restart PCG64 streams spawned off the seed, so each restart is
    reproducible in isolation and the whole sweep could run in parallel
    without changing any result.  Restarts execute sequentially here; the
    best report is the one with the smallest final value (first wins ties).
    """
    if restarts < 1:
        raise ValueError("at least one restart is required")
    streams = np.random.SeedSequence(seed).spawn(restarts)
    reports = []
    best = None
    for i, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        start = SeparableFunction(rng.random((spec.num_sites, 2)))
        rep = run_als(spec, u, start, epsilon=epsilon, max_sweeps=max_sweeps,
                      seed=i)
        reports.append(rep)
        if best is None or rep.final_value < best.final_value:
            best = rep
    return MultiStartResult(best=best, reports=reports, seed=seed)


def write_restart_report(result: MultiStartResult, path) -> None:
    """CSV of per-restart final values and sweep counts."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["restart", "final_value", "sweeps", "converged",
                         "singular_slices"])
        for i, rep in enumerate(result.reports):
            writer.writerow([i, f"{rep.final_value:.17g}", rep.sweeps,
                             int(rep.converged), rep.singular_slices])

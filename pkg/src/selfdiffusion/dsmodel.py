"""Density-dependent self-diffusion matrix assembled from per-level optima.

The quadratic form u.D(rho) u at density rho = L/N is twice the minimal
level-L functional value in direction u.  Solving along the coordinate
directions and their pairwise sums polarizes the full symmetric matrix:
D_ii = q(e_i) and D_ij = (q(e_i + e_j) - q(e_i) - q(e_j)) / 2.  The matrices
at the N+1 level densities are interpolated entrywise by natural cubic
splines, giving a model usable at any density in [0, 1]; evaluations outside
that range clamp to the endpoints and are counted.  The environment-particle
bulk matrix sum_k p_k v_k v_k^T completes the coefficient set the
finite-volume solver needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .als import multi_start
from .functional import level_values
from .lattice import LatticeSpec
from .lsq import assemble_system, solve_lsq

#: eigenvalues of a level matrix below this are a hard error, above it but
#: negative they are clipped to zero (floating-point dust from polarization)
PSD_TOLERANCE = 1e-8

MODEL_FORMAT = "selfdiffusion-model-v1"


def bulk_matrix(spec: LatticeSpec) -> np.ndarray:
    """Diffusion matrix of the untagged environment particles."""
    v = spec.jump_vectors.astype(np.float64)
    return (v.T * spec.jump_probs) @ v


def polarization_directions(d: int) -> list:
    """Directions whose quadratic forms determine a symmetric d x d matrix."""
    dirs = [tuple(int(i == j) for j in range(d)) for i in range(d)]
    for i in range(d):
        for j in range(i + 1, d):
            dirs.append(tuple(int(a == i) + int(a == j) for a in range(d)))
    return dirs


def quad_form_levels(spec: LatticeSpec, u, f) -> np.ndarray:
    """u.D u at every level density: twice the per-level functional averages."""
    return 2.0 * level_values(spec, f, u)


def _polarize(d: int, quad_forms: dict) -> np.ndarray:
    """Recover symmetric matrices from quadratic forms along the direction set.

    ``quad_forms`` maps each polarization direction to its per-level array;
    the result is stacked (n_levels, d, d).
    """
    n_levels = next(iter(quad_forms.values())).shape[0]
    mats = np.zeros((n_levels, d, d))
    for i in range(d):
        ei = tuple(int(a == i) for a in range(d))
        mats[:, i, i] = quad_forms[ei]
    for i in range(d):
        for j in range(i + 1, d):
            eij = tuple(int(a == i) + int(a == j) for a in range(d))
            off = 0.5 * (quad_forms[eij] - mats[:, i, i] - mats[:, j, j])
            mats[:, i, j] = off
            mats[:, j, i] = off
    return mats


def _repair_psd(mats: np.ndarray) -> tuple[np.ndarray, int]:
    """Clip negligible negative eigenvalues; reject genuinely indefinite data."""
    repaired = mats.copy()
    n_clipped = 0
    for lv in range(mats.shape[0]):
        w, v = np.linalg.eigh(mats[lv])
        if np.any(w < -PSD_TOLERANCE):
            raise ValueError(
                f"level {lv} matrix has eigenvalue {w.min():.3e}, beyond the "
                f"{PSD_TOLERANCE:.0e} repair tolerance")
        if np.any(w < 0.0):
            w = np.clip(w, 0.0, None)
            repaired[lv] = (v * w) @ v.T
            n_clipped += 1
    return repaired, n_clipped


@dataclass
class SelfDiffusionModel:
    """Interpolated self-diffusion matrix plus the bulk matrix.

    ``level_matrices[L]`` is the matrix at density ``nodes[L] = L/N``; the
    entrywise natural cubic splines and their derivatives serve pointwise
    evaluation, and the trace spline's breakpoints and coefficients are laid
    out for direct consumption by the finite-volume kernels.
    """

    dimension: int
    num_sites: int
    nodes: np.ndarray
    level_matrices: np.ndarray
    bulk: np.ndarray
    method: str = "unspecified"
    clamp_events: int = field(default=0, repr=False)
    _splines: dict = field(default_factory=dict, repr=False)
    _dsplines: dict = field(default_factory=dict, repr=False)
    trace_spline: object = field(default=None, repr=False)

    @classmethod
    def from_level_data(cls, dimension: int, level_matrices, bulk,
                        method: str = "unspecified") -> "SelfDiffusionModel":
        mats = np.asarray(level_matrices, dtype=np.float64)
        if mats.ndim != 3 or mats.shape[1:] != (dimension, dimension):
            raise ValueError(
                f"level matrices must be (n_levels, {dimension}, {dimension})")
        if not np.allclose(mats, np.transpose(mats, (0, 2, 1)), atol=1e-12):
            raise ValueError("level matrices must be symmetric")
        mats, _ = _repair_psd(mats)
        num_sites = mats.shape[0] - 1
        nodes = np.arange(num_sites + 1, dtype=np.float64) / num_sites
        model = cls(dimension=dimension, num_sites=num_sites, nodes=nodes,
                    level_matrices=mats, bulk=np.asarray(bulk, dtype=np.float64),
                    method=method)
        model._build_splines()
        return model

    def _build_splines(self) -> None:
        d = self.dimension
        for i in range(d):
            for j in range(i, d):
                s = CubicSpline(self.nodes, self.level_matrices[:, i, j],
                                bc_type="natural")
                self._splines[(i, j)] = s
                self._dsplines[(i, j)] = s.derivative()
        traces = np.trace(self.level_matrices, axis1=1, axis2=2)
        self.trace_spline = CubicSpline(self.nodes, traces, bc_type="natural")

    # -- pointwise evaluation ------------------------------------------------

    def _clamp(self, rho: float) -> float:
        if rho < 0.0 or rho > 1.0:
            self.clamp_events += 1
            return min(max(rho, 0.0), 1.0)
        return rho

    def eval_Ds(self, rho: float) -> np.ndarray:
        """Self-diffusion matrix at a density, clamped into [0, 1]."""
        x = self._clamp(float(rho))
        d = self.dimension
        out = np.empty((d, d))
        for (i, j), s in self._splines.items():
            out[i, j] = out[j, i] = s(x)
        return out

    def eval_Ds_deriv(self, rho: float) -> np.ndarray:
        """Density derivative of the matrix; zero in the clamped regions."""
        r = float(rho)
        d = self.dimension
        if r < 0.0 or r > 1.0:
            self.clamp_events += 1
            return np.zeros((d, d))
        out = np.empty((d, d))
        for (i, j), s in self._dsplines.items():
            out[i, j] = out[j, i] = s(r)
        return out

    def trace_Ds(self, rho: float) -> float:
        x = self._clamp(float(rho))
        return float(self.trace_spline(x))

    # -- flat views for the kernels -------------------------------------------

    @property
    def trace_breakpoints(self) -> np.ndarray:
        return np.ascontiguousarray(self.trace_spline.x)

    @property
    def trace_coefficients(self) -> np.ndarray:
        return np.ascontiguousarray(self.trace_spline.c)

    @property
    def bulk_trace(self) -> float:
        return float(np.trace(self.bulk))


def assemble_levels(spec: LatticeSpec, method: str = "lsq", *,
                    lsq_tol: float = 1e-10, restarts: int = 100,
                    seed: int = 0, als_epsilon: float = 1e-5,
                    max_sweeps: int = 500,
                    progress=None) -> SelfDiffusionModel:
    """Solve along the polarization directions and build the model.

    ``method`` picks the exact least-squares route or the ALS route.  ALS
    directions use seeds ``seed``, ``seed + 1``, ... in direction order so a
    single integer pins the whole assembly.  ``progress`` is an optional
    callable receiving one status string per direction.
    """
    if method not in ("lsq", "als"):
        raise ValueError(f"method must be 'lsq' or 'als', got {method!r}")
    quad_forms = {}
    for idx, u in enumerate(polarization_directions(spec.d)):
        if progress is not None:
            progress(f"direction {u}: solving by {method}")
        if method == "lsq":
            psi = solve_lsq(assemble_system(spec, u), tol=lsq_tol)
            quad_forms[u] = quad_form_levels(spec, u, psi)
        else:
            result = multi_start(spec, u, restarts=restarts, seed=seed + idx,
                                 epsilon=als_epsilon, max_sweeps=max_sweeps)
            quad_forms[u] = quad_form_levels(spec, u, result.best.factors)
    mats = _polarize(spec.d, quad_forms)
    return SelfDiffusionModel.from_level_data(
        spec.d, mats, bulk_matrix(spec), method=method)


def constant_model(dimension: int, num_sites: int, matrix,
                   bulk) -> SelfDiffusionModel:
    """Model whose matrix is the same at every density (testing aid)."""
    mats = np.repeat(np.asarray(matrix, dtype=np.float64)[None, :, :],
                     num_sites + 1, axis=0)
    return SelfDiffusionModel.from_level_data(dimension, mats, bulk,
                                              method="constant")


# -- file formats --------------------------------------------------------------


def export_table(model: SelfDiffusionModel, path) -> None:
    """CSV of the level matrices, one row per level, 17 significant digits."""
    d = model.dimension
    cols = [f"D{i + 1}{j + 1}" for i in range(d) for j in range(i, d)]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("l,rho," + ",".join(cols) + "\n")
        for lv in range(model.num_sites + 1):
            vals = [model.level_matrices[lv, i, j]
                    for i in range(d) for j in range(i, d)]
            row = [str(lv), f"{model.nodes[lv]:.17g}"]
            row += [f"{v:.17g}" for v in vals]
            fh.write(",".join(row) + "\n")


def export_trace(model: SelfDiffusionModel, path, samples: int = 201) -> None:
    """Whitespace table of the interpolated trace against 2 - 2 rho."""
    rhos = np.linspace(0.0, 1.0, samples)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# rho trace_ds two_minus_two_rho\n")
        for r in rhos:
            fh.write(f"{r:.17g} {model.trace_Ds(r):.17g} "
                     f"{2.0 - 2.0 * r:.17g}\n")


def save_model(model: SelfDiffusionModel, path) -> None:
    """Self-describing JSON: nodes, matrices, bulk and spline coefficients."""
    d = model.dimension
    coeffs = {
        f"{i + 1}{j + 1}": model._splines[(i, j)].c.tolist()
        for i in range(d) for j in range(i, d)
    }
    payload = {
        "format": MODEL_FORMAT,
        "dimension": d,
        "num_sites": model.num_sites,
        "method": model.method,
        "nodes": model.nodes.tolist(),
        "level_matrices": model.level_matrices.tolist(),
        "bulk_matrix": model.bulk.tolist(),
        "spline_bc": "natural",
        "spline_coefficients": coeffs,
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_model(path) -> SelfDiffusionModel:
    """Rebuild a model from its JSON file and cross-check the stored splines."""
    with open(path, encoding="ascii") as fh:
        payload = json.load(fh)
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
    model = SelfDiffusionModel.from_level_data(
        int(payload["dimension"]),
        np.asarray(payload["level_matrices"], dtype=np.float64),
        np.asarray(payload["bulk_matrix"], dtype=np.float64),
        method=payload.get("method", "unspecified"),
    )
    for key, stored in payload["spline_coefficients"].items():
        i, j = int(key[0]) - 1, int(key[1]) - 1
        rebuilt = model._splines[(i, j)].c
        if not np.allclose(rebuilt, np.asarray(stored), rtol=1e-9, atol=1e-12):
            raise ValueError(f"{path}: stored spline {key} does not match its "
                             "node data; file is corrupt")
    return model


def reference_model(method: str = "lsq", **kwargs) -> SelfDiffusionModel:
    """Model of the reference lattice (M=1, d=2, four unit jumps)."""
    from .lattice import reference_lattice_2d

    return assemble_levels(reference_lattice_2d(), method=method, **kwargs)


__all__ = [
    "SelfDiffusionModel",
    "assemble_levels",
    "bulk_matrix",
    "constant_model",
    "export_table",
    "export_trace",
    "load_model",
    "polarization_directions",
    "quad_form_levels",
    "reference_model",
    "save_model",
]

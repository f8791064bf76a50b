"""Backward-Euler time stepping with a Newton inner loop.

Each step solves the nonlinear balance H(U) = 0 by Newton iteration with an
analytic Jacobian and a sparse direct factorization.  The iteration stops on
the relative criterion ||H_k|| / ||H_0|| < tol; as a safeguard it also
accepts when the residual has reached the rounding floor of the assembly
(absolute size below floor_factor * machine epsilon * the scale of the
time-derivative term) and the last solve no longer improved it.  Without
that acceptance the relative test becomes unreachable once the fields are
within a few ulps of steady state, where the residual is pure rounding
noise.  The floor is orders of magnitude below any physically meaningful
residual, so the safeguard never masks a genuine convergence failure; those
still raise NewtonError after max_newton iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json
import math
import os

import numpy as np
from scipy.sparse.linalg import splu

from .mesh import Mesh, build_cartesian_mesh, load_mesh
from .scheme import interleave, jacobian, residual_vector, split

#: multiplies machine epsilon times the residual scale to get the Newton
#: rounding floor; 0 disables the floor acceptance entirely
NEWTON_FLOOR_FACTOR = 100.0

#: a solve that still shrinks the residual below this fraction counts as
#: progress, blocking the floor acceptance for one more iteration
STAGNATION_FRACTION = 0.1


class NewtonError(RuntimeError):
    """Newton iteration failed; carries the residual history and best state."""

    def __init__(self, message, history=None, best_state=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
        self.best_state = best_state


@dataclass
class SimState:
    """Per-cell species volume fractions at one time."""

    rho_red: np.ndarray
    rho_blue: np.ndarray
    time: float = 0.0


@dataclass
class SimConfig:
    dt: float
    t_final: float
    mesh: dict
    initial_red: str
    initial_blue: str
    newton_tol: float = 1e-8
    max_newton: int = 20
    snapshot_every: int = 0
    ds_model: str | None = None
    newton_floor_factor: float = NEWTON_FLOOR_FACTOR


_CONFIG_KEYS = {
    "dt", "t_final", "mesh", "initial_red", "initial_blue", "newton_tol",
    "max_newton", "snapshot_every", "ds_model", "newton_floor_factor",
}


def load_sim_config(path) -> SimConfig:
    """Read the JSON run description; relative paths resolve against it."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    missing = {"dt", "t_final", "mesh", "initial_red", "initial_blue"} - set(raw)
    if missing:
        raise ValueError(f"{path}: missing config keys {sorted(missing)}")
    cfg = SimConfig(
        dt=float(raw["dt"]),
        t_final=float(raw["t_final"]),
        mesh=dict(raw["mesh"]),
        initial_red=str(raw["initial_red"]),
        initial_blue=str(raw["initial_blue"]),
        newton_tol=float(raw.get("newton_tol", 1e-8)),
        max_newton=int(raw.get("max_newton", 20)),
        snapshot_every=int(raw.get("snapshot_every", 0)),
        ds_model=raw.get("ds_model"),
        newton_floor_factor=float(raw.get("newton_floor_factor",
                                          NEWTON_FLOOR_FACTOR)),
    )
    if cfg.dt <= 0.0 or cfg.t_final <= 0.0:
        raise ValueError("dt and t_final must be positive")
    if cfg.newton_tol <= 0.0:
        raise ValueError("newton_tol must be positive")
    if cfg.max_newton < 1:
        raise ValueError("max_newton must be at least 1")
    if cfg.snapshot_every < 0:
        raise ValueError("snapshot_every must be non-negative")
    if cfg.newton_floor_factor < 0.0:
        raise ValueError("newton_floor_factor must be non-negative")
    kind = cfg.mesh.get("type")
    if kind == "cartesian":
        if int(cfg.mesh.get("nx", 0)) < 1 or int(cfg.mesh.get("ny", 0)) < 1:
            raise ValueError("cartesian mesh needs nx, ny >= 1")
    elif kind == "file":
        if "path" not in cfg.mesh:
            raise ValueError("file mesh needs a path")
    else:
        raise ValueError(f"mesh type must be 'cartesian' or 'file', got {kind!r}")
    base = os.path.dirname(os.path.abspath(path))
    if kind == "file" and not os.path.isabs(cfg.mesh["path"]):
        cfg.mesh["path"] = os.path.join(base, cfg.mesh["path"])
    if cfg.ds_model is not None and not os.path.isabs(cfg.ds_model):
        cfg.ds_model = os.path.join(base, cfg.ds_model)
    return cfg


def mesh_from_config(config: SimConfig) -> Mesh:
    if config.mesh["type"] == "cartesian":
        return build_cartesian_mesh(int(config.mesh["nx"]),
                                    int(config.mesh["ny"]))
    return load_mesh(config.mesh["path"])


# -- initial data ---------------------------------------------------------------

_EXPR_ENV = {
    "pi": np.pi, "e": np.e,
    "cos": np.cos, "sin": np.sin, "tan": np.tan,
    "cosh": np.cosh, "sinh": np.sinh, "tanh": np.tanh,
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "abs": np.abs,
    "minimum": np.minimum, "maximum": np.maximum, "where": np.where,
}


def eval_field_expression(expr: str, points: np.ndarray) -> np.ndarray:
    """Evaluate an arithmetic expression of x and y at the given points.

    Only the math names in the documented environment are visible; anything
    else is rejected before evaluation.
    """
    code = compile(expr, "<field expression>", "eval")
    for name in code.co_names:
        if name not in _EXPR_ENV and name not in ("x", "y"):
            raise ValueError(f"unknown name {name!r} in field expression")
    env = dict(_EXPR_ENV)
    env["x"] = points[:, 0]
    env["y"] = points[:, 1]
    vals = eval(code, {"__builtins__": {}}, env)
    out = np.asarray(vals, dtype=np.float64)
    if out.ndim == 0:
        out = np.full(points.shape[0], float(out))
    if out.shape != (points.shape[0],):
        raise ValueError(f"field expression {expr!r} has wrong shape")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"field expression {expr!r} produced non-finite values")
    return out


def initial_state(mesh: Mesh, red_expr: str, blue_expr: str) -> SimState:
    """Pointwise evaluation of the initial expressions at the cell points."""
    return SimState(
        rho_red=eval_field_expression(red_expr, mesh.cell_points),
        rho_blue=eval_field_expression(blue_expr, mesh.cell_points),
        time=0.0,
    )


# -- Newton ---------------------------------------------------------------------


def newton_solve(mesh: Mesh, model, u_prev: np.ndarray, dt: float,
                 tol: float = 1e-8, max_newton: int = 20,
                 floor_factor: float = NEWTON_FLOOR_FACTOR):
    """One backward-Euler step; returns (u, iterations, info).

    Stops when ||H_k||/||H_0|| < tol, or when the residual sits at the
    assembly rounding floor and the last iteration made no real progress.
    A zero initial residual returns immediately.
    """
    res, n_deg, n_clamp = residual_vector(mesh, model, u_prev, u_prev, dt)
    nrm0 = float(np.linalg.norm(res))
    history = [nrm0]
    info = {"res_history": history, "n_degenerate": n_deg,
            "n_clamped": n_clamp, "stopped_on": "zero"}
    if nrm0 == 0.0:
        return u_prev.copy(), 0, info
    scale = float(np.linalg.norm(
        np.repeat(mesh.cell_measures, 2) * u_prev / dt))
    atol = floor_factor * np.finfo(np.float64).eps * max(scale, 1e-300)
    u = u_prev.copy()
    nrm = nrm0
    for k in range(1, max_newton + 1):
        jac = jacobian(mesh, model, u, dt)
        try:
            du = splu(jac.tocsc()).solve(-res)
        except RuntimeError as exc:
            raise NewtonError(f"linear solve failed at iteration {k}: {exc}",
                              history, u) from exc
        u = u + du
        res, n_deg, n_clamp = residual_vector(mesh, model, u_prev, u, dt)
        info["n_degenerate"] += n_deg
        info["n_clamped"] += n_clamp
        prev_nrm = nrm
        nrm = float(np.linalg.norm(res))
        history.append(nrm)
        if nrm / nrm0 < tol:
            info["stopped_on"] = "ratio"
            return u, k, info
        if floor_factor > 0.0 and nrm <= atol and nrm >= STAGNATION_FRACTION * prev_nrm:
            info["stopped_on"] = "floor"
            return u, k, info
    raise NewtonError(
        f"no convergence in {max_newton} iterations "
        f"(||H||/||H0|| = {nrm / nrm0:.3e})", history, u)


# -- time loop ------------------------------------------------------------------


@dataclass
class SimResult:
    mesh: Mesh
    final_state: SimState
    snapshots: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    newton_iters: np.ndarray = None
    counters: dict = field(default_factory=dict)


def mass(mesh: Mesh, values: np.ndarray) -> float:
    return float(mesh.cell_measures @ values)


def _bound_violation(red, blue) -> float:
    return max(0.0, float(-red.min()), float(-blue.min()),
               float((red + blue).max() - 1.0))


def _diag_row(step, t, mesh, red, blue, iters):
    return (step, t, mass(mesh, red), mass(mesh, blue),
            float(red.min()), float(red.max()),
            float(blue.min()), float(blue.max()), iters)


def time_loop(mesh: Mesh, model, config: SimConfig, progress=None) -> SimResult:
    """March the system to t_final, recording diagnostics every step."""
    n_steps = int(round(config.t_final / config.dt))
    if n_steps < 1 or not math.isclose(n_steps * config.dt, config.t_final,
                                       rel_tol=1e-9):
        raise ValueError("t_final must be a positive integer multiple of dt")
    state = initial_state(mesh, config.initial_red, config.initial_blue)
    u = interleave(state.rho_red, state.rho_blue)
    iters = np.zeros(n_steps, dtype=np.int64)
    counters = {"degenerate_edges": 0, "clamped_cells": 0, "floor_stops": 0,
                "max_bound_violation": _bound_violation(*split(u))}
    result = SimResult(mesh=mesh, final_state=state,
                       newton_iters=iters, counters=counters)
    red, blue = split(u)
    result.diagnostics.append(_diag_row(0, 0.0, mesh, red, blue, 0))
    result.snapshots.append((0, 0.0, red, blue))
    report_every = max(1, n_steps // 20)
    for p in range(1, n_steps + 1):
        t = p * config.dt
        try:
            u, k, info = newton_solve(mesh, model, u, config.dt,
                                      tol=config.newton_tol,
                                      max_newton=config.max_newton,
                                      floor_factor=config.newton_floor_factor)
        except NewtonError as exc:
            raise NewtonError(f"time step {p} (t = {t:.6g}): {exc}",
                              exc.history, exc.best_state) from exc
        iters[p - 1] = k
        counters["degenerate_edges"] += info["n_degenerate"]
        counters["clamped_cells"] += info["n_clamped"]
        counters["floor_stops"] += int(info["stopped_on"] == "floor")
        red, blue = split(u)
        counters["max_bound_violation"] = max(
            counters["max_bound_violation"], _bound_violation(red, blue))
        result.diagnostics.append(_diag_row(p, t, mesh, red, blue, int(k)))
        take = (config.snapshot_every > 0 and p % config.snapshot_every == 0)
        if take or p == n_steps:
            result.snapshots.append((p, t, red, blue))
        if progress is not None and p % report_every == 0:
            progress(f"step {p}/{n_steps} (t = {t:.4g}), newton = {k}")
    result.final_state = SimState(rho_red=red, rho_blue=blue,
                                  time=n_steps * config.dt)
    return result


# -- output files ---------------------------------------------------------------


def write_snapshot(mesh: Mesh, red: np.ndarray, blue: np.ndarray, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("cell,x,y,rho_red,rho_blue\n")
        for K in range(mesh.n_cells):
            x, y = mesh.cell_points[K]
            fh.write(f"{K},{x:.17g},{y:.17g},{red[K]:.17g},{blue[K]:.17g}\n")


def write_diagnostics(rows, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("step,time,mass_red,mass_blue,min_red,max_red,"
                 "min_blue,max_blue,newton_iters\n")
        for (step, t, mr, mb, rmin, rmax, bmin, bmax, k) in rows:
            fh.write(f"{step},{t:.17g},{mr:.17g},{mb:.17g},{rmin:.17g},"
                     f"{rmax:.17g},{bmin:.17g},{bmax:.17g},{k}\n")

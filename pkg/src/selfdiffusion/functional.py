"""The quadratic environment functional, evaluated by dense enumeration.

For a function f of the environment configuration and a direction u, the
functional sums, over every configuration and every jump k, the gated tagged
term p_k (1 - eta_{v_k}) (u.v_k + f(tagged image) - f(eta))^2 plus half of
the swap terms p_k (f(swap image) - f(eta))^2.  Both move kinds preserve the
particle number wherever the tagged term is gated in, so the sum splits
across occupation levels; the per-level averages are what the self-diffusion
matrix is built from, and summing binom(N, L) times the level-L average over
L recovers the full functional.

Everything here enumerates all 2^N configurations, which is the point: this
module is the exact reference that the separable fast path is checked
against.  A size guard keeps N at desk scale.
"""

from __future__ import annotations

from math import comb

import numpy as np

from . import kernels
from .lattice import LatticeSpec, jump_dots, move_tables

#: largest site count for which dense 2^N enumeration is allowed by default
DEFAULT_MAX_DENSE_SITES = 24


def check_dense_size(n_sites: int, limit: int | None = None) -> None:
    """Refuse dense-path work when 2^N would not sensibly fit in memory."""
    cap = DEFAULT_MAX_DENSE_SITES if limit is None else int(limit)
    if n_sites > cap:
        raise ValueError(
            f"dense enumeration over 2^{n_sites} configurations exceeds the "
            f"size guard (N <= {cap}); pass a larger limit explicitly to "
            "override")


def level_binoms(n_sites: int) -> np.ndarray:
    """Sizes binom(N, L) of the occupation levels L = 0..N."""
    return np.array([comb(n_sites, lv) for lv in range(n_sites + 1)],
                    dtype=np.float64)


def enumerate_level(spec: LatticeSpec, level: int):
    """Yield the configurations with ``level`` occupied sites, ascending.

    The order is ascending as integers (Gosper's hack), which fixes the basis
    ordering used by the level-restricted least-squares solve.
    """
    n = spec.num_sites
    if not 0 <= level <= n:
        raise ValueError(f"level {level} outside [0, {n}]")
    if level == 0:
        yield 0
        return
    cfg = (1 << level) - 1
    top = 1 << n
    while cfg < top:
        yield cfg
        low = cfg & -cfg
        up = cfg + low
        cfg = up | (((cfg ^ up) >> 2) // low)


def _as_dense(spec: LatticeSpec, f) -> np.ndarray:
    """Coerce a dense value table or a separable function to a dense table."""
    if isinstance(f, np.ndarray):
        if f.shape != (spec.num_configs,):
            raise ValueError(
                f"dense function must have shape ({spec.num_configs},), "
                f"got {f.shape}")
        return np.ascontiguousarray(f, dtype=np.float64)
    from .als import SeparableFunction, densify

    if isinstance(f, SeparableFunction):
        return densify(spec, f)
    raise TypeError(f"expected a dense value array or SeparableFunction, "
                    f"got {type(f).__name__}")


def level_sums(spec: LatticeSpec, f, u) -> np.ndarray:
    """Raw per-level sums of the functional's summand (not yet averaged)."""
    check_dense_size(spec.num_sites)
    psi = _as_dense(spec, f)
    tabs = move_tables(spec)
    dots = jump_dots(spec, u)
    pops = kernels.popcounts(spec.num_sites)
    return kernels.dense_level_sums(
        psi, spec.num_sites, tabs.probs, dots, tabs.gate_sites, tabs.tag_src,
        tabs.tag_czs, tabs.swap_jump, tabs.swap_y, tabs.swap_w, pops)


def eval_dense_A(spec: LatticeSpec, f, u) -> float:
    """Value of the quadratic functional over all configurations."""
    return float(np.sum(level_sums(spec, f, u)))


def level_values(spec: LatticeSpec, f, u) -> np.ndarray:
    """Per-level averages of the functional, one entry per level 0..N."""
    return level_sums(spec, f, u) / level_binoms(spec.num_sites)


def eval_level_A(spec: LatticeSpec, f, u, level: int) -> float:
    """Average of the functional's summand over the level's configurations."""
    n = spec.num_sites
    if not 0 <= level <= n:
        raise ValueError(f"level {level} outside [0, {n}]")
    return float(level_values(spec, f, u)[level])

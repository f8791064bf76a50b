"""Exact minimization of the functional by sparse linear least squares.

Each gated tagged move and each swap move of each configuration contributes
one scaled residual row: sqrt(p_k) ((f at image) - (f at config) + u.v_k)
for tagged rows and sqrt(p_k / 2) ((f at image) - (f at config)) for swap
rows, the latter kept only where the two swapped occupancies differ (equal
bits give an identically zero row).  The squared norm of the stacked rows
reproduces the dense functional exactly, so its least-squares minimizer over
the 2^N unknowns is the functional's minimizer.  The combined system is
solved matrix-free-in-spirit by an iterative conjugate-direction method on
the normal equations (scipy's lsqr) from a zero start; the additive-constant
gauge freedom is left to wherever the iteration converges, since only the
attained functional values carry meaning.

A second, independent route solves each occupation level separately with a
dense SVD-based least squares over binom(N, L) unknowns; it exists to check
that the combined solve decouples across levels.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import lsqr

from .functional import check_dense_size, enumerate_level
from .lattice import LatticeSpec, jump_dots, move_tables


class LsqConvergenceError(RuntimeError):
    """Iterative least squares stopped short of the requested residual."""


@dataclass(frozen=True)
class ResidualSystem:
    """Sparse residual rows of the quadratic functional.

    Row q reads ``weight[q] * (psi[row_img[q]] - psi[row_eta[q]]) + offset[q]``;
    the squared row norms sum to the dense functional.  ``row_img == row_eta``
    happens on tagged moves that fix a configuration and leaves a pure
    constant row.
    """

    n_sites: int
    row_eta: np.ndarray
    row_img: np.ndarray
    weight: np.ndarray
    offset: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.row_eta.shape[0]

    @property
    def n_unknowns(self) -> int:
        return 1 << self.n_sites


def assemble_system(spec: LatticeSpec, u) -> ResidualSystem:
    """Build the residual rows for every configuration and move.

    Rows are emitted jump by jump (tagged rows first, configurations
    ascending), then swap pair by swap pair, so the assembly order is
    deterministic.
    """
    check_dense_size(spec.num_sites)
    n = spec.num_sites
    tabs = move_tables(spec)
    dots = jump_dots(spec, u)
    cfgs = np.arange(1 << n, dtype=np.int64)

    etas, imgs, wgts, offs = [], [], [], []
    for k in range(spec.num_jumps):
        g = int(tabs.gate_sites[k])
        if g < 0:
            continue
        img = np.zeros_like(cfgs)
        for s in range(n):
            if s == tabs.tag_czs[k]:
                continue
            t = int(tabs.tag_src[k, s])
            if t < 0:
                img |= 1 << s
            else:
                img |= ((cfgs >> t) & 1) << s
        keep = ((cfgs >> g) & 1) == 0
        etas.append(cfgs[keep])
        imgs.append(img[keep])
        w = np.sqrt(tabs.probs[k])
        wgts.append(np.full(int(keep.sum()), w))
        offs.append(np.full(int(keep.sum()), w * dots[k]))
    for m in range(tabs.swap_jump.shape[0]):
        y = int(tabs.swap_y[m])
        w_site = int(tabs.swap_w[m])
        differ = (((cfgs >> y) ^ (cfgs >> w_site)) & 1) == 1
        sel = cfgs[differ]
        etas.append(sel)
        imgs.append(sel ^ ((1 << y) | (1 << w_site)))
        w = np.sqrt(0.5 * tabs.probs[tabs.swap_jump[m]])
        wgts.append(np.full(sel.shape[0], w))
        offs.append(np.zeros(sel.shape[0]))

    return ResidualSystem(
        n_sites=n,
        row_eta=np.concatenate(etas),
        row_img=np.concatenate(imgs),
        weight=np.concatenate(wgts),
        offset=np.concatenate(offs),
    )


def residual_vector(system: ResidualSystem, psi: np.ndarray) -> np.ndarray:
    """All row residuals at a given value table."""
    return system.weight * (psi[system.row_img] - psi[system.row_eta]) \
        + system.offset


def objective(system: ResidualSystem, psi: np.ndarray) -> float:
    """Squared residual norm, equal to the dense functional at psi."""
    r = residual_vector(system, psi)
    return float(r @ r)


def system_matrix(system: ResidualSystem) -> sp.csr_matrix:
    """The rows as a sparse matrix acting on the 2^N unknowns."""
    q = system.n_rows
    rows = np.concatenate([np.arange(q), np.arange(q)])
    cols = np.concatenate([system.row_img, system.row_eta])
    data = np.concatenate([system.weight, -system.weight])
    return sp.coo_matrix((data, (rows, cols)),
                         shape=(q, system.n_unknowns)).tocsr()


def solve_lsq(system: ResidualSystem, tol: float = 1e-10,
              max_iters: int | None = None) -> np.ndarray:
    """Minimize the stacked rows over all 2^N unknowns.

    Runs scipy's lsqr (Golub-Kahan bidiagonalization, the conjugate-direction
    family on the normal equations) from a zero start, then verifies the
    normal-equation residual dropped below ``tol`` times its initial norm.
    Raises LsqConvergenceError when the iteration cap is hit first.
    """
    if max_iters is None:
        max_iters = 10 * system.n_unknowns
    mat = system_matrix(system)
    rhs = -system.offset
    result = lsqr(mat, rhs, atol=0.1 * tol, btol=0.1 * tol,
                  iter_lim=max_iters)
    psi = result[0]
    normal0 = np.linalg.norm(mat.T @ rhs)
    normal = np.linalg.norm(mat.T @ (mat @ psi - rhs))
    if normal0 > 0 and normal > tol * normal0:
        raise LsqConvergenceError(
            f"normal-equation residual {normal:.3e} above "
            f"{tol:.1e} x {normal0:.3e} after {result[2]} iterations")
    return psi


def solve_level_lsq(spec: LatticeSpec, u, level: int):
    """Minimize the level-restricted functional over binom(N, L) unknowns.

    Both move kinds keep gated configurations inside their level, so the rows
    touching the level close over its configurations.  Returns the minimizing
    values (aligned with the ascending order of ``enumerate_level``) and the
    attained level average.  Solved densely via SVD least squares, a route
    independent of the combined iterative solve.
    """
    check_dense_size(spec.num_sites)
    n = spec.num_sites
    tabs = move_tables(spec)
    dots = jump_dots(spec, u)
    members = list(enumerate_level(spec, level))
    rank = {cfg: i for i, cfg in enumerate(members)}
    n_unk = len(members)

    rows_m, cols_m, data_m, offs = [], [], [], []
    row = 0
    for k in range(spec.num_jumps):
        g = int(tabs.gate_sites[k])
        if g < 0:
            continue
        w = float(np.sqrt(tabs.probs[k]))
        for cfg in members:
            if (cfg >> g) & 1:
                continue
            img = 0
            for s in range(n):
                if s == tabs.tag_czs[k]:
                    continue
                t = int(tabs.tag_src[k, s])
                if t < 0:
                    img |= 1 << s
                else:
                    img |= ((cfg >> t) & 1) << s
            offs.append(w * float(dots[k]))
            if img != cfg:
                rows_m += [row, row]
                cols_m += [rank[img], rank[cfg]]
                data_m += [w, -w]
            row += 1
    for m in range(tabs.swap_jump.shape[0]):
        y = int(tabs.swap_y[m])
        w_site = int(tabs.swap_w[m])
        w = float(np.sqrt(0.5 * tabs.probs[tabs.swap_jump[m]]))
        mask = (1 << y) | (1 << w_site)
        for cfg in members:
            if ((cfg >> y) & 1) == ((cfg >> w_site) & 1):
                continue
            offs.append(0.0)
            rows_m += [row, row]
            cols_m += [rank[cfg ^ mask], rank[cfg]]
            data_m += [w, -w]
            row += 1

    mat = np.zeros((row, n_unk))
    mat[rows_m, cols_m] = data_m
    rhs = -np.asarray(offs)
    values, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    resid = mat @ values - rhs
    level_avg = float(resid @ resid) / comb(n, level)
    return values, level_avg


def dump_system(system: ResidualSystem, path) -> None:
    """Write the rows as a documented sparse triplet text file.

    Format: a comment header, a ``rows R cols C`` line, a ``matrix NNZ``
    section of ``row col value`` triplets (row-major, the +weight entry at
    the image column before the -weight entry at the source column, zero net
    rows skipped), then an ``offsets Q`` section of ``row value`` pairs for
    the nonzero constant terms.
    """
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# least-squares residual system\n")
        fh.write(f"rows {system.n_rows} cols {system.n_unknowns}\n")
        entries = []
        for q in range(system.n_rows):
            if system.row_img[q] != system.row_eta[q]:
                entries.append((q, int(system.row_img[q]), system.weight[q]))
                entries.append((q, int(system.row_eta[q]), -system.weight[q]))
        fh.write(f"matrix {len(entries)}\n")
        for q, c, v in entries:
            fh.write(f"{q} {c} {v:.17g}\n")
        nz = np.nonzero(system.offset)[0]
        fh.write(f"offsets {nz.shape[0]}\n")
        for q in nz:
            fh.write(f"{int(q)} {system.offset[q]:.17g}\n")

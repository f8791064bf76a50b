"""Discrete spatial operators: coefficients, fluxes, residual, Jacobian.

The state vector interleaves the species per cell, u[2K] = red and
u[2K+1] = blue, so each cell's two balance equations occupy adjacent rows.
Edge fluxes use the harmonic transmissibility |sigma| S_K S_L /
(d_K S_L + d_L S_K); a near-cancelling denominator (the coefficients S12,
S21 change sign with density) zeroes that edge's contribution and is
counted.  Boundary edges carry no flux.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .. import kernels
from .mesh import Mesh


def interleave(rho_red, rho_blue) -> np.ndarray:
    red = np.asarray(rho_red, dtype=np.float64)
    blue = np.asarray(rho_blue, dtype=np.float64)
    if red.shape != blue.shape or red.ndim != 1:
        raise ValueError("species fields must be equal-length vectors")
    u = np.empty(2 * red.shape[0])
    u[0::2] = red
    u[1::2] = blue
    return u


def split(u: np.ndarray):
    return u[0::2].copy(), u[1::2].copy()


def cell_coefficients(model, rho_red, rho_blue):
    """Coefficient quadruples (S11, S12, S21, S22) per cell plus derivatives.

    Returns (S, dS_red, dS_blue, n_clamped); S rows follow the column order
    above, derivative arrays match, and n_clamped counts cells whose total
    density fell outside the interpolation span.
    """
    rr = np.ascontiguousarray(rho_red, dtype=np.float64)
    rb = np.ascontiguousarray(rho_blue, dtype=np.float64)
    if np.any(np.isnan(rr)) or np.any(np.isnan(rb)):
        raise ValueError("NaN density")
    return kernels.cell_coeffs(rr, rb, model.trace_breakpoints,
                               model.trace_coefficients, model.bulk_trace,
                               kernels.DENSITY_FLOOR)


def edge_flux(s_K: float, s_L: float, measure: float, d_K: float, d_L: float,
              phi_K: float, phi_L: float) -> float:
    """Harmonic-average two-point flux for one edge and one coefficient."""
    a = d_K * s_L
    b = d_L * s_K
    den = a + b
    if abs(den) <= kernels.DEGENERATE_DEN_RTOL * (abs(a) + abs(b)):
        return 0.0
    # group the coefficient product so swapping (K, L) negates the value
    # bitwise: s_K*s_L, a+b and phi differences all commute exactly
    tau = measure * (s_K * s_L) / den
    return tau * (phi_L - phi_K)


def residual_vector(mesh: Mesh, model, u_prev: np.ndarray, u_cur: np.ndarray,
                    dt: float):
    """Backward-Euler residual; returns (res, n_degenerate, n_clamped)."""
    if u_prev.shape != u_cur.shape or u_cur.shape[0] != 2 * mesh.n_cells:
        raise ValueError("state vectors do not match the mesh")
    S, _, _, n_clamped = cell_coefficients(model, u_cur[0::2], u_cur[1::2])
    res, n_deg = kernels.fv_residual(
        np.ascontiguousarray(u_prev), np.ascontiguousarray(u_cur), dt,
        mesh.cell_measures, mesh.int_K, mesh.int_L, mesh.int_measure,
        mesh.int_dK, mesh.int_dL, S)
    return res, int(n_deg), int(n_clamped)


def jacobian(mesh: Mesh, model, u_cur: np.ndarray, dt: float) -> sp.csr_matrix:
    """Analytic residual Jacobian on the mesh's fixed sparsity pattern."""
    S, dSr, dSb, _ = cell_coefficients(model, u_cur[0::2], u_cur[1::2])
    data = kernels.fv_jacobian_data(
        np.ascontiguousarray(u_cur), dt, mesh.cell_measures, mesh.int_K,
        mesh.int_L, mesh.int_measure, mesh.int_dK, mesh.int_dL, S, dSr, dSb)
    n = 2 * mesh.n_cells
    mat = sp.coo_matrix((data, (mesh.jac_rows, mesh.jac_cols)), shape=(n, n))
    return mat.tocsr()

"""Hot numeric kernels, each in a numba and a pure-numpy variant.

Three groups of kernels live here, all operating on the flat arrays packed by
:func:`selfdiffusion.lattice.move_tables` or by the mesh module:

* dense sweeps over all 2^N occupancy configurations, accumulating the
  quadratic functional per particle-number level,
* evaluation of the functional on rank-1 separable functions in O(K N^2)
  operations, plus the alternating least-squares site sweep built on it,
* finite-volume residual and Jacobian assembly over mesh edges.

The numba variants stream configurations and edges with O(1) temporaries and
compensated accumulation; the numpy variants materialize intermediate arrays
and rely on numpy's deterministic reductions.  Both orderings are fixed, so
each variant is bit-reproducible run to run.  ``benchmarks/bench_backends.py``
times the pairs against each other.

The module exposes the active variant of each pair under its bare name,
chosen by :mod:`selfdiffusion.backends`; the ``*_numpy`` / ``*_numba``
spellings stay importable for parity tests and benchmarks.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .backends import HAVE_NUMBA, select

if HAVE_NUMBA:
    from numba import njit


@lru_cache(maxsize=8)
def popcounts(n_sites: int) -> np.ndarray:
    """Particle count of every configuration integer below 2**n_sites."""
    cfgs = np.arange(1 << n_sites, dtype=np.int64)
    pops = np.zeros(1 << n_sites, dtype=np.int64)
    for s in range(n_sites):
        pops += (cfgs >> s) & 1
    pops.setflags(write=False)
    return pops


# ---------------------------------------------------------------------------
# dense configuration sweeps
# ---------------------------------------------------------------------------

def dense_level_sums_numpy(psi, n_sites, probs, u_dots, gate_sites, tag_src,
                           tag_czs, swap_jump, swap_y, swap_w, pops):
    """Per-level sums of the quadratic functional's summand over all configs.

    Entry L of the result is the sum, over configurations with L occupied
    sites, of the gated tagged-jump term plus half the swap terms.  Summing
    the entries gives the full functional; dividing entry L by binom(N, L)
    gives the level average.
    """
    n_cfg = psi.shape[0]
    cfgs = np.arange(n_cfg, dtype=np.int64)
    sums = np.zeros(n_sites + 1)
    for k in range(probs.shape[0]):
        g = int(gate_sites[k])
        if g < 0:
            continue
        img = np.zeros(n_cfg, dtype=np.int64)
        for s in range(n_sites):
            if s == tag_czs[k]:
                continue
            t = int(tag_src[k, s])
            if t < 0:
                img |= 1 << s
            else:
                img |= ((cfgs >> t) & 1) << s
        gate_open = ((cfgs >> g) & 1) == 0
        diff = psi[img] - psi + u_dots[k]
        term = np.where(gate_open, probs[k] * diff * diff, 0.0)
        sums += np.bincount(pops, weights=term, minlength=n_sites + 1)
    for m in range(swap_jump.shape[0]):
        y = int(swap_y[m])
        w = int(swap_w[m])
        x = ((cfgs >> y) ^ (cfgs >> w)) & 1
        img = cfgs ^ ((x << y) | (x << w))
        diff = psi[img] - psi
        term = (0.5 * probs[swap_jump[m]]) * diff * diff
        sums += np.bincount(pops, weights=term, minlength=n_sites + 1)
    return sums


if HAVE_NUMBA:

    @njit(cache=True)
    def dense_level_sums_numba(psi, n_sites, probs, u_dots, gate_sites,
                               tag_src, tag_czs, swap_jump, swap_y, swap_w,
                               pops):  # pragma: no cover - timed separately
        n_cfg = psi.shape[0]
        sums = np.zeros(n_sites + 1)
        comp = np.zeros(n_sites + 1)  # Kahan compensation per level
        for k in range(probs.shape[0]):
            g = gate_sites[k]
            if g < 0:
                continue
            c = u_dots[k]
            p = probs[k]
            czs = tag_czs[k]
            for cfg in range(n_cfg):
                if (cfg >> g) & 1:
                    continue
                img = 0
                for s in range(n_sites):
                    if s == czs:
                        continue
                    t = tag_src[k, s]
                    if t < 0:
                        img |= 1 << s
                    else:
                        img |= ((cfg >> t) & 1) << s
                # difference first: when img == cfg the psi terms cancel
                # exactly and the drift contribution stays bit-exact
                diff = psi[img] - psi[cfg] + c
                term = p * diff * diff
                lev = pops[cfg]
                val = term - comp[lev]
                tot = sums[lev] + val
                comp[lev] = (tot - sums[lev]) - val
                sums[lev] = tot
        for m in range(swap_jump.shape[0]):
            p = 0.5 * probs[swap_jump[m]]
            y = swap_y[m]
            w = swap_w[m]
            mask = (1 << y) | (1 << w)
            for cfg in range(n_cfg):
                if ((cfg >> y) & 1) == ((cfg >> w) & 1):
                    continue
                diff = psi[cfg ^ mask] - psi[cfg]
                term = p * diff * diff
                lev = pops[cfg]
                val = term - comp[lev]
                tot = sums[lev] + val
                comp[lev] = (tot - sums[lev]) - val
                sums[lev] = tot
        return sums

else:  # pragma: no cover
    dense_level_sums_numba = None

dense_level_sums = select(dense_level_sums_numpy, dense_level_sums_numba)


# ---------------------------------------------------------------------------
# separable (rank-1) evaluation and the ALS site sweep
# ---------------------------------------------------------------------------

def separable_value_numpy(factors, probs, u_dots, gate_sites, sigma, out_kind,
                          swap_jump, swap_y, swap_w, n_half):
    """Quadratic functional of a rank-1 product function, in O(K N^2).

    ``factors[s]`` holds (value at empty, value at occupied) for site s.  The
    sum over 2^N configurations factorizes per site; each tagged move needs
    one pass over sites and each swap pair a product excluding its two sites.
    ``n_half`` is 2^(N-1), the number of configurations passing a gate.
    """
    n = factors.shape[0]
    f0 = factors[:, 0]
    f1 = factors[:, 1]
    q = f0 * f0 + f1 * f1
    s1 = f0 + f1
    total = 0.0
    for k in range(probs.shape[0]):
        g = gate_sites[k]
        if g < 0:
            continue
        c = u_dots[k]
        const_a = 1.0
        for s in range(n):
            kd = out_kind[k, s]
            if kd == 1:
                const_a *= f1[s]
            elif kd == 2:
                const_a *= f0[s]
        pa2 = 1.0
        pb2 = 1.0
        pab = 1.0
        pa1 = 1.0
        pb1 = 1.0
        for t in range(n):
            if t == g:
                continue
            r = sigma[k, t]
            pa2 *= q[r]
            pb2 *= q[t]
            pab *= f0[r] * f0[t] + f1[r] * f1[t]
            pa1 *= s1[r]
            pb1 *= s1[t]
        sa2 = const_a * const_a * pa2
        sb2 = f0[g] * f0[g] * pb2
        sab = const_a * f0[g] * pab
        sa1 = const_a * pa1
        sb1 = f0[g] * pb1
        total += probs[k] * (sa2 + sb2 - 2.0 * sab
                             + 2.0 * c * (sa1 - sb1) + c * c * n_half)
    for m in range(swap_jump.shape[0]):
        y = swap_y[m]
        w = swap_w[m]
        qf = 1.0
        qr = 1.0
        for t in range(n):
            qf *= q[t]
            if t != y and t != w:
                qr *= q[t]
        cyw = f0[y] * f0[w] + f1[y] * f1[w]
        total += probs[swap_jump[m]] * (qf - cyw * cyw * qr)
    return total


def solve_slice_scalars(a1, a2, a3, a4, a5):
    """Minimize a1 a^2 + a2 b^2 + a3 ab + a4 a + a5 b over (a, b).

    Solves the stationarity system [[2a1, a3], [a3, 2a2]] (a, b) = (-a4, -a5).
    A determinant below 1e-14 of the coefficient scale marks the slice
    singular; the minimum-norm least-squares solution is returned instead and
    the flag in the third slot is set.
    """
    p = 2.0 * a1
    r = 2.0 * a2
    m1 = -a4
    m2 = -a5
    det = p * r - a3 * a3
    scale = max(abs(p), abs(r), abs(a3))
    if scale > 0.0 and abs(det) > 1e-14 * scale * scale:
        return (m1 * r - a3 * m2) / det, (p * m2 - a3 * m1) / det, False
    # (near) singular symmetric 2x2: project onto the dominant eigenvector
    tr = p + r
    disc = math.sqrt((p - r) * (p - r) + 4.0 * a3 * a3)
    lam = 0.5 * (tr + disc)
    lam2 = 0.5 * (tr - disc)
    if abs(lam2) > abs(lam):
        lam = lam2
    if abs(lam) < 1e-300:
        return 0.0, 0.0, True
    n1 = math.hypot(a3, lam - p)
    n2 = math.hypot(lam - r, a3)
    if n1 >= n2:
        vx = a3 / n1
        vy = (lam - p) / n1
    else:
        vx = (lam - r) / n2
        vy = a3 / n2
    proj = (vx * m1 + vy * m2) / lam
    return proj * vx, proj * vy, True


def als_sweep_numpy(factors, probs, u_dots, gate_sites, sigma, out_kind,
                    swap_jump, swap_y, swap_w, n_half):
    """One full ALS sweep over all sites in ascending order, in place.

    For each site the objective restricted to that site's factor pair
    (a, b) = (occupied value, empty value) is an exact bivariate quadratic;
    it is probed at six points, the coefficients extracted by differencing,
    and the pair replaced by the quadratic's minimizer.  Returns the number
    of singular slice solves encountered.
    """
    n_singular = 0
    for s0 in range(factors.shape[0]):
        vals = np.empty(6)
        pa = (0.0, 1.0, 0.0, 2.0, 0.0, 1.0)
        pb = (0.0, 0.0, 1.0, 0.0, 2.0, 1.0)
        for i in range(6):
            factors[s0, 1] = pa[i]
            factors[s0, 0] = pb[i]
            vals[i] = separable_value_numpy(
                factors, probs, u_dots, gate_sites, sigma, out_kind,
                swap_jump, swap_y, swap_w, n_half)
        a1 = 0.5 * (vals[3] - 2.0 * vals[1] + vals[0])
        a2 = 0.5 * (vals[4] - 2.0 * vals[2] + vals[0])
        a6 = vals[0]
        a4 = vals[1] - a1 - a6
        a5 = vals[2] - a2 - a6
        a3 = vals[5] - (a1 + a2 + a4 + a5 + a6)
        a, b, sing = solve_slice_scalars(a1, a2, a3, a4, a5)
        factors[s0, 1] = a
        factors[s0, 0] = b
        if sing:
            n_singular += 1
    return n_singular


if HAVE_NUMBA:
    separable_value_numba = njit(cache=True)(separable_value_numpy)
    _solve_slice_nb = njit(cache=True)(solve_slice_scalars)

    @njit(cache=True)
    def als_sweep_numba(factors, probs, u_dots, gate_sites, sigma, out_kind,
                        swap_jump, swap_y, swap_w, n_half):
        n_singular = 0
        pa = (0.0, 1.0, 0.0, 2.0, 0.0, 1.0)
        pb = (0.0, 0.0, 1.0, 0.0, 2.0, 1.0)
        for s0 in range(factors.shape[0]):
            vals = np.empty(6)
            for i in range(6):
                factors[s0, 1] = pa[i]
                factors[s0, 0] = pb[i]
                vals[i] = separable_value_numba(
                    factors, probs, u_dots, gate_sites, sigma, out_kind,
                    swap_jump, swap_y, swap_w, n_half)
            a1 = 0.5 * (vals[3] - 2.0 * vals[1] + vals[0])
            a2 = 0.5 * (vals[4] - 2.0 * vals[2] + vals[0])
            a6 = vals[0]
            a4 = vals[1] - a1 - a6
            a5 = vals[2] - a2 - a6
            a3 = vals[5] - (a1 + a2 + a4 + a5 + a6)
            a, b, sing = _solve_slice_nb(a1, a2, a3, a4, a5)
            factors[s0, 1] = a
            factors[s0, 0] = b
            if sing:
                n_singular += 1
        return n_singular

else:  # pragma: no cover
    separable_value_numba = None
    als_sweep_numba = None

separable_value = select(separable_value_numpy, separable_value_numba)
als_sweep = select(als_sweep_numpy, als_sweep_numba)


# ---------------------------------------------------------------------------
# finite-volume assembly
# ---------------------------------------------------------------------------

#: relative floor below which a harmonic-average denominator counts as zero
DEGENERATE_DEN_RTOL = 1e-14
#: total density below which the species ratios fall back to 1/2
DENSITY_FLOOR = 1e-12


def _ppoly_clamped(xs, coef, x):
    """Evaluate a cubic piecewise polynomial and slope, clamped to its span.

    Outside [xs[0], xs[-1]] the value freezes at the endpoint and the slope
    is zero.  Returns (value, slope, clamped_flag).
    """
    clamped = False
    if x < xs[0]:
        x = xs[0]
        clamped = True
    elif x > xs[-1]:
        x = xs[-1]
        clamped = True
    i = int(np.searchsorted(xs, x, side="right")) - 1
    if i < 0:
        i = 0
    hi = xs.shape[0] - 2
    if i > hi:
        i = hi
    t = x - xs[i]
    c0 = coef[0, i]
    c1 = coef[1, i]
    c2 = coef[2, i]
    c3 = coef[3, i]
    val = ((c0 * t + c1) * t + c2) * t + c3
    der = (3.0 * c0 * t + 2.0 * c1) * t + c2
    if clamped:
        der = 0.0
    return val, der, clamped


def cell_coeffs_numpy(rr, rb, xs, coef, tr_bulk, floor):
    """Per-cell diffusion coefficients and their density derivatives.

    Returns (S, dS_dr, dS_db, n_clamped) where S has one row per cell with
    columns (S11, S12, S21, S22) built from the interpolated self-diffusion
    trace and the bulk trace; dS_dr and dS_db are the derivatives with
    respect to the red and blue densities.  Total densities outside [0, 1]
    are clamped into the interpolation span and counted.
    """
    rho = rr + rb
    x = np.clip(rho, xs[0], xs[-1])
    clamped = (rho < xs[0]) | (rho > xs[-1])
    n_clamped = int(np.count_nonzero(clamped))
    i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.shape[0] - 2)
    t = x - xs[i]
    tds = ((coef[0, i] * t + coef[1, i]) * t + coef[2, i]) * t + coef[3, i]
    dtds = np.where(clamped, 0.0,
                    (3.0 * coef[0, i] * t + 2.0 * coef[1, i]) * t + coef[2, i])
    mask = rho > floor
    rho_safe = np.where(mask, rho, 1.0)
    fb = np.where(mask, rb / rho_safe, 0.5)
    fr = np.where(mask, rr / rho_safe, 0.5)
    g = np.where(mask, (tr_bulk - tds) / rho_safe, 0.0)
    S = np.empty((rr.shape[0], 4))
    S[:, 0] = fb * tds + fr * tr_bulk
    S[:, 1] = fr * (tr_bulk - tds)
    S[:, 2] = fb * (tr_bulk - tds)
    S[:, 3] = fr * tds + fb * tr_bulk
    dSr = np.empty_like(S)
    dSb = np.empty_like(S)
    dSr[:, 0] = fb * (g + dtds)
    dSb[:, 0] = -fr * g + fb * dtds
    dSr[:, 1] = fb * g - fr * dtds
    dSb[:, 1] = -fr * (g + dtds)
    dSr[:, 2] = -fb * (g + dtds)
    dSb[:, 2] = fr * g - fb * dtds
    dSr[:, 3] = -fb * g + fr * dtds
    dSb[:, 3] = fr * (g + dtds)
    return S, dSr, dSb, n_clamped


def _edge_tau_numpy(S, iK, iL, imeas, idK, idL):
    """Harmonic-average transmissibilities and their S-derivatives per edge."""
    SK = S[iK, :]
    SL = S[iL, :]
    a = idK[:, None] * SL
    b = idL[:, None] * SK
    den = a + b
    bad = np.abs(den) <= DEGENERATE_DEN_RTOL * (np.abs(a) + np.abs(b))
    den_safe = np.where(bad, 1.0, den)
    tau = np.where(bad, 0.0, imeas[:, None] * SK * SL / den_safe)
    dtauK = np.where(bad, 0.0,
                     imeas[:, None] * idK[:, None] * SL * SL / (den_safe * den_safe))
    dtauL = np.where(bad, 0.0,
                     imeas[:, None] * idL[:, None] * SK * SK / (den_safe * den_safe))
    n_deg = int(np.count_nonzero(bad & ((np.abs(SK) + np.abs(SL)) > 0.0)))
    return tau, dtauK, dtauL, n_deg


def fv_residual_numpy(u_prev, u_cur, dt, cell_meas, iK, iL, imeas, idK, idL, S):
    """Backward-Euler residual on the interleaved (red, blue) state vector."""
    rr = u_cur[0::2]
    rb = u_cur[1::2]
    res = np.empty_like(u_cur)
    res[0::2] = cell_meas * (rr - u_prev[0::2]) / dt
    res[1::2] = cell_meas * (rb - u_prev[1::2]) / dt
    tau, _, _, n_deg = _edge_tau_numpy(S, iK, iL, imeas, idK, idL)
    dr = rr[iL] - rr[iK]
    db = rb[iL] - rb[iK]
    f1 = tau[:, 0] * dr + tau[:, 1] * db
    f2 = tau[:, 2] * dr + tau[:, 3] * db
    np.add.at(res, 2 * iK, -0.5 * f1)
    np.add.at(res, 2 * iL, 0.5 * f1)
    np.add.at(res, 2 * iK + 1, -0.5 * f2)
    np.add.at(res, 2 * iL + 1, 0.5 * f2)
    return res, n_deg


def fv_jacobian_data_numpy(u_cur, dt, cell_meas, iK, iL, imeas, idK, idL,
                           S, dSr, dSb):
    """Jacobian entries in the fixed COO layout of the mesh's sparsity pattern.

    Layout: 2*n_cells diagonal time-derivative entries, then 16 blocks of one
    entry per interior edge, ordered (rows 2K, 2K+1, 2L, 2L+1) x (cols 2K,
    2K+1, 2L, 2L+1) with the column index fastest.
    """
    rr = u_cur[0::2]
    rb = u_cur[1::2]
    tau, dtauK, dtauL, _ = _edge_tau_numpy(S, iK, iL, imeas, idK, idL)
    dr = rr[iL] - rr[iK]
    db = rb[iL] - rb[iK]

    dF1_rK = dtauK[:, 0] * dSr[iK, 0] * dr - tau[:, 0] + dtauK[:, 1] * dSr[iK, 1] * db
    dF1_bK = dtauK[:, 0] * dSb[iK, 0] * dr + dtauK[:, 1] * dSb[iK, 1] * db - tau[:, 1]
    dF1_rL = dtauL[:, 0] * dSr[iL, 0] * dr + tau[:, 0] + dtauL[:, 1] * dSr[iL, 1] * db
    dF1_bL = dtauL[:, 0] * dSb[iL, 0] * dr + dtauL[:, 1] * dSb[iL, 1] * db + tau[:, 1]
    dF2_rK = dtauK[:, 2] * dSr[iK, 2] * dr - tau[:, 2] + dtauK[:, 3] * dSr[iK, 3] * db
    dF2_bK = dtauK[:, 2] * dSb[iK, 2] * dr + dtauK[:, 3] * dSb[iK, 3] * db - tau[:, 3]
    dF2_rL = dtauL[:, 2] * dSr[iL, 2] * dr + tau[:, 2] + dtauL[:, 3] * dSr[iL, 3] * db
    dF2_bL = dtauL[:, 2] * dSb[iL, 2] * dr + dtauL[:, 3] * dSb[iL, 3] * db + tau[:, 3]

    n2 = 2 * cell_meas.shape[0]
    diag = np.empty(n2)
    diag[0::2] = cell_meas / dt
    diag[1::2] = cell_meas / dt
    return np.concatenate([
        diag,
        -0.5 * dF1_rK, -0.5 * dF1_bK, -0.5 * dF1_rL, -0.5 * dF1_bL,
        -0.5 * dF2_rK, -0.5 * dF2_bK, -0.5 * dF2_rL, -0.5 * dF2_bL,
        0.5 * dF1_rK, 0.5 * dF1_bK, 0.5 * dF1_rL, 0.5 * dF1_bL,
        0.5 * dF2_rK, 0.5 * dF2_bK, 0.5 * dF2_rL, 0.5 * dF2_bL,
    ])


if HAVE_NUMBA:

    @njit(cache=True)
    def cell_coeffs_numba(rr, rb, xs, coef, tr_bulk, floor):
        nc = rr.shape[0]
        S = np.empty((nc, 4))
        dSr = np.empty((nc, 4))
        dSb = np.empty((nc, 4))
        n_clamped = 0
        hi = xs.shape[0] - 2
        for K in range(nc):
            rho = rr[K] + rb[K]
            x = rho
            clamped = False
            if x < xs[0]:
                x = xs[0]
                clamped = True
            elif x > xs[-1]:
                x = xs[-1]
                clamped = True
            if clamped:
                n_clamped += 1
            i = int(np.searchsorted(xs, x, side="right")) - 1
            if i < 0:
                i = 0
            if i > hi:
                i = hi
            t = x - xs[i]
            tds = ((coef[0, i] * t + coef[1, i]) * t + coef[2, i]) * t + coef[3, i]
            if clamped:
                dtds = 0.0
            else:
                dtds = (3.0 * coef[0, i] * t + 2.0 * coef[1, i]) * t + coef[2, i]
            if rho > floor:
                fb = rb[K] / rho
                fr = rr[K] / rho
                g = (tr_bulk - tds) / rho
            else:
                fb = 0.5
                fr = 0.5
                g = 0.0
            S[K, 0] = fb * tds + fr * tr_bulk
            S[K, 1] = fr * (tr_bulk - tds)
            S[K, 2] = fb * (tr_bulk - tds)
            S[K, 3] = fr * tds + fb * tr_bulk
            dSr[K, 0] = fb * (g + dtds)
            dSb[K, 0] = -fr * g + fb * dtds
            dSr[K, 1] = fb * g - fr * dtds
            dSb[K, 1] = -fr * (g + dtds)
            dSr[K, 2] = -fb * (g + dtds)
            dSb[K, 2] = fr * g - fb * dtds
            dSr[K, 3] = -fb * g + fr * dtds
            dSb[K, 3] = fr * (g + dtds)
        return S, dSr, dSb, n_clamped

    @njit(cache=True)
    def fv_residual_numba(u_prev, u_cur, dt, cell_meas, iK, iL, imeas, idK,
                          idL, S):
        nc = cell_meas.shape[0]
        res = np.empty(2 * nc)
        for K in range(nc):
            res[2 * K] = cell_meas[K] * (u_cur[2 * K] - u_prev[2 * K]) / dt
            res[2 * K + 1] = cell_meas[K] * (u_cur[2 * K + 1] - u_prev[2 * K + 1]) / dt
        n_deg = 0
        for e in range(iK.shape[0]):
            K = iK[e]
            L = iL[e]
            dr = u_cur[2 * L] - u_cur[2 * K]
            db = u_cur[2 * L + 1] - u_cur[2 * K + 1]
            f1 = 0.0
            f2 = 0.0
            for j in range(4):
                sk = S[K, j]
                sl = S[L, j]
                a = idK[e] * sl
                b = idL[e] * sk
                den = a + b
                if abs(den) <= DEGENERATE_DEN_RTOL * (abs(a) + abs(b)):
                    if abs(sk) + abs(sl) > 0.0:
                        n_deg += 1
                    continue
                tau = imeas[e] * sk * sl / den
                grad = dr if j == 0 or j == 2 else db
                if j < 2:
                    f1 += tau * grad
                else:
                    f2 += tau * grad
            res[2 * K] -= 0.5 * f1
            res[2 * L] += 0.5 * f1
            res[2 * K + 1] -= 0.5 * f2
            res[2 * L + 1] += 0.5 * f2
        return res, n_deg

    @njit(cache=True)
    def fv_jacobian_data_numba(u_cur, dt, cell_meas, iK, iL, imeas, idK, idL,
                               S, dSr, dSb):
        nc = cell_meas.shape[0]
        ne = iK.shape[0]
        data = np.zeros(2 * nc + 16 * ne)
        for K in range(nc):
            data[2 * K] = cell_meas[K] / dt
            data[2 * K + 1] = cell_meas[K] / dt
        tau = np.empty(4)
        dtK = np.empty(4)
        dtL = np.empty(4)
        for e in range(ne):
            K = iK[e]
            L = iL[e]
            dr = u_cur[2 * L] - u_cur[2 * K]
            db = u_cur[2 * L + 1] - u_cur[2 * K + 1]
            for j in range(4):
                sk = S[K, j]
                sl = S[L, j]
                a = idK[e] * sl
                b = idL[e] * sk
                den = a + b
                if abs(den) <= DEGENERATE_DEN_RTOL * (abs(a) + abs(b)):
                    tau[j] = 0.0
                    dtK[j] = 0.0
                    dtL[j] = 0.0
                else:
                    tau[j] = imeas[e] * sk * sl / den
                    dtK[j] = imeas[e] * idK[e] * sl * sl / (den * den)
                    dtL[j] = imeas[e] * idL[e] * sk * sk / (den * den)
            dF1_rK = dtK[0] * dSr[K, 0] * dr - tau[0] + dtK[1] * dSr[K, 1] * db
            dF1_bK = dtK[0] * dSb[K, 0] * dr + dtK[1] * dSb[K, 1] * db - tau[1]
            dF1_rL = dtL[0] * dSr[L, 0] * dr + tau[0] + dtL[1] * dSr[L, 1] * db
            dF1_bL = dtL[0] * dSb[L, 0] * dr + dtL[1] * dSb[L, 1] * db + tau[1]
            dF2_rK = dtK[2] * dSr[K, 2] * dr - tau[2] + dtK[3] * dSr[K, 3] * db
            dF2_bK = dtK[2] * dSb[K, 2] * dr + dtK[3] * dSb[K, 3] * db - tau[3]
            dF2_rL = dtL[2] * dSr[L, 2] * dr + tau[2] + dtL[3] * dSr[L, 3] * db
            dF2_bL = dtL[2] * dSb[L, 2] * dr + dtL[3] * dSb[L, 3] * db + tau[3]
            base = 2 * nc
            data[base + 0 * ne + e] = -0.5 * dF1_rK
            data[base + 1 * ne + e] = -0.5 * dF1_bK
            data[base + 2 * ne + e] = -0.5 * dF1_rL
            data[base + 3 * ne + e] = -0.5 * dF1_bL
            data[base + 4 * ne + e] = -0.5 * dF2_rK
            data[base + 5 * ne + e] = -0.5 * dF2_bK
            data[base + 6 * ne + e] = -0.5 * dF2_rL
            data[base + 7 * ne + e] = -0.5 * dF2_bL
            data[base + 8 * ne + e] = 0.5 * dF1_rK
            data[base + 9 * ne + e] = 0.5 * dF1_bK
            data[base + 10 * ne + e] = 0.5 * dF1_rL
            data[base + 11 * ne + e] = 0.5 * dF1_bL
            data[base + 12 * ne + e] = 0.5 * dF2_rK
            data[base + 13 * ne + e] = 0.5 * dF2_bK
            data[base + 14 * ne + e] = 0.5 * dF2_rL
            data[base + 15 * ne + e] = 0.5 * dF2_bL
        return data

else:  # pragma: no cover
    cell_coeffs_numba = None
    fv_residual_numba = None
    fv_jacobian_data_numba = None

cell_coeffs = select(cell_coeffs_numpy, cell_coeffs_numba)
fv_residual = select(fv_residual_numpy, fv_residual_numba)
fv_jacobian_data = select(fv_jacobian_data_numpy, fv_jacobian_data_numba)

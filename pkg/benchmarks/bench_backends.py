"""Timing comparison of the numpy and numba kernel variants.

Run from the repository root:

    python3 benchmarks/bench_backends.py
    python3 benchmarks/bench_backends.py --large --repeat 7

Each kernel is timed on identical inputs with both implementations; the
table reports the best wall time over the repeats and the speedup.  The
numba column is skipped when numba is not importable.
"""

import argparse
import time

import numpy as np

from selfdiffusion import kernels
from selfdiffusion.als import SeparableFunction, _kernel_args
from selfdiffusion.backends import HAVE_NUMBA
from selfdiffusion.dsmodel import constant_model
from selfdiffusion.fvm.mesh import build_cartesian_mesh
from selfdiffusion.fvm.scheme import cell_coefficients, interleave
from selfdiffusion.lattice import build_lattice, jump_dots, move_tables, reference_lattice_2d


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def dense_args(spec, seed=0):
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(2 ** spec.num_sites)
    tabs = move_tables(spec)
    dots = jump_dots(spec, (1.0,) + (0.0,) * (spec.d - 1))
    pops = kernels.popcounts(spec.num_sites)
    return (psi, spec.num_sites, tabs.probs, dots, tabs.gate_sites,
            tabs.tag_src, tabs.tag_czs, tabs.swap_jump, tabs.swap_y,
            tabs.swap_w, pops)


def fv_inputs(n):
    mesh = build_cartesian_mesh(n, n)
    model = constant_model(2, 8, 0.5 * np.eye(2), 0.5 * np.eye(2))
    rng = np.random.default_rng(1)
    u_prev = interleave(0.2 + 0.3 * rng.random(mesh.n_cells),
                        0.2 + 0.3 * rng.random(mesh.n_cells))
    u_cur = u_prev + 0.01 * rng.standard_normal(2 * mesh.n_cells)
    S, dSr, dSb, _ = cell_coefficients(model, u_cur[0::2], u_cur[1::2])
    return mesh, u_prev, u_cur, S, dSr, dSb


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5,
                        help="timing repeats per case (default 5)")
    parser.add_argument("--large", action="store_true",
                        help="add a 2^20-configuration dense sweep")
    args = parser.parse_args()

    cases = []

    ref = reference_lattice_2d()
    pa = dense_args(ref)
    cases.append(("dense sweep, 2^8 configs", 50,
                  lambda: kernels.dense_level_sums_numpy(*pa),
                  lambda: kernels.dense_level_sums_numba(*pa)))

    chain = build_lattice(8, 1, [((1,), 0.5), ((-1,), 0.5)])
    ca = dense_args(chain)
    cases.append(("dense sweep, 2^16 configs", 3,
                  lambda: kernels.dense_level_sums_numpy(*ca),
                  lambda: kernels.dense_level_sums_numba(*ca)))

    if args.large:
        big = build_lattice(10, 1, [((1,), 0.5), ((-1,), 0.5)])
        ba = dense_args(big)
        cases.append(("dense sweep, 2^20 configs", 1,
                      lambda: kernels.dense_level_sums_numpy(*ba),
                      lambda: kernels.dense_level_sums_numba(*ba)))

    rng = np.random.default_rng(2)
    fac = np.ascontiguousarray(rng.standard_normal((ref.num_sites, 2)))
    ka = _kernel_args(ref, (1.0, 0.0))
    cases.append(("separable value, 2^8 configs", 500,
                  lambda: kernels.separable_value_numpy(fac, *ka),
                  lambda: kernels.separable_value_numba(fac, *ka)))

    def sweep(impl):
        work = fac.copy()
        impl(work, *ka)

    cases.append(("als sweep, 2^8 configs", 200,
                  lambda: sweep(kernels.als_sweep_numpy),
                  lambda: sweep(kernels.als_sweep_numba)))

    mesh, u_prev, u_cur, S, dSr, dSb = fv_inputs(64)
    ra = (u_prev, u_cur, 1e-3, mesh.cell_measures, mesh.int_K, mesh.int_L,
          mesh.int_measure, mesh.int_dK, mesh.int_dL, S)
    ja = (u_cur, 1e-3, mesh.cell_measures, mesh.int_K, mesh.int_L,
          mesh.int_measure, mesh.int_dK, mesh.int_dL, S, dSr, dSb)
    cases.append(("fv residual, 64x64 cells", 200,
                  lambda: kernels.fv_residual_numpy(*ra),
                  lambda: kernels.fv_residual_numba(*ra)))
    cases.append(("fv jacobian data, 64x64 cells", 200,
                  lambda: kernels.fv_jacobian_data_numpy(*ja),
                  lambda: kernels.fv_jacobian_data_numba(*ja)))

    print(f"{'kernel':<32} {'calls':>5} {'numpy':>12} {'numba':>12} {'speedup':>8}")
    for name, calls, run_numpy, run_numba in cases:
        t_np = best_time(lambda: [run_numpy() for _ in range(calls)],
                         args.repeat) / calls
        if HAVE_NUMBA:
            run_numba()  # compile outside the timed region
            t_nb = best_time(lambda: [run_numba() for _ in range(calls)],
                             args.repeat) / calls
            print(f"{name:<32} {calls:>5} {t_np:>12.3e} {t_nb:>12.3e} "
                  f"{t_np / t_nb:>7.1f}x")
        else:
            print(f"{name:<32} {calls:>5} {t_np:>12.3e} {'n/a':>12} {'':>8}")


if __name__ == "__main__":
    main()

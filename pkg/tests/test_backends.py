"""Numpy and numba kernel variants must agree on identical inputs."""

import os
import subprocess
import sys

import numpy as np
import pytest

from selfdiffusion import kernels
from selfdiffusion.als import _kernel_args
from selfdiffusion.backends import HAVE_NUMBA, backend_name
from selfdiffusion.fvm.mesh import build_cartesian_mesh
from selfdiffusion.fvm.scheme import cell_coefficients, interleave
from selfdiffusion.lattice import jump_dots, move_tables

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not importable")


def _dense_args(spec, psi, u):
    tabs = move_tables(spec)
    dots = jump_dots(spec, u)
    pops = kernels.popcounts(spec.num_sites)
    return (psi, spec.num_sites, tabs.probs, dots, tabs.gate_sites,
            tabs.tag_src, tabs.tag_czs, tabs.swap_jump, tabs.swap_y,
            tabs.swap_w, pops)


def test_dense_level_sums_parity(spec, rng):
    psi = rng.standard_normal(2 ** spec.num_sites)
    args = _dense_args(spec, psi, (1.0, 1.0))
    np.testing.assert_allclose(kernels.dense_level_sums_numba(*args),
                               kernels.dense_level_sums_numpy(*args),
                               rtol=1e-13)


def test_separable_value_parity(spec, rng):
    factors = np.ascontiguousarray(rng.standard_normal((spec.num_sites, 2)))
    args = _kernel_args(spec, (1.0, 0.0))
    a = kernels.separable_value_numpy(factors, *args)
    b = kernels.separable_value_numba(factors, *args)
    assert a == pytest.approx(b, rel=1e-13)


def test_als_sweep_parity(spec, rng):
    start = rng.standard_normal((spec.num_sites, 2))
    args = _kernel_args(spec, (0.0, 1.0))
    fa = np.ascontiguousarray(start.copy())
    fb = np.ascontiguousarray(start.copy())
    na = kernels.als_sweep_numpy(fa, *args)
    nb = kernels.als_sweep_numba(fb, *args)
    assert na == nb
    np.testing.assert_allclose(fa, fb, rtol=1e-12, atol=1e-14)


def test_cell_coeffs_parity(lsq_model, rng):
    rr = np.concatenate([rng.random(200), [0.0, 0.0, 1.5]])
    rb = np.concatenate([rng.random(200) * 0.4, [0.0, 0.4, 0.0]])
    args = (rr, rb, lsq_model.trace_breakpoints,
            lsq_model.trace_coefficients, lsq_model.bulk_trace,
            kernels.DENSITY_FLOOR)
    Sa, dra, dba, ca = kernels.cell_coeffs_numpy(*args)
    Sb, drb, dbb, cb = kernels.cell_coeffs_numba(*args)
    assert ca == cb
    np.testing.assert_allclose(Sa, Sb, rtol=1e-14)
    np.testing.assert_allclose(dra, drb, rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(dba, dbb, rtol=1e-13, atol=1e-14)


def _fv_inputs(lsq_model, rng):
    mesh = build_cartesian_mesh(6, 6)
    u_prev = interleave(0.2 + 0.3 * rng.random(36), 0.2 + 0.3 * rng.random(36))
    u_cur = u_prev + 0.02 * rng.standard_normal(72)
    S, dSr, dSb, _ = cell_coefficients(lsq_model, u_cur[0::2], u_cur[1::2])
    return mesh, u_prev, u_cur, S, dSr, dSb


def test_fv_residual_parity(lsq_model, rng):
    mesh, u_prev, u_cur, S, _, _ = _fv_inputs(lsq_model, rng)
    args = (u_prev, u_cur, 1e-3, mesh.cell_measures, mesh.int_K, mesh.int_L,
            mesh.int_measure, mesh.int_dK, mesh.int_dL, S)
    ra, na = kernels.fv_residual_numpy(*args)
    rb, nb = kernels.fv_residual_numba(*args)
    assert na == nb
    np.testing.assert_allclose(ra, rb, rtol=1e-12, atol=1e-13)


def test_fv_jacobian_data_parity(lsq_model, rng):
    mesh, _, u_cur, S, dSr, dSb = _fv_inputs(lsq_model, rng)
    args = (u_cur, 1e-3, mesh.cell_measures, mesh.int_K, mesh.int_L,
            mesh.int_measure, mesh.int_dK, mesh.int_dL, S, dSr, dSb)
    da = kernels.fv_jacobian_data_numpy(*args)
    db = kernels.fv_jacobian_data_numba(*args)
    np.testing.assert_allclose(da, db, rtol=1e-12, atol=1e-13)


def test_backend_env_flag_forces_numpy():
    code = ("import selfdiffusion.backends as b; "
            "print(b.backend_name())")
    env = dict(os.environ, SELFDIFFUSION_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    assert backend_name() in ("numba", "numpy")


def test_backend_env_flag_rejects_unknown():
    env = dict(os.environ, SELFDIFFUSION_BACKEND="turbo")
    out = subprocess.run([sys.executable, "-c", "import selfdiffusion"],
                         env=env, capture_output=True, text=True)
    assert out.returncode != 0
    assert "SELFDIFFUSION_BACKEND" in out.stderr

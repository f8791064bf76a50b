"""Acceptance gates, one numbered test per criterion.

Each test prints one ACCEPTANCE line outside pytest's capture so a full
run always shows the per-criterion verdicts.
"""

import numpy as np
import pytest

from selfdiffusion.als import SeparableFunction, densify, eval_separable_A
from selfdiffusion.functional import (
    eval_dense_A,
    eval_level_A,
    level_binoms,
    level_values,
)
from selfdiffusion.fvm.mesh import build_cartesian_mesh
from selfdiffusion.fvm.scheme import interleave, jacobian, residual_vector
from selfdiffusion.lsq import solve_level_lsq
from selfdiffusion.validate import run_validation

TARGET_OPTIMUM = 53.594

LSQ_E1 = (0.5000, 0.4196, 0.3430, 0.2708, 0.2035, 0.1421, 0.0873, 0.0398, 0.0)
LSQ_DIAG = (1.0000, 0.8393, 0.6860, 0.5416, 0.4070, 0.2843, 0.1747, 0.0795, 0.0)
ALS_E1 = (0.5000, 0.4197, 0.3433, 0.2714, 0.2044, 0.1430, 0.0878, 0.0398, 0.0)


@pytest.fixture
def report(capsys):
    def _report(num, slug, ok, detail=""):
        verdict = "PASS" if ok else "FAIL"
        line = f"ACCEPTANCE {num:02d} {slug}: {verdict}"
        if detail:
            line += f"  ({detail})"
        with capsys.disabled():
            print(line, flush=True)
        return line

    return _report


def test_01_lsq_optimum_and_runtime(spec, lsq_timing, report):
    psi, elapsed = lsq_timing
    total = eval_dense_A(spec, psi, (1.0, 0.0))
    rel = abs(total - TARGET_OPTIMUM) / TARGET_OPTIMUM
    ok = rel <= 2e-3 and elapsed < 10.0
    line = report(1, "lsq-optimum-and-runtime", ok,
                   f"optimum {total:.6f}, rel err {rel:.2e}, {elapsed:.2f} s")
    assert ok, line


def test_02_lsq_level_tables(spec, lsq_psi, report):
    devs = {}
    for u, expected in (((1.0, 0.0), LSQ_E1), ((0.0, 1.0), LSQ_E1),
                        ((1.0, 1.0), LSQ_DIAG)):
        vals = level_values(spec, lsq_psi[u], u)
        devs[u] = float(np.max(np.abs(vals - np.array(expected))))
    worst = max(devs.values())
    ok = worst <= 5e-4
    line = report(2, "lsq-level-tables", ok, f"max deviation {worst:.2e}")
    assert ok, line


def test_03_als_level_table(spec, als_20, report):
    vals = level_values(spec, densify(spec, als_20.best.factors), (1.0, 0.0))
    worst = float(np.max(np.abs(vals - np.array(ALS_E1))))
    ok = worst <= 1e-3
    line = report(3, "als-level-table", ok, f"max deviation {worst:.2e}")
    assert ok, line


def test_04_als_restart_statistics(als_100, report):
    finals = als_100.final_values
    stats = als_100.summary()
    in_band = bool(np.all((finals >= 53.74) & (finals <= 53.80)))
    mean_ok = abs(stats["mean"] - 53.759) <= 0.05
    ok = in_band and mean_ok and stats["restarts"] == 100
    line = report(4, "als-restart-statistics", ok,
                   f"min {stats['min']:.6f}, mean {stats['mean']:.6f}, "
                   f"max {stats['max']:.6f}, seed {stats['seed']}")
    assert ok, line


def test_05_als_optimum_brackets_lsq(spec, als_100, lsq_psi, report):
    lsq_opt = eval_dense_A(spec, lsq_psi[(1.0, 0.0)], (1.0, 0.0))
    als_min = float(als_100.final_values.min())
    ok = als_min <= 1.005 * lsq_opt and als_min >= lsq_opt - 1e-9
    line = report(5, "als-optimum-brackets-lsq", ok,
                   f"als {als_min:.6f} vs lsq {lsq_opt:.6f}, "
                   f"ratio {als_min / lsq_opt:.6f}")
    assert ok, line


def test_06_matrix_structure(lsq_model, als_model, report):
    worst = 0.0
    for model in (lsq_model, als_model):
        eye_dev = np.max(np.abs(model.eval_Ds(0.0) - np.eye(2)))
        zero_dev = np.max(np.abs(model.eval_Ds(1.0)))
        off = np.max(np.abs(model.level_matrices[:, 0, 1]))
        aniso = np.max(np.abs(model.level_matrices[:, 0, 0]
                              - model.level_matrices[:, 1, 1]))
        worst = max(worst, eye_dev, zero_dev, off, aniso)
    ok = worst <= 1e-3
    line = report(6, "matrix-structure", ok,
                   f"max structural deviation {worst:.2e}")
    assert ok, line


def test_07_separable_evaluator(spec, report):
    rng = np.random.default_rng(777)
    worst = 0.0
    for _ in range(100):
        R = SeparableFunction(rng.standard_normal((spec.num_sites, 2)))
        dense = densify(spec, R)
        for u in ((1.0, 0.0), (0.0, 1.0), (1.0, 1.0)):
            a = eval_separable_A(spec, R, u)
            b = eval_dense_A(spec, dense, u)
            worst = max(worst, abs(a - b) / abs(b))
    ok = worst <= 1e-10
    line = report(7, "separable-evaluator", ok, f"max rel error {worst:.2e}")
    assert ok, line


def test_08_per_level_solves(spec, lsq_psi, report):
    worst = 0.0
    for lv in range(spec.num_sites + 1):
        _, level_opt = solve_level_lsq(spec, (1.0, 0.0), lv)
        combined = eval_level_A(spec, lsq_psi[(1.0, 0.0)], (1.0, 0.0), lv)
        worst = max(worst, abs(level_opt - combined))
    ok = worst <= 1e-6
    line = report(8, "per-level-solves", ok, f"max gap {worst:.2e}")
    assert ok, line


def test_09_jacobian_vs_finite_differences(lsq_model, report):
    rng = np.random.default_rng(2024)
    mesh = build_cartesian_mesh(8, 8)
    dt, h = 1e-3, 1e-6
    worst = 0.0
    for _ in range(10):
        u_prev = interleave(0.3 + 0.2 * rng.random(64),
                            0.3 + 0.2 * rng.random(64))
        u = u_prev + 0.01 * rng.standard_normal(128)
        jac = jacobian(mesh, lsq_model, u, dt).toarray()
        fd = np.empty_like(jac)
        for j in range(u.shape[0]):
            up, um = u.copy(), u.copy()
            up[j] += h
            um[j] -= h
            rp, _, _ = residual_vector(mesh, lsq_model, u_prev, up, dt)
            rm, _, _ = residual_vector(mesh, lsq_model, u_prev, um, dt)
            fd[:, j] = (rp - rm) / (2 * h)
        err = np.abs(jac - fd) / np.maximum(np.abs(fd), 1e-6)
        worst = max(worst, float(err.max()))
    ok = worst <= 1e-6
    line = report(9, "jacobian-vs-finite-differences", ok,
                   f"max rel error {worst:.2e}")
    assert ok, line


def test_10_reference_simulation(reference_run, report):
    mesh, result, elapsed = reference_run
    rows = np.array(result.diagnostics)
    mass_red, mass_blue = rows[:, 2], rows[:, 3]
    drift = max(float(np.max(np.abs(mass_red - mass_red[0]) / mass_red[0])),
                float(np.max(np.abs(mass_blue - mass_blue[0]) / mass_blue[0])))
    mass_ok = drift <= 1e-8

    final = result.final_state
    red_dev = float(np.max(np.abs(final.rho_red - 0.25)))
    blue_dev = float(np.max(np.abs(final.rho_blue - 0.5)))
    final_ok = red_dev <= 1e-3 and blue_dev <= 1e-3

    iters = result.newton_iters
    med = float(np.median(iters))
    newton_ok = int(iters.max()) <= 4 and med in (2.0, 3.0)

    violation = result.counters["max_bound_violation"]
    bounds_ok = violation <= 1e-10
    time_ok = elapsed < 300.0

    ok = mass_ok and final_ok and newton_ok and bounds_ok and time_ok
    line = report(10, "reference-simulation", ok,
                   f"mass drift {drift:.2e}, final dev {red_dev:.2e}/"
                   f"{blue_dev:.2e}, newton max {int(iters.max())} "
                   f"median {med:g}, bound violation {violation:.2e}, "
                   f"{elapsed:.1f} s")
    assert ok, line


def test_11_validation_suite(report):
    results = run_validation()
    bad = [name for name, good, _ in results if not good]
    ok = not bad
    line = report(11, "validation-suite", ok,
                   f"{len(results)} checks" + (f", failed: {bad}" if bad else ""))
    assert ok, line

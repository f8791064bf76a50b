"""Shared fixtures: the expensive solves run once per session."""

from __future__ import annotations

import time

import numpy as np
import pytest

from selfdiffusion.als import multi_start
from selfdiffusion.dsmodel import reference_model
from selfdiffusion.lattice import reference_lattice_2d
from selfdiffusion.lsq import assemble_system, solve_lsq

DIRECTIONS = ((1.0, 0.0), (0.0, 1.0), (1.0, 1.0))


@pytest.fixture(scope="session")
def spec():
    return reference_lattice_2d()


@pytest.fixture(scope="session")
def lsq_psi(spec):
    """Combined least-squares minimizer per polarization direction."""
    return {u: solve_lsq(assemble_system(spec, u)) for u in DIRECTIONS}


@pytest.fixture(scope="session")
def lsq_timing(spec):
    """One timed least-squares solve, start to finish."""
    t0 = time.perf_counter()
    psi = solve_lsq(assemble_system(spec, (1.0, 0.0)))
    return psi, time.perf_counter() - t0


@pytest.fixture(scope="session")
def als_20(spec):
    return multi_start(spec, (1.0, 0.0), restarts=20, seed=0, epsilon=1e-5)


@pytest.fixture(scope="session")
def als_100(spec):
    return multi_start(spec, (1.0, 0.0), restarts=100, seed=0, epsilon=1e-5)


@pytest.fixture(scope="session")
def lsq_model():
    return reference_model(method="lsq")


@pytest.fixture(scope="session")
def als_model():
    return reference_model(method="als", restarts=20, seed=0)


@pytest.fixture(scope="session")
def reference_run(als_model):
    """The long reference simulation, timed; shared by the final criteria."""
    from selfdiffusion.fvm.mesh import build_cartesian_mesh
    from selfdiffusion.fvm.simulate import SimConfig, time_loop

    mesh = build_cartesian_mesh(18, 18)
    config = SimConfig(
        dt=1e-3, t_final=10.0, mesh={"type": "cartesian", "nx": 18, "ny": 18},
        initial_red="0.25 + 0.25*cos(pi*x)*cos(pi*y)",
        initial_blue="0.5 - 0.5*cos(pi*x)*cos(pi*y)",
        newton_tol=1e-8)
    t0 = time.perf_counter()
    result = time_loop(mesh, als_model, config)
    elapsed = time.perf_counter() - t0
    return mesh, result, elapsed


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)

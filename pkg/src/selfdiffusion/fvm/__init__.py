"""Cell-centered finite-volume solver for the two-species diffusion system."""

from .mesh import Mesh, MeshError, build_cartesian_mesh, build_mesh, load_mesh, save_mesh
from .scheme import cell_coefficients, edge_flux, interleave, jacobian, residual_vector, split
from .simulate import (
    NewtonError,
    SimConfig,
    SimResult,
    SimState,
    initial_state,
    load_sim_config,
    newton_solve,
    time_loop,
)

__all__ = [
    "Mesh",
    "MeshError",
    "NewtonError",
    "SimConfig",
    "SimResult",
    "SimState",
    "build_cartesian_mesh",
    "build_mesh",
    "cell_coefficients",
    "edge_flux",
    "initial_state",
    "interleave",
    "jacobian",
    "load_mesh",
    "load_sim_config",
    "newton_solve",
    "residual_vector",
    "save_mesh",
    "split",
    "time_loop",
]

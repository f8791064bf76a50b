"""Self-diffusion of a tagged particle in a symmetric exclusion process.

The package computes the self-diffusion matrix of a tagged particle hopping
on a periodic lattice among identical hard-core particles, by minimizing a
quadratic functional over functions of the environment configuration.  Two
minimization routes are provided: an exact sparse least-squares solve over
all 2^N configurations, and an alternating least-squares iteration over
rank-1 separable functions whose cost per evaluation is polynomial in N.
The resulting density-dependent diffusion matrix is interpolated by natural
cubic splines and drives a cell-centered finite-volume solver for a
two-species cross-diffusion system.
"""

__version__ = "0.1.0"

from .lattice import LatticeSpec, build_lattice, reference_lattice_2d
from .dsmodel import SelfDiffusionModel

__all__ = [
    "LatticeSpec",
    "build_lattice",
    "reference_lattice_2d",
    "SelfDiffusionModel",
    "__version__",
]

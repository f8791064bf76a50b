"""Numba/numpy backend selection for the hot kernels.

Every performance-critical kernel in :mod:`selfdiffusion.kernels` exists in
two variants: a compiled numba version and a plain numpy version.  Which one
the library uses is decided once at import time from the environment variable
``SELFDIFFUSION_BACKEND``:

* ``auto`` (default): use numba when it imports cleanly, else fall back.
* ``numba``: require numba, raise if it is unavailable.
* ``numpy``: force the pure-numpy path (useful for debugging and as the
  reference in benchmarks).

Set the variable before importing the package; the choice is frozen after
import.  Both variants stay importable so tests and benchmarks can compare
them directly.
"""

import logging
import os

log = logging.getLogger(__name__)

ENV_FLAG = "SELFDIFFUSION_BACKEND"

_requested = os.environ.get(ENV_FLAG, "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"{ENV_FLAG} must be one of 'auto', 'numba', 'numpy', got {_requested!r}"
    )

try:
    from numba import njit  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAVE_NUMBA = False

if _requested == "numba" and not HAVE_NUMBA:  # pragma: no cover
    raise ImportError(f"{ENV_FLAG}=numba but numba is not importable")

USE_NUMBA = HAVE_NUMBA and _requested != "numpy"

if not USE_NUMBA:
    log.info("selfdiffusion running on the pure-numpy backend")


def backend_name() -> str:
    """Name of the active backend, 'numba' or 'numpy'."""
    return "numba" if USE_NUMBA else "numpy"


def select(numpy_impl, numba_impl):
    """Pick the active implementation of a kernel pair."""
    if USE_NUMBA and numba_impl is not None:
        return numba_impl
    return numpy_impl

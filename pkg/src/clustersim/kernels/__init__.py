"""Backend selection for the placement hot kernels.

The numba backend is used when importable; set CLUSTERSIM_KERNELS=numpy to
force the pure-numpy path, or CLUSTERSIM_KERNELS=numba to fail loudly when
numba is missing.
"""

import os

_requested = os.environ.get("CLUSTERSIM_KERNELS", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"CLUSTERSIM_KERNELS must be auto|numba|numpy, got {_requested!r}")

_impl = None
if _requested in ("auto", "numba"):
    try:
        from clustersim.kernels import _numba as _impl
        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        _impl = None
if _impl is None:
    from clustersim.kernels import _numpy as _impl
    BACKEND = "numpy"

first_fit_nodes = _impl.first_fit_nodes
best_fit_nodes = _impl.best_fit_nodes
free_gpu_nodes = _impl.free_gpu_nodes
lowest_idle_slots = _impl.lowest_idle_slots
earliest_feasible_group = _impl.earliest_feasible_group


def backend_name():
    return BACKEND

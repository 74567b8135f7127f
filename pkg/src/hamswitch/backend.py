"""Kernel backend selection.

The batched protocol-evaluation kernels exist twice: a numba ``@njit``
version (default) and a pure-numpy version using stacked BLAS calls.  Set
``HAMSWITCH_BACKEND=numpy`` (or ``numba``) to force one; the numpy path is
also the automatic fallback when numba is unavailable.  Small Hilbert
spaces (dim <= 16) favor numba's unrolled loops, larger ones favor BLAS;
``benchmarks/bench_kernels.py`` measures the crossover on your machine.
"""

from __future__ import annotations

import os
import warnings

BACKEND_ENV_VAR = "HAMSWITCH_BACKEND"
_VALID = ("numba", "numpy")


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401

        return True
    except ImportError:
        return False


def active_backend() -> str:
    """The kernel backend in effect: the env override, else numba when importable."""
    choice = os.environ.get(BACKEND_ENV_VAR, "").strip().lower()
    if choice:
        if choice not in _VALID:
            raise ValueError(
                f"{BACKEND_ENV_VAR}={choice!r} is not a valid backend; use one of {_VALID}"
            )
        if choice == "numba" and not _numba_available():
            raise RuntimeError(f"{BACKEND_ENV_VAR}=numba requested but numba is not importable")
        return choice
    if _numba_available():
        return "numba"
    warnings.warn("numba not importable; falling back to the pure-numpy kernel backend")
    return "numpy"


def batch_fidelity_kernel(backend: str | None = None):
    """The batched switching-fidelity kernel for ``backend`` (default: active)."""
    name = backend or active_backend()
    if name == "numba":
        from ._kernels_numba import batch_switching_fidelities
    else:
        from ._kernels_numpy import batch_switching_fidelities
    return batch_switching_fidelities

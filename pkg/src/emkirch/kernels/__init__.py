"""Hot evaluation kernels with a compiled core and a pure-numpy fallback.

The compiled Cython extension (`_fastkernels`) is selected automatically
when the package was built with it; otherwise the numpy implementations in
`pykernels` are used.  Both expose the same five functions with identical
contracts:

    green_field(sources, amplitudes, targets, k, min_r)      -> (T, 3)
    green_stack(points, elements, k, min_r, conjugate, w)    -> (P, 3, 3M)
    psf_moments(elements, weights, points, min_r)            -> (P, 3, 3, 3)
    psf_diag(elements, weights, points, k, min_r)            -> (P, 3, 3)
    psf_pair(elements, weights, points, y2, k, min_r)        -> (P, 3, 3)

Set EMKIRCH_KERNELS=python or EMKIRCH_KERNELS=compiled to force a backend
(the latter raises if the extension is missing).  Per-point reductions run
in a fixed order in both backends, so repeated calls are bitwise
reproducible within a backend.
"""

from __future__ import annotations

import os

from . import pykernels

_FORCED = os.environ.get("EMKIRCH_KERNELS", "").strip().lower()

if _FORCED == "python":
    _impl = pykernels
    BACKEND = "python"
else:
    try:
        from . import _fastkernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _FORCED == "compiled":
            raise
        _impl = pykernels
        BACKEND = "python"


def backend_name() -> str:
    """Active kernel backend: "compiled" or "python"."""
    return BACKEND


def get_backend(name: str):
    """Return a specific backend module ("python" or "compiled") by name."""
    if name == "python":
        return pykernels
    if name == "compiled":
        from . import _fastkernels

        return _fastkernels
    raise ValueError(f"unknown kernel backend {name!r}")


green_field = _impl.green_field
green_stack = _impl.green_stack
psf_moments = _impl.psf_moments
psf_diag = _impl.psf_diag
psf_pair = _impl.psf_pair


def set_num_threads(n: int) -> None:
    """Cap the compiled kernels' OpenMP thread count (no-op fallback).

    Threads split work across evaluation points only; per-point reductions
    stay sequential, so the thread count never changes results.
    """
    if BACKEND == "compiled" and hasattr(_impl, "set_num_threads"):
        _impl.set_num_threads(n)

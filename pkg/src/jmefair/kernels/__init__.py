"""Hot numeric kernels with two interchangeable backends.

``numba_impl`` carries @njit kernels; ``numpy_impl`` is a pure-numpy
fallback with identical signatures and semantics. The backend is chosen
once at import from the ``JMEFAIR_BACKEND`` environment variable
(``auto`` | ``numba`` | ``numpy``; default ``auto`` = numba when it
imports, numpy otherwise) and can be switched at runtime with
:func:`set_backend`. Results agree across backends to float rounding;
see ``benchmarks/bench_kernels.py`` for a timing comparison.
"""

from __future__ import annotations

import os
import warnings

from . import numpy_impl

try:
    from . import numba_impl

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    numba_impl = None
    _HAVE_NUMBA = False

_impl = None


def available_backends() -> tuple:
    return ("numba", "numpy") if _HAVE_NUMBA else ("numpy",)


def set_backend(name: str) -> str:
    """Select the kernel backend; returns the name actually activated."""
    global _impl
    if name == "auto":
        name = "numba" if _HAVE_NUMBA else "numpy"
    if name == "numba":
        if not _HAVE_NUMBA:
            raise ValueError("numba backend requested but numba is not importable")
        _impl = numba_impl
    elif name == "numpy":
        _impl = numpy_impl
    else:
        raise ValueError(f"unknown backend {name!r}; expected numba|numpy|auto")
    return name


def active_backend() -> str:
    return "numba" if _impl is numba_impl else "numpy"


_requested = os.environ.get("JMEFAIR_BACKEND", "auto")
try:
    set_backend(_requested)
except ValueError:
    warnings.warn(
        f"JMEFAIR_BACKEND={_requested!r} unavailable, using numpy", stacklevel=1
    )
    set_backend("numpy")


def hard_exposure_rows(noisy, rank_weights):
    """Mean exposure per item over sampled rankings (descending-score sort)."""
    return _impl.hard_exposure_rows(noisy, rank_weights)


def soft_exposure_forward(z, tau, gamma, prefix):
    """Per-sample softmax weights, smooth ranks, and exposure for noisy scores."""
    return _impl.soft_exposure_forward(z, tau, gamma, prefix)


def soft_exposure_backward(p, e, d_row, tau, gamma):
    """Gradient of mean exposure w.r.t. the score row, summed over samples."""
    return _impl.soft_exposure_backward(p, e, d_row, tau, gamma)

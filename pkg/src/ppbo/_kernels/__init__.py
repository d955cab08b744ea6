"""Backend selection for the likelihood hot loops.

A compiled Cython extension is preferred when it was built; the numpy
implementation is the fallback and the reference. Selection happens at
import time and can be forced with the ``PPBO_KERNEL_BACKEND``
environment variable (``auto``, ``cython`` or ``numpy``), or switched
at runtime with :func:`use_backend` (used by the parity tests and the
backend benchmark).
"""

import os

from . import numpy_backend

_BACKENDS = {"numpy": numpy_backend}

try:
    from . import cython_backend

    _BACKENDS["cython"] = cython_backend
except ImportError:
    cython_backend = None

_requested = os.environ.get("PPBO_KERNEL_BACKEND", "auto").lower()
if _requested == "auto":
    _impl = _BACKENDS.get("cython", numpy_backend)
elif _requested in _BACKENDS:
    _impl = _BACKENDS[_requested]
else:
    raise ImportError(
        f"PPBO_KERNEL_BACKEND={_requested!r} unavailable; "
        f"choices: auto, {', '.join(sorted(_BACKENDS))}"
    )


def active_backend() -> str:
    """Name of the backend currently answering kernel calls."""
    for name, mod in _BACKENDS.items():
        if mod is _impl:
            return name
    raise RuntimeError("no active backend")


def available_backends():
    return sorted(_BACKENDS)


def use_backend(name: str) -> str:
    """Switch backends at runtime; returns the previously active name."""
    global _impl
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; choices: {sorted(_BACKENDS)}")
    previous = active_backend()
    _impl = _BACKENDS[name]
    return previous


def likelihood_terms(f, winner, loser, weight, sigma):
    return _impl.likelihood_terms(f, winner, loser, weight, sigma)


def likelihood_value(f, winner, loser, weight, sigma):
    return _impl.likelihood_value(f, winner, loser, weight, sigma)


def likelihood_hessian(f, winner, loser, weight, sigma):
    return _impl.likelihood_hessian(f, winner, loser, weight, sigma)


def scaled_rank_products(mat, winner, loser, weight, f, sigma):
    return _impl.scaled_rank_products(mat, winner, loser, weight, f, sigma)

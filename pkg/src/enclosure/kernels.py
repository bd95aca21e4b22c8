"""Backend selection for the hot kernels.

The compiled Cython module ``enclosure._kernels`` is used when it was built;
otherwise the NumPy implementation in ``enclosure._kernels_py`` is used. Set
``ENCLOSURE_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

try:
    if os.environ.get("ENCLOSURE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend forced")
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

_active = _compiled if _compiled is not None else _kernels_py


def available():
    return sorted(_BACKENDS)


def backend():
    """Name of the active backend."""
    return "cython" if _active is _compiled and _compiled is not None else "python"


def use_backend(name):
    """Switch the active backend; returns the previous name."""
    global _active
    prev = backend()
    try:
        _active = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available (have {available()})") from None
    return prev


def bessel_j01(z):
    return _active.bessel_j01(z)


def remainder(omega, N, beta, apex, h, pts, nodes, weights, deriv):
    return _active.remainder(omega, N, beta, apex, h, pts, nodes, weights, deriv)


def p1_element_gradients(xy, tri):
    return _active.p1_element_gradients(xy, tri)


def elasticity_blocks(grads, area, lam, mu):
    return _active.elasticity_blocks(grads, area, lam, mu)

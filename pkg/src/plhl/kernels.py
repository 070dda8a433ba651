"""Backend selection for the hot chain kernels.

The compiled module ``plhl._ckernels`` is used when it imports; otherwise the
numpy implementation in ``plhl._pykernels`` is used. ``PLHL_BACKEND=python``
forces the fallback. ``BACKEND`` names the active choice.
"""

import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("PLHL_BACKEND", "").lower() == "python":
        raise ImportError("fallback forced by PLHL_BACKEND")
    from . import _ckernels
except ImportError:
    _ckernels = None

BACKEND = "compiled" if _ckernels is not None else "python"


def chain_value_grad(u, y, a, backend=None):
    """Return ``(value, grad)`` of the chain function at ``u``.

    ``u`` may be a batch ``(m, n)``; batches always go through numpy.
    """
    use = backend or BACKEND
    u = np.asarray(u, dtype=float)
    if use == "compiled" and u.ndim == 1:
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not available")
        u = np.ascontiguousarray(u)
        grad = np.empty_like(u)
        value = _ckernels.chain_value_grad(u, y, a, grad)
        return value, grad
    return _pykernels.chain_value_grad(u, y, a)


def chain_value(u, y, a, backend=None):
    use = backend or BACKEND
    u = np.asarray(u, dtype=float)
    if use == "compiled" and u.ndim == 1:
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not available")
        return _ckernels.chain_value(np.ascontiguousarray(u), y, a)
    return _pykernels.chain_value(u, y, a)


def b_matvec(x, a, backend=None):
    use = backend or BACKEND
    x = np.asarray(x, dtype=float)
    if use == "compiled" and x.ndim == 1:
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not available")
        out = np.empty_like(x)
        _ckernels.b_matvec(np.ascontiguousarray(x), a, out)
        return out
    return _pykernels.b_matvec(x, a)

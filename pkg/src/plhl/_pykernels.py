"""Pure numpy kernels; fallback for ``plhl._ckernels``.

All functions accept a single point of shape ``(n,)`` or a batch of shape
``(m, n)`` for ``u``/``x``. Single-point values use ``math.fsum`` so the
fallback keeps the same relative accuracy as the compensated compiled path.
"""

import math

import numpy as np


def v_pieces(y, x):
    """Elementwise value and derivative of the one-dimensional component."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    lo = y * 0.96875
    hi = y * 1.03125
    half_sq = 0.5 * x * x
    value = np.where(
        x <= lo,
        half_sq,
        np.where(
            x <= y,
            half_sq - 16.0 * (x - lo) ** 2,
            np.where(
                x <= hi,
                half_sq - y * y / 32.0 + 16.0 * (x - hi) ** 2,
                half_sq - y * y / 32.0,
            ),
        ),
    )
    return value, x - b_spike(y, x)


def b_spike(y, x):
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    inside = (x >= y * 0.96875) & (x <= y * 1.03125)
    return np.where(inside, y - 32.0 * np.abs(x - y), 0.0)


def _residual(x, a):
    r = np.array(x, dtype=float, copy=True)
    r[..., 1:] -= a[1:] * x[..., :-1]
    return r


def _apply_dt(r, a):
    out = np.array(r, copy=True)
    out[..., :-1] -= a[1:] * r[..., 1:]
    return out


def b_matvec(x, a, out=None):
    res = _apply_dt(_residual(np.asarray(x, dtype=float), a), a)
    if out is not None:
        out[...] = res
        return out
    return res


def quad_value(x, a):
    r = _residual(np.asarray(x, dtype=float), a)
    if r.ndim == 1:
        return 0.5 * math.fsum(r * r)
    return 0.5 * np.sum(r * r, axis=-1)


def chain_value_grad(u, y, a, grad=None):
    u = np.asarray(u, dtype=float)
    r = _residual(u, a)
    v, dv = v_pieces(y, u)
    g = _apply_dt(r, a) + dv
    if u.ndim == 1:
        value = math.fsum(np.concatenate((0.5 * r * r, v)))
    else:
        value = np.sum(0.5 * r * r + v, axis=-1)
    if grad is not None:
        grad[...] = g
    return value, g


def chain_value(u, y, a):
    u = np.asarray(u, dtype=float)
    r = _residual(u, a)
    v, _ = v_pieces(y, u)
    if u.ndim == 1:
        return math.fsum(np.concatenate((0.5 * r * r, v)))
    return np.sum(0.5 * r * r + v, axis=-1)

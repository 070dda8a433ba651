# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the chain instance.

Mirrors ``plhl._pykernels`` exactly in contract. Values are accumulated with
Neumaier summation; every summand is nonnegative so the compensated sum keeps
full relative accuracy even when the total is ~1e-20 of its starting value.
"""

from libc.math cimport fabs


cdef inline double _v(double y, double x) noexcept nogil:
    cdef double lo = y * 0.96875
    cdef double hi = y * 1.03125
    cdef double d
    if x <= lo:
        return 0.5 * x * x
    if x <= y:
        d = x - lo
        return 0.5 * x * x - 16.0 * d * d
    if x <= hi:
        d = x - hi
        return 0.5 * x * x - y * y / 32.0 + 16.0 * d * d
    return 0.5 * x * x - y * y / 32.0


cdef inline double _b(double y, double x) noexcept nogil:
    if x < y * 0.96875 or x > y * 1.03125:
        return 0.0
    return y - 32.0 * fabs(x - y)


cdef inline void _acc(double* s, double* c, double v) noexcept nogil:
    cdef double t = s[0] + v
    if fabs(s[0]) >= fabs(v):
        c[0] += (s[0] - t) + v
    else:
        c[0] += (v - t) + s[0]
    s[0] = t


def chain_value_grad(const double[::1] u, const double[::1] y,
                     const double[::1] a, double[::1] grad):
    """Value of the chain function at ``u``; writes the gradient into ``grad``."""
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t k
    cdef double s = 0.0, c = 0.0
    cdef double r, r_next
    if y.shape[0] != n or a.shape[0] != n or grad.shape[0] != n:
        raise ValueError("length mismatch")
    if n == 0:
        return 0.0
    with nogil:
        r = u[0]
        for k in range(n):
            if k + 1 < n:
                r_next = u[k + 1] - a[k + 1] * u[k]
                grad[k] = r - a[k + 1] * r_next
            else:
                r_next = 0.0
                grad[k] = r
            grad[k] += u[k] - _b(y[k], u[k])
            _acc(&s, &c, 0.5 * r * r)
            _acc(&s, &c, _v(y[k], u[k]))
            r = r_next
    return s + c


def chain_value(const double[::1] u, const double[::1] y, const double[::1] a):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t k
    cdef double s = 0.0, c = 0.0
    cdef double r
    if y.shape[0] != n or a.shape[0] != n:
        raise ValueError("length mismatch")
    with nogil:
        for k in range(n):
            if k == 0:
                r = u[0]
            else:
                r = u[k] - a[k] * u[k - 1]
            _acc(&s, &c, 0.5 * r * r)
            _acc(&s, &c, _v(y[k], u[k]))
    return s + c


def b_matvec(const double[::1] x, const double[::1] a, double[::1] out):
    """``out = B x`` with ``B = D^T D`` and ``D`` unit lower bidiagonal (-a below)."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t k
    cdef double r, r_next
    if a.shape[0] != n or out.shape[0] != n:
        raise ValueError("length mismatch")
    if n == 0:
        return
    with nogil:
        r = x[0]
        for k in range(n):
            if k + 1 < n:
                r_next = x[k + 1] - a[k + 1] * x[k]
                out[k] = r - a[k + 1] * r_next
            else:
                r_next = 0.0
                out[k] = r
            r = r_next

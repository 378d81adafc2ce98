# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled solver kernels.

Hot loops of the iteration-budgeted solvers: a closed-loop run at the
pendulum's nominal budget costs ~4e7 Hessian products, which dominates
everything else in the package.  Semantics match ``_kernels_py`` (the
NumPy fallback) exactly up to floating-point summation order.
"""

import numpy as np

from libc.math cimport sqrt


cdef inline void _grad(const double[:, ::1] h, const double[::1] q,
                       const double[::1] z, double[::1] out) noexcept nogil:
    cdef Py_ssize_t nm = q.shape[0]
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(nm):
        s = q[i]
        for j in range(nm):
            s += h[i, j] * z[j]
        out[i] = s


cdef inline void _step_clamp(const double[::1] z, const double[::1] g,
                             double step, const double[::1] lower,
                             const double[::1] upper,
                             double[::1] out) noexcept nogil:
    cdef Py_ssize_t i
    cdef double t
    for i in range(z.shape[0]):
        t = z[i] - step * g[i]
        if t < lower[i]:
            t = lower[i]
        elif t > upper[i]:
            t = upper[i]
        out[i] = t


def pgm(const double[:, ::1] h, const double[::1] q,
        const double[::1] lower, const double[::1] upper,
        double step, const double[::1] z0, long iters):
    """Run ``iters`` projected-gradient steps from ``z0``."""
    cdef Py_ssize_t nm = q.shape[0]
    z_arr = np.array(z0, dtype=np.float64)
    g_arr = np.empty(nm, dtype=np.float64)
    cdef double[::1] z = z_arr
    cdef double[::1] g = g_arr
    cdef long it
    with nogil:
        for it in range(iters):
            _grad(h, q, z, g)
            _step_clamp(z, g, step, lower, upper, z)
    return z_arr


def apgm(const double[:, ::1] h, const double[::1] q,
         const double[::1] lower, const double[::1] upper,
         double step, double momentum, const double[::1] z0, long iters):
    """Run ``iters`` accelerated steps with constant momentum from ``z0``."""
    cdef Py_ssize_t nm = q.shape[0]
    z_arr = np.array(z0, dtype=np.float64)
    prev_arr = z_arr.copy()
    y_arr = np.empty(nm, dtype=np.float64)
    g_arr = np.empty(nm, dtype=np.float64)
    cdef double[::1] z = z_arr
    cdef double[::1] prev = prev_arr
    cdef double[::1] y = y_arr
    cdef double[::1] g = g_arr
    cdef Py_ssize_t i
    cdef long it
    with nogil:
        for it in range(iters):
            for i in range(nm):
                y[i] = z[i] + momentum * (z[i] - prev[i])
            _grad(h, q, y, g)
            for i in range(nm):
                prev[i] = z[i]
            _step_clamp(y, g, step, lower, upper, z)
    return z_arr


def residual(const double[:, ::1] h, const double[::1] q,
             const double[::1] lower, const double[::1] upper,
             double step, const double[::1] z):
    """Fixed-point residual ``|z - clamp(z - step*(Hz + q))|``."""
    cdef Py_ssize_t nm = q.shape[0]
    g_arr = np.empty(nm, dtype=np.float64)
    m_arr = np.empty(nm, dtype=np.float64)
    cdef double[::1] g = g_arr
    cdef double[::1] moved = m_arr
    cdef double acc = 0.0, d
    cdef Py_ssize_t i
    with nogil:
        _grad(h, q, z, g)
        _step_clamp(z, g, step, lower, upper, moved)
        for i in range(nm):
            d = z[i] - moved[i]
            acc += d * d
    # libc sqrt keeps NaN as NaN; Python's ** would promote to complex.
    return sqrt(acc)


def pgm_to_tolerance(const double[:, ::1] h, const double[::1] q,
                     const double[::1] lower, const double[::1] upper,
                     double step, const double[::1] z0, double tol,
                     long max_iters, long check_every):
    """Projected-gradient until the fixed-point residual reaches ``tol``.

    Returns ``(iterate, iterations_used)``; the caller re-checks the
    residual, so hitting ``max_iters`` is not an error here.
    """
    cdef Py_ssize_t nm = q.shape[0]
    z_arr = np.array(z0, dtype=np.float64)
    g_arr = np.empty(nm, dtype=np.float64)
    m_arr = np.empty(nm, dtype=np.float64)
    cdef double[::1] z = z_arr
    cdef double[::1] g = g_arr
    cdef double[::1] moved = m_arr
    cdef long used = 0, burst, it
    cdef double acc, d
    cdef Py_ssize_t i
    cdef bint done = 0
    with nogil:
        while used < max_iters and not done:
            burst = check_every
            if max_iters - used < burst:
                burst = max_iters - used
            for it in range(burst):
                _grad(h, q, z, g)
                _step_clamp(z, g, step, lower, upper, z)
            used += burst
            _grad(h, q, z, g)
            _step_clamp(z, g, step, lower, upper, moved)
            acc = 0.0
            for i in range(nm):
                d = z[i] - moved[i]
                acc += d * d
            if acc <= tol * tol:
                done = 1
    return z_arr, int(used)

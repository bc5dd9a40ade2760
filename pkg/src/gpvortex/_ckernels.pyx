# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; same signatures as _pykernels."""
import numpy as np
from libc.math cimport sqrt, cos, sin, INFINITY


cdef void _vel(const double[:, ::1] p, const double[::1] d, double[:, ::1] v) noexcept nogil:
    cdef Py_ssize_t n = p.shape[0], j, k
    cdef double dx, dy, c
    for j in range(n):
        v[j, 0] = 0.0
        v[j, 1] = 0.0
        for k in range(n):
            if k == j:
                continue
            dx = p[j, 0] - p[k, 0]
            dy = p[j, 1] - p[k, 1]
            c = 2.0 * d[k] / (dx * dx + dy * dy)
            v[j, 0] -= c * dy
            v[j, 1] += c * dx


cdef double _dmin(const double[:, ::1] p) noexcept nogil:
    cdef Py_ssize_t n = p.shape[0], j, k
    cdef double m = INFINITY, dx, dy, r2
    for j in range(n):
        for k in range(j + 1, n):
            dx = p[j, 0] - p[k, 0]
            dy = p[j, 1] - p[k, 1]
            r2 = dx * dx + dy * dy
            if r2 < m:
                m = r2
    return sqrt(m)


def kirchhoff_velocity(pos, d):
    cdef const double[:, ::1] p = np.ascontiguousarray(pos, dtype=np.float64)
    cdef const double[::1] dd = np.ascontiguousarray(d, dtype=np.float64)
    out = np.empty((p.shape[0], 2))
    cdef double[:, ::1] v = out
    _vel(p, dd, v)
    return out


def min_distance(pos):
    cdef const double[:, ::1] p = np.ascontiguousarray(pos, dtype=np.float64)
    return _dmin(p)


def rk4_run(pos, d, double dt, Py_ssize_t nsteps, double guard):
    cdef Py_ssize_t n = pos.shape[0], m, j, c
    out = np.empty((nsteps + 1, n, 2))
    cdef double[:, :, ::1] o = out
    cdef const double[::1] dd = np.ascontiguousarray(d, dtype=np.float64)
    cdef double[:, ::1] y = np.array(pos, dtype=np.float64, order="C")
    cdef double[:, ::1] t = np.empty((n, 2))
    cdef double[:, ::1] k1 = np.empty((n, 2))
    cdef double[:, ::1] k2 = np.empty((n, 2))
    cdef double[:, ::1] k3 = np.empty((n, 2))
    cdef double[:, ::1] k4 = np.empty((n, 2))
    o[0, :, :] = y
    with nogil:
        for m in range(nsteps):
            _vel(y, dd, k1)
            for j in range(n):
                for c in range(2):
                    t[j, c] = y[j, c] + 0.5 * dt * k1[j, c]
            _vel(t, dd, k2)
            for j in range(n):
                for c in range(2):
                    t[j, c] = y[j, c] + 0.5 * dt * k2[j, c]
            _vel(t, dd, k3)
            for j in range(n):
                for c in range(2):
                    t[j, c] = y[j, c] + dt * k3[j, c]
            _vel(t, dd, k4)
            for j in range(n):
                for c in range(2):
                    y[j, c] = y[j, c] + dt / 6.0 * (k1[j, c] + 2 * k2[j, c] + 2 * k3[j, c] + k4[j, c])
                    o[m + 1, j, c] = y[j, c]
            if _dmin(y) < guard:
                with gil:
                    return out[: m + 2], m + 1
    return out, -1


cdef inline double _smooth(double s) noexcept nogil:
    if s <= 0.0:
        return 0.0
    if s >= 1.0:
        return 1.0
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


def forcing_a(px, py, xi, d, acc, double eps, double delta):
    shape = np.shape(px)
    cdef const double[::1] X = np.ascontiguousarray(px, dtype=np.float64).ravel()
    cdef const double[::1] Y = np.ascontiguousarray(py, dtype=np.float64).ravel()
    cdef const double[:, ::1] Q = np.ascontiguousarray(xi, dtype=np.float64)
    cdef const double[:, ::1] A = np.ascontiguousarray(acc, dtype=np.float64)
    cdef const double[::1] dd = np.ascontiguousarray(d, dtype=np.float64)
    cdef Py_ssize_t m = X.shape[0], n = Q.shape[0], i, j
    out = np.empty(m)
    cdef double[::1] o = out
    cdef double s, chi, dx, dy, r2
    with nogil:
        for i in range(m):
            s = 0.0
            chi = 1.0
            for j in range(n):
                dx = X[i] - Q[j, 0]
                dy = Y[i] - Q[j, 1]
                r2 = dx * dx + dy * dy
                chi *= _smooth((sqrt(r2) - delta) / delta)
                if r2 > 0.0:
                    s += dd[j] * (dy * A[j, 0] - dx * A[j, 1]) / r2
            o[i] = 0.5 * eps * eps * chi * s
    return out.reshape(shape)


def phase_rotate(u, double c):
    """u <- u exp(-i c (|u|^2 - 1)) in place, for a C-contiguous complex128 array."""
    cdef double[::1] a = u.reshape(-1).view(np.float64)
    cdef Py_ssize_t i, n = a.shape[0] // 2
    cdef double re, im, m, cs, sn
    with nogil:
        for i in range(n):
            re = a[2 * i]
            im = a[2 * i + 1]
            m = -c * (re * re + im * im - 1.0)
            cs = cos(m)
            sn = sin(m)
            a[2 * i] = re * cs - im * sn
            a[2 * i + 1] = re * sn + im * cs

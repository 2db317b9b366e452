# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled sequential path kernels (Euler delay scheme, method-of-steps RK4).

Mirrors ``_pykernels`` operation for operation.
"""
import numpy as np

from libc.math cimport sin, tanh

cdef enum:
    CONSTANT = 0
    TANH_SINE = 1
    LOGISTIC = 2
    LINEAR = 3


cdef inline double _drift(int kind, const double* p, double t, double x, double xd) noexcept nogil:
    if kind == CONSTANT:
        return p[0]
    elif kind == TANH_SINE:
        return p[0] + p[1] * tanh(xd) + p[2] * sin(p[3] * t)
    elif kind == LOGISTIC:
        return p[0] + p[1] / (1.0 + xd * xd)
    else:
        return p[0] * x + p[1] * xd


def _check_kind(int kind):
    if kind < CONSTANT or kind > LINEAR:
        raise ValueError(f"unknown drift kind {kind}")


def euler_delay(int kind, params, double x0, double dt, Py_ssize_t lag, noise):
    _check_kind(kind)
    cdef double[::1] p = np.ascontiguousarray(params, dtype=np.float64)
    cdef double[::1] nz = np.ascontiguousarray(noise, dtype=np.float64)
    cdef Py_ssize_t n = nz.shape[0]
    out_arr = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double xi = x0, xd, t
    with nogil:
        out[0] = x0
        for i in range(n):
            t = i * dt
            j = i - lag
            xd = out[j] if j >= 0 else x0
            xi = xi + _drift(kind, &p[0], t, xi, xd) * dt + nz[i]
            out[i + 1] = xi
    return out_arr


def rk4_delay(int kind, params, double x_start, double pre, double dt,
              Py_ssize_t lag, Py_ssize_t n):
    _check_kind(kind)
    cdef double[::1] p = np.ascontiguousarray(params, dtype=np.float64)
    x_arr = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[::1] dl
    cdef double[::1] dr
    cdef Py_ssize_t i, j, jr
    cdef double h2 = 0.5 * dt
    cdef double t, t1, xi, y, xn, k1, k2, k3, k4, d0, d1, dh
    x[0] = x_start
    if lag == 0:
        with nogil:
            for i in range(n):
                t = i * dt
                xi = x[i]
                k1 = _drift(kind, &p[0], t, xi, xi)
                y = xi + h2 * k1
                k2 = _drift(kind, &p[0], t + h2, y, y)
                y = xi + h2 * k2
                k3 = _drift(kind, &p[0], t + h2, y, y)
                y = xi + dt * k3
                k4 = _drift(kind, &p[0], t + dt, y, y)
                x[i + 1] = xi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return x_arr

    dl = np.zeros(n + 1, dtype=np.float64)
    dr = np.zeros(n + 1, dtype=np.float64)
    with nogil:
        dr[0] = _drift(kind, &p[0], 0.0, x_start, pre)
        dl[0] = dr[0]
        for i in range(n):
            t = i * dt
            j = i - lag
            if j < 0:
                d0 = pre
                d1 = pre
                dh = pre
            else:
                d0 = x[j]
                d1 = x[j + 1]
                dh = 0.5 * (d0 + d1) + dt * (dr[j] - dl[j + 1]) / 8.0
            xi = x[i]
            k1 = _drift(kind, &p[0], t, xi, d0)
            k2 = _drift(kind, &p[0], t + h2, xi + h2 * k1, dh)
            k3 = _drift(kind, &p[0], t + h2, xi + h2 * k2, dh)
            k4 = _drift(kind, &p[0], t + dt, xi + dt * k3, d1)
            xn = xi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            x[i + 1] = xn
            t1 = (i + 1) * dt
            dl[i + 1] = _drift(kind, &p[0], t1, xn, d1)
            jr = i + 1 - lag
            dr[i + 1] = _drift(kind, &p[0], t1, xn, x[jr] if jr >= 0 else pre)
    return x_arr

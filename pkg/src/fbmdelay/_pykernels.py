"""Pure-Python reference versions of the sequential path kernels.

Same signatures and floating-point operation order as ``_ckernels.pyx`` so
the two backends agree to the last bit on IEEE hardware.
"""
import math

import numpy as np

CONSTANT, TANH_SINE, LOGISTIC, LINEAR = 0, 1, 2, 3


def drift(kind, p, t, x, xd):
    """Evaluate the catalog right-hand side ``f(t, x_now, x_delayed)``."""
    if kind == CONSTANT:
        return p[0]
    if kind == TANH_SINE:
        return p[0] + p[1] * math.tanh(xd) + p[2] * math.sin(p[3] * t)
    if kind == LOGISTIC:
        return p[0] + p[1] / (1.0 + xd * xd)
    if kind == LINEAR:
        return p[0] * x + p[1] * xd
    raise ValueError(f"unknown drift kind {kind}")


def euler_delay(kind, params, x0, dt, lag, noise):
    n = len(noise)
    p = [float(v) for v in params]
    nz = [float(v) for v in noise]
    out = [0.0] * (n + 1)
    out[0] = x0
    xi = x0
    for i in range(n):
        t = i * dt
        j = i - lag
        xd = out[j] if j >= 0 else x0
        xi = xi + drift(kind, p, t, xi, xd) * dt + nz[i]
        out[i + 1] = xi
    return np.asarray(out)


def rk4_delay(kind, params, x_start, pre, dt, lag, n):
    p = [float(v) for v in params]
    x = [0.0] * (n + 1)
    x[0] = x_start
    h2 = 0.5 * dt
    if lag == 0:
        for i in range(n):
            t = i * dt
            xi = x[i]
            k1 = drift(kind, p, t, xi, xi)
            y = xi + h2 * k1
            k2 = drift(kind, p, t + h2, y, y)
            y = xi + h2 * k2
            k3 = drift(kind, p, t + h2, y, y)
            y = xi + dt * k3
            k4 = drift(kind, p, t + dt, y, y)
            x[i + 1] = xi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return np.asarray(x)

    # left/right derivative at each grid point; they differ where the delayed
    # argument crosses the jump of the pre-history at 0
    dl = [0.0] * (n + 1)
    dr = [0.0] * (n + 1)
    dr[0] = drift(kind, p, 0.0, x_start, pre)
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
        k1 = drift(kind, p, t, xi, d0)
        k2 = drift(kind, p, t + h2, xi + h2 * k1, dh)
        k3 = drift(kind, p, t + h2, xi + h2 * k2, dh)
        k4 = drift(kind, p, t + dt, xi + dt * k3, d1)
        xn = xi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        x[i + 1] = xn
        t1 = (i + 1) * dt
        dl[i + 1] = drift(kind, p, t1, xn, d1)
        jr = i + 1 - lag
        dr[i + 1] = drift(kind, p, t1, xn, x[jr] if jr >= 0 else pre)
    return np.asarray(x)

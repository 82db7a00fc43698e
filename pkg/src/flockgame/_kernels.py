"""Compiled RK4 stepping for the full particle system.

Kernels are passed as (kind, a, b) triples with the codes from ``model``.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _phi(kind, a, b, r):
    if kind == 0:
        return a
    if kind == 1:
        return a / (1.0 + r * r) ** (0.5 * b)
    if r <= b:
        return b ** (-a)
    return r ** (-a)


@njit(cache=True)
def rhs_into(x, v, th, m, sigma, kappa, p, kind, a, b, dx, dv, dth):
    N, n = x.shape
    for i in range(N):
        s = 0.0
        for k in range(n):
            s += v[i, k] * v[i, k]
        f = sigma * (th[i] - s ** (0.5 * p))
        for k in range(n):
            dx[i, k] = v[i, k]
            dv[i, k] = f * v[i, k]
        dth[i] = 0.0
    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            r2 = 0.0
            for k in range(n):
                d = x[i, k] - x[j, k]
                r2 += d * d
            w = m[j] * _phi(kind, a, b, np.sqrt(r2))
            for k in range(n):
                dv[i, k] += w * (v[j, k] - v[i, k])
            dth[i] += kappa * w * (th[j] - th[i])


@njit(cache=True)
def rk4_steps(x, v, th, m, sigma, kappa, p, kind, a, b, dt, nsteps):
    """Advance ``nsteps`` classical RK4 steps; returns new (x, v, theta)."""
    k1x = np.empty_like(x)
    k1v = np.empty_like(v)
    k1t = np.empty_like(th)
    k2x = np.empty_like(x)
    k2v = np.empty_like(v)
    k2t = np.empty_like(th)
    k3x = np.empty_like(x)
    k3v = np.empty_like(v)
    k3t = np.empty_like(th)
    k4x = np.empty_like(x)
    k4v = np.empty_like(v)
    k4t = np.empty_like(th)
    h = 0.5 * dt
    for _ in range(nsteps):
        rhs_into(x, v, th, m, sigma, kappa, p, kind, a, b, k1x, k1v, k1t)
        rhs_into(x + h * k1x, v + h * k1v, th + h * k1t, m, sigma, kappa, p, kind, a, b, k2x, k2v, k2t)
        rhs_into(x + h * k2x, v + h * k2v, th + h * k2t, m, sigma, kappa, p, kind, a, b, k3x, k3v, k3t)
        rhs_into(x + dt * k3x, v + dt * k3v, th + dt * k3t, m, sigma, kappa, p, kind, a, b, k4x, k4v, k4t)
        x = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        th = th + (dt / 6.0) * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
    return x, v, th

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels; see ``_kernels_py`` for the reference code."""

from libc.math cimport atan2, cos, sin, sqrt, INFINITY

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double PI = 3.141592653589793
cdef double TWO_PI = 6.283185307179586


cpdef tuple rk4_unicycle(double x, double y, double th, double v, double w, double dt):
    cdef double h = 0.5 * dt
    cdef double th2 = th + w * h
    cdef double th4 = th + w * dt
    cdef double c = dt / 6.0
    cdef double nx = x + c * v * (cos(th) + 4.0 * cos(th2) + cos(th4))
    cdef double ny = y + c * v * (sin(th) + 4.0 * sin(th2) + sin(th4))
    return nx, ny, th4


def rk4_batch(double[::1] x, double[::1] y, double[::1] th,
              double[::1] v, double[::1] w, double dt):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double h = 0.5 * dt
    cdef double c = dt / 6.0
    cdef double t0, t2, t4, vi
    for i in range(n):
        t0 = th[i]
        t2 = t0 + w[i] * h
        t4 = t0 + w[i] * dt
        vi = v[i]
        x[i] = x[i] + c * vi * (cos(t0) + 4.0 * cos(t2) + cos(t4))
        y[i] = y[i] + c * vi * (sin(t0) + 4.0 * sin(t2) + sin(t4))
        if t4 > PI:
            t4 = t4 - TWO_PI
        elif t4 <= -PI:
            t4 = t4 + TWO_PI
        th[i] = t4


def close_pairs(double[::1] x, double[::1] y, double radius):
    cdef Py_ssize_t i, j, n = x.shape[0]
    cdef double dx, dy, d2, xi, yi
    cdef double best = INFINITY
    cdef double r2 = radius * radius
    cdef Py_ssize_t bi = -1, bj = -1
    out = []
    for i in range(n):
        xi = x[i]
        yi = y[i]
        for j in range(i + 1, n):
            dx = xi - x[j]
            dy = yi - y[j]
            d2 = dx * dx + dy * dy
            if d2 < best:
                best = d2
                bi = i
                bj = j
            if d2 <= r2:
                out.append((i, j, sqrt(d2)))
    return out, (sqrt(best) if bi >= 0 else INFINITY), bi, bj


cpdef tuple limit_cycle_terms(double px, double py, double r, double theta):
    cdef double g = r * r - px * px - py * py
    cdef double fx = -py + px * g
    cdef double fy = px + py * g
    cdef double n2 = fx * fx + fy * fy
    cdef double c, s, jx, jy, nf
    if n2 == 0.0:
        return 0.0, 0.0, 0.0, 0.0
    c = cos(theta)
    s = sin(theta)
    jx = (g - 2.0 * px * px) * c + (-1.0 - 2.0 * px * py) * s
    jy = (1.0 - 2.0 * px * py) * c + (g - 2.0 * py * py) * s
    nf = sqrt(n2)
    return nf, atan2(fy, fx), (fx * jy - fy * jx) / n2, (fx * jx + fy * jy) / nf


cpdef tuple goal_terms(double px, double py, double gx, double gy, double theta):
    cdef double ex = px - gx
    cdef double ey = py - gy
    cdef double rho2 = ex * ex + ey * ey
    if rho2 == 0.0:
        return 0.0, 0.0, 0.0
    return atan2(-ey, -ex), (ex * sin(theta) - ey * cos(theta)) / rho2, sqrt(rho2)


def min_distance_series(X, Y):
    cdef double[:, ::1] xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[:, ::1] yv = np.ascontiguousarray(Y, dtype=np.float64)
    cdef Py_ssize_t T = xv.shape[0], n = xv.shape[1]
    cdef Py_ssize_t t, i, j
    cdef double dx, dy, d, best
    cdef Py_ssize_t bi, bj
    dmin_a = np.full(T, np.inf)
    imin_a = np.full(T, -1, dtype=np.int64)
    jmin_a = np.full(T, -1, dtype=np.int64)
    cdef double[::1] dmin = dmin_a
    cdef long long[::1] imin = imin_a
    cdef long long[::1] jmin = jmin_a
    for t in range(T):
        best = INFINITY
        bi = -1
        bj = -1
        for i in range(n):
            for j in range(i + 1, n):
                dx = xv[t, i] - xv[t, j]
                dy = yv[t, i] - yv[t, j]
                d = sqrt(dx * dx + dy * dy)
                if d < best:
                    best = d
                    bi = i
                    bj = j
        dmin[t] = best
        imin[t] = bi
        jmin[t] = bj
    return dmin_a, imin_a, jmin_a

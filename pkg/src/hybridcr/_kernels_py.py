"""Pure-Python versions of the numerical kernels.

Same signatures and floating-point operation order as ``_kernels.pyx`` so
either backend yields the same trajectories.
"""

import math

import numpy as np

PI = 3.141592653589793
TWO_PI = 6.283185307179586


def rk4_unicycle(x, y, th, v, w, dt):
    # theta does not depend on position, so k2 == k3 and the update is
    # Simpson's rule on the heading.
    h = 0.5 * dt
    th2 = th + w * h
    th4 = th + w * dt
    c = dt / 6.0
    nx = x + c * v * (math.cos(th) + 4.0 * math.cos(th2) + math.cos(th4))
    ny = y + c * v * (math.sin(th) + 4.0 * math.sin(th2) + math.sin(th4))
    return nx, ny, th4


def rk4_batch(x, y, th, v, w, dt):
    """In-place RK4 update of every agent; arrays are float64 1-D.

    Headings are brought back into (-pi, pi] with a single correction,
    which suffices while ``|w * dt| < pi``.
    """
    n = x.shape[0]
    for i in range(n):
        nx, ny, nth = rk4_unicycle(float(x[i]), float(y[i]), float(th[i]),
                                   float(v[i]), float(w[i]), dt)
        if nth > PI:
            nth = nth - TWO_PI
        elif nth <= -PI:
            nth = nth + TWO_PI
        x[i] = nx
        y[i] = ny
        th[i] = nth


def close_pairs(x, y, radius):
    """All index pairs ``(i, j, d)`` with ``i < j`` and distance ``<= radius``.

    Also returns the overall minimum distance and its pair.
    """
    x = np.asarray(x, dtype=np.float64).tolist()
    y = np.asarray(y, dtype=np.float64).tolist()
    n = len(x)
    out = []
    best = math.inf
    bi = bj = -1
    r2 = radius * radius
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
                out.append((i, j, math.sqrt(d2)))
    return out, (math.sqrt(best) if bi >= 0 else math.inf), bi, bj


def limit_cycle_terms(px, py, r, theta):
    """Limit-cycle guidance at offset ``(px, py)`` from the orbit centre.

    Returns ``(|F|, phi, dphi, dnorm)`` where ``dphi`` and ``dnorm`` are the
    time derivatives of the field angle and magnitude per unit speed along
    heading ``theta``.
    """
    g = r * r - px * px - py * py
    fx = -py + px * g
    fy = px + py * g
    n2 = fx * fx + fy * fy
    if n2 == 0.0:
        return 0.0, 0.0, 0.0, 0.0
    c = math.cos(theta)
    s = math.sin(theta)
    # Jacobian of F applied to the unit heading.
    jx = (g - 2.0 * px * px) * c + (-1.0 - 2.0 * px * py) * s
    jy = (1.0 - 2.0 * px * py) * c + (g - 2.0 * py * py) * s
    nf = math.sqrt(n2)
    dphi = (fx * jy - fy * jx) / n2
    dnorm = (fx * jx + fy * jy) / nf
    return nf, math.atan2(fy, fx), dphi, dnorm


def goal_terms(px, py, gx, gy, theta):
    """Bearing to the goal and its time derivative per unit speed."""
    ex = px - gx
    ey = py - gy
    rho2 = ex * ex + ey * ey
    if rho2 == 0.0:
        return 0.0, 0.0, 0.0
    dphi = (ex * math.sin(theta) - ey * math.cos(theta)) / rho2
    return math.atan2(-ey, -ex), dphi, math.sqrt(rho2)


def min_distance_series(X, Y):
    """Per-row minimum pairwise distance of ``(T, N)`` position arrays.

    Returns ``(dmin, imin, jmin)``; rows with fewer than two agents get
    ``inf`` and ``-1``.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    T, n = X.shape
    dmin = np.full(T, np.inf)
    imin = np.full(T, -1, dtype=np.int64)
    jmin = np.full(T, -1, dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            dx = X[:, i] - X[:, j]
            dy = Y[:, i] - Y[:, j]
            d = np.sqrt(dx * dx + dy * dy)
            better = d < dmin
            dmin[better] = d[better]
            imin[better] = i
            jmin[better] = j
    return dmin, imin, jmin

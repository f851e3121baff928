"""Planar angle and vector primitives shared by controllers and guards."""

from __future__ import annotations

import math
from typing import NamedTuple, Optional

TWO_PI = 2.0 * math.pi

# |relative velocity|^2 below this means the pair never approaches.
NO_APPROACH_TOL = 1e-12


class Vec2(NamedTuple):
    x: float
    y: float

    def __add__(self, other):  # type: ignore[override]
        return Vec2(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Vec2(self.x - other[0], self.y - other[1])

    def scale(self, k: float) -> "Vec2":
        return Vec2(k * self.x, k * self.y)

    def dot(self, other) -> float:
        return self.x * other[0] + self.y * other[1]

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


def heading_vector(theta: float) -> Vec2:
    return Vec2(math.cos(theta), math.sin(theta))


def wrap_angle(raw: float) -> float:
    """Wrap ``raw`` into ``(-pi, pi]``.

    Raises
    ------
    ValueError
        If ``raw`` is not finite.
    """
    if not math.isfinite(raw):
        raise ValueError(f"cannot wrap non-finite angle {raw!r}")
    if -math.pi < raw <= math.pi:
        return raw
    w = math.fmod(raw + math.pi, TWO_PI)
    if w <= 0.0:
        w += TWO_PI
    return w - math.pi


def angular_separation(theta_i: float, theta_j: float) -> float:
    """Shortest angle between two headings, in ``[0, pi]``."""
    if not (math.isfinite(theta_i) and math.isfinite(theta_j)):
        raise ValueError("headings must be finite")
    d = abs(math.fmod(theta_i - theta_j, TWO_PI))
    return min(d, TWO_PI - d)


def time_to_closest_approach(r_i, r_j, v_i, v_j) -> Optional[float]:
    """Time of closest approach under straight-line extrapolation.

    Returns ``None`` when the relative velocity vanishes (the pair keeps a
    constant offset). A negative value means the pair is already separating.
    """
    rx = r_i[0] - r_j[0]
    ry = r_i[1] - r_j[1]
    wx = v_i[0] - v_j[0]
    wy = v_i[1] - v_j[1]
    w2 = wx * wx + wy * wy
    if w2 < NO_APPROACH_TOL:
        return None
    return -(rx * wx + ry * wy) / w2


def predicted_min_distance(r_i, r_j, v_i, v_j) -> float:
    """Minimum future separation (t >= 0) if both agents fly straight."""
    rx = r_i[0] - r_j[0]
    ry = r_i[1] - r_j[1]
    t = time_to_closest_approach(r_i, r_j, v_i, v_j)
    if t is None or t <= 0.0:
        return math.hypot(rx, ry)
    wx = v_i[0] - v_j[0]
    wy = v_i[1] - v_j[1]
    return math.hypot(rx + t * wx, ry + t * wy)


def bearing(src, dst) -> float:
    """Angle of the vector ``dst - src``."""
    return math.atan2(dst[1] - src[1], dst[0] - src[0])


def distance(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])

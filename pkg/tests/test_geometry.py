import math

import pytest
from hypothesis import given, strategies as st

from hybridcr.geometry import (
    Vec2,
    angular_separation,
    bearing,
    distance,
    heading_vector,
    predicted_min_distance,
    time_to_closest_approach,
    wrap_angle,
)

angles = st.floats(-1e4, 1e4, allow_nan=False)
coords = st.floats(-50, 50, allow_nan=False)
speeds = st.floats(-3, 3, allow_nan=False)


def test_vec2_arithmetic():
    a, b = Vec2(1.0, 2.0), Vec2(-3.0, 0.5)
    assert a + b == Vec2(-2.0, 2.5)
    assert a - b == Vec2(4.0, 1.5)
    assert a.scale(2.0) == Vec2(2.0, 4.0)
    assert a.dot(b) == -2.0
    assert Vec2(3.0, 4.0).norm() == 5.0


@pytest.mark.parametrize("raw, expected", [
    (0.0, 0.0), (math.pi, math.pi), (-math.pi, math.pi),
    (3 * math.pi, math.pi), (1.5 * math.pi, -0.5 * math.pi),
])
def test_wrap_angle_fixed_points(raw, expected):
    assert wrap_angle(raw) == pytest.approx(expected, abs=1e-12)


def test_wrap_angle_rejects_nonfinite():
    with pytest.raises(ValueError):
        wrap_angle(float("nan"))
    with pytest.raises(ValueError):
        wrap_angle(float("inf"))


@given(angles)
def test_wrap_angle_range_and_equivalence(raw):
    w = wrap_angle(raw)
    assert -math.pi < w <= math.pi
    k = (raw - w) / (2 * math.pi)
    assert abs(k - round(k)) < 1e-9


@given(angles)
def test_wrap_angle_idempotent(raw):
    w = wrap_angle(raw)
    assert wrap_angle(w) == w


@given(angles, angles)
def test_angular_separation_symmetric_and_bounded(a, b):
    s = angular_separation(a, b)
    assert 0.0 <= s <= math.pi + 1e-12
    assert s == pytest.approx(angular_separation(b, a), abs=1e-9)
    assert s == pytest.approx(abs(wrap_angle(a - b)), abs=1e-7)


def test_heading_and_bearing():
    assert heading_vector(0.0) == Vec2(1.0, 0.0)
    assert bearing((0, 0), (0, 2)) == pytest.approx(math.pi / 2)
    assert distance((1, 1), (4, 5)) == 5.0


def test_parallel_motion_has_no_closest_approach():
    assert time_to_closest_approach((0, 0), (3, 0), (1, 0), (1, 0)) is None
    assert predicted_min_distance((0, 0), (3, 0), (1, 0), (1, 0)) == 3.0


def test_head_on_closest_approach():
    # Offset head-on pass: closest approach at the lateral offset.
    t = time_to_closest_approach((0, 0), (10, 1), (1, 0), (-1, 0))
    assert t == pytest.approx(5.0)
    assert predicted_min_distance((0, 0), (10, 1), (1, 0), (-1, 0)) == pytest.approx(1.0)


def test_separating_pair_returns_current_distance():
    assert predicted_min_distance((0, 0), (3, 4), (-1, 0), (1, 0)) == 5.0


@given(coords, coords, coords, coords, speeds, speeds, speeds, speeds)
def test_predicted_min_distance_matches_sampling(x1, y1, x2, y2, a, b, c, d):
    # Oracle: dense sampling of the straight-line separation over t >= 0.
    pred = predicted_min_distance((x1, y1), (x2, y2), (a, b), (c, d))
    t_star = time_to_closest_approach((x1, y1), (x2, y2), (a, b), (c, d))
    horizon = 2.0 * t_star if t_star and t_star > 0 else 1.0
    sampled = min(
        math.hypot(x1 - x2 + (a - c) * t, y1 - y2 + (b - d) * t)
        for t in (horizon * k / 2000 for k in range(2001))
    )
    assert pred <= sampled + 1e-9
    # Between grid points the distance moves at most |relative velocity| * step.
    step = horizon / 2000
    assert pred >= sampled - math.hypot(a - c, b - d) * step - 1e-9

import dataclasses
import math

import pytest
from hypothesis import given, strategies as st

from hybridcr.controllers import (
    CubicProfile,
    ModeEntrySnapshot,
    OrbitSpec,
    Role,
    change_u_control,
    default_gains,
    field_angle_rate,
    field_norm,
    gain_envelopes,
    go_round_control,
    go_to_goal_control,
    goal_field,
    goal_law,
    limit_cycle_field,
    loiter_control,
    loiter_speed_cap,
    orbit_law,
    orbit_speed_gain,
    solve_cubic,
)
from hybridcr.dynamics import InfeasibleParams, reference_params
from hybridcr.geometry import TWO_PI, Vec2, wrap_angle

speeds = st.floats(1.2, 1.8)
coord = st.floats(-12, 12)
heading = st.floats(-math.pi, math.pi)


def cubic(co, s):
    return ((co.a * s + co.b) * s + co.c) * s + co.d


@given(speeds, speeds)
def test_cubic_boundary_conditions(f1, f2):
    co = solve_cubic(f1, f2)
    assert abs(cubic(co, 0.0) - f1) <= 1e-12
    assert abs(cubic(co, 1.0) - f2) <= 1e-12
    assert co.c == 0.0
    assert abs(3 * co.a + 2 * co.b + co.c) <= 1e-12
    assert abs(cubic(co, 0.5) - 0.5 * (f1 + f2)) <= 1e-12


def test_cubic_known_coefficients():
    # [DERIVED] a = 2(f1 - f2), b = 3(f2 - f1) with f1 = 1.8, f2 = 1.2
    co = solve_cubic(1.8, 1.2)
    assert co.a == pytest.approx(1.2)
    assert co.b == pytest.approx(-1.8)
    assert co.d == 1.8


@given(speeds, speeds, st.floats(0.5, 3.0), st.floats(0.0, 1.0))
def test_profile_rate_matches_finite_difference(f1, f2, duration, s):
    prof = CubicProfile.fit(f1, f2, 10.0, duration)
    t = 10.0 + s * duration
    h = 1e-6
    fd = (prof.value(t + h) - prof.value(t - h)) / (2 * h)
    if 1e-4 < s < 1 - 1e-4:
        assert prof.rate(t) == pytest.approx(fd, abs=1e-6)
    assert abs(prof.rate(t)) <= prof.max_rate + 1e-12
    assert min(f1, f2) - 1e-12 <= prof.value(t) <= max(f1, f2) + 1e-12


def test_profile_holds_endpoints_outside_interval():
    prof = CubicProfile.fit(1.5, 1.2, 2.0, 1.0)
    assert prof.value(1.0) == 1.5 and prof.rate(1.0) == 0.0
    assert prof.value(5.0) == 1.2 and prof.rate(5.0) == 0.0


def test_gain_envelopes_match_closed_forms():
    p = reference_params()
    env = gain_envelopes(p)
    # [DERIVED] share = 3, omega_phi = 0.5 * 1.8 / 3 = 0.3
    loiter = (0.5 * (1 - 1.2 / 3) - 0.01) / TWO_PI
    assert env["k_w1"] == pytest.approx(loiter, abs=1e-15)
    assert env["k_w5"] == pytest.approx(loiter, abs=1e-15)
    assert env["k_w4"] == pytest.approx((0.5 - 0.3 - 0.01) / TWO_PI, abs=1e-15)
    assert env["k_w2"] == pytest.approx(0.01 / TWO_PI, abs=1e-15)
    g = default_gains(p)
    assert g.k_w1 == pytest.approx(0.9 * loiter)
    assert g.k_w2 == env["k_w2"]


def test_default_gains_rejects_bad_margin():
    p = dataclasses.replace(reference_params(), Delta=0.5)
    with pytest.raises(InfeasibleParams):
        default_gains(p)


def test_orbit_spec_validation_and_nesting():
    with pytest.raises(ValueError):
        OrbitSpec(Vec2(0, 0), 0.0)
    o = OrbitSpec(Vec2(1, 2), 3.0).nested(0.41)
    assert o.radius == pytest.approx(3.82) and o.center == Vec2(1, 2)


@given(heading)
def test_limit_cycle_field_is_tangent_on_circle(a):
    orbit = OrbitSpec(Vec2(1.0, -1.0), 2.0)
    pos = (1.0 + 2.0 * math.cos(a), -1.0 + 2.0 * math.sin(a))
    f = limit_cycle_field(pos, orbit)
    radial = (pos[0] - 1.0) * f[0] + (pos[1] + 1.0) * f[1]
    assert abs(radial) < 1e-12
    # Counter-clockwise circulation.
    assert (pos[0] - 1.0) * f[1] - (pos[1] + 1.0) * f[0] > 0
    assert field_norm(pos, orbit) == pytest.approx(2.0)


def test_goal_field_is_unit_or_zero():
    assert goal_field((0, 0), (3, 4)) == pytest.approx((0.6, 0.8))
    assert goal_field((1, 1), (1, 1)) == (0.0, 0.0)


@given(coord, coord, heading, speeds, st.floats(0.5, 4.0))
def test_orbit_law_respects_input_bounds(x, y, th, v0, r):
    p = reference_params()
    g = default_gains(p)
    orbit = OrbitSpec(Vec2(0.0, 0.0), r)
    k_v = orbit_speed_gain((x, y), orbit, v0)
    v, w, vdot, degenerate = orbit_law(x, y, th, orbit, k_v, g.k_w1, p)
    if not degenerate:
        assert p.v_min <= v <= p.v_max
        assert abs(w) <= p.omega_max
        assert math.isfinite(vdot)


@given(coord, coord, heading, speeds)
def test_goal_law_respects_input_bounds(x, y, th, v):
    p = reference_params()
    out_v, w, vdot, _ = goal_law(x, y, th, (3.0, -2.0), v, default_gains(p).k_w4, p)
    assert out_v == v and vdot == 0.0
    assert abs(w) <= p.omega_max


def test_orbit_speed_gain_reproduces_entry_speed():
    p = reference_params()
    orbit = OrbitSpec(Vec2(0.0, 0.0), 3.0)
    pos = (3.1, 0.2)
    k_v = orbit_speed_gain(pos, orbit, 1.5)
    v, *_ = orbit_law(pos[0], pos[1], 1.0, orbit, k_v, 0.01, p)
    assert v == pytest.approx(1.5, abs=1e-12)
    assert orbit_speed_gain((0.0, 0.0), orbit, 1.5) == 0.0


def test_speed_cap_limits_orbit_speed():
    p = reference_params()
    cap = loiter_speed_cap(1.8, 0.0, p)
    assert cap.value(0.0) == 1.8 and cap.value(p.delta_t) == p.v_min
    orbit = OrbitSpec(Vec2(0.0, 0.0), p.r_c)
    pos = (3.0, 0.0)
    k_v = orbit_speed_gain(pos, orbit, 1.8)
    v, _, vdot, _ = orbit_law(pos[0], pos[1], math.pi / 2, orbit, k_v, 0.01, p,
                              speed_cap=cap, t=0.5)
    assert v == pytest.approx(cap.value(0.5))
    assert vdot == pytest.approx(cap.rate(0.5))


def test_control_wrappers():
    p = reference_params()
    g = default_gains(p)
    snap = ModeEntrySnapshot(0.0, 1.5, orbit=OrbitSpec(Vec2(0.0, 0.0), 3.0))
    u = go_round_control((3.0, 0.0, math.pi / 2), snap, g, p)
    assert p.v_min <= u.v <= p.v_max and abs(u.omega) <= p.omega_max
    u = loiter_control((3.0, 0.0, math.pi / 2), (0.0, 0.0), snap, g, p, t=10.0)
    assert u.v == pytest.approx(p.v_min)
    u = go_to_goal_control((0.0, 0.0, 0.0), (5.0, 0.0), ModeEntrySnapshot(0.0, 1.4), g, p)
    assert u == (1.4, 0.0)
    dec = ModeEntrySnapshot(0.0, 1.5, role=Role.DECELERATE)
    acc = ModeEntrySnapshot(0.0, 1.5, role=Role.ACCELERATE)
    assert change_u_control(None, dec, p.delta_t, p).v == p.v_min
    assert change_u_control(None, acc, p.delta_t, p).v == p.v_max
    assert change_u_control(None, acc, 0.0, p).v == 1.5


def _fd_angle(pos, theta, v, h, **kw):
    plus = (pos[0] + v * h * math.cos(theta), pos[1] + v * h * math.sin(theta))
    minus = (pos[0] - v * h * math.cos(theta), pos[1] - v * h * math.sin(theta))
    a, _ = field_angle_rate(plus, theta, v, **kw)
    b, _ = field_angle_rate(minus, theta, v, **kw)
    return wrap_angle(a - b) / (2 * h)


@given(coord, coord, heading, speeds)
def test_field_angle_rate_matches_finite_difference(x, y, th, v):
    orbit = OrbitSpec(Vec2(0.5, -0.5), 3.0)
    goal = (4.0, 1.0)
    for kw in (dict(orbit=orbit), dict(goal=goal)):
        centre = orbit.center if "orbit" in kw else goal
        if math.hypot(x - centre[0], y - centre[1]) < 0.5:
            continue
        _, rate = field_angle_rate((x, y), th, v, **kw)
        fd = _fd_angle((x, y), th, v, 1e-6, **kw)
        assert rate == pytest.approx(fd, abs=1e-4 * 0.5 * max(1.0, abs(rate)))

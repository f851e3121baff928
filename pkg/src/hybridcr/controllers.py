"""State-feedback laws for the five modes and their gain envelopes.

Every law is a pure function of the agent's own state, what it knows about
its neighbours, and the immutable snapshot taken when the mode was entered.
The full laws return ``(v, omega, vdot, degenerate)``; ``vdot`` is the
analytic speed rate used by the smoothness monitor.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

from . import kernels
from .dynamics import ControlInput, InfeasibleParams, Params
from .geometry import TWO_PI, Vec2, wrap_angle


class Role(enum.Enum):
    DECELERATE = "decelerate"
    ACCELERATE = "accelerate"


@dataclass(frozen=True)
class OrbitSpec:
    center: Vec2
    radius: float

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError(f"orbit radius must be positive, got {self.radius}")

    def nested(self, d_m: float) -> "OrbitSpec":
        """Same centre, one lane further out."""
        return OrbitSpec(self.center, self.radius + 2.0 * d_m)


class CubicCoeffs(NamedTuple):
    a: float
    b: float
    c: float
    d: float


def solve_cubic(f1: float, f2: float) -> CubicCoeffs:
    """Coefficients of ``f(s) = a s^3 + b s^2 + c s + d`` with
    ``f(0) = f1``, ``f(1) = f2`` and zero slope at both ends."""
    return CubicCoeffs(2.0 * (f1 - f2), 3.0 * (f2 - f1), 0.0, f1)


@dataclass(frozen=True)
class CubicProfile:
    a: float
    b: float
    c: float
    d: float
    t_start: float
    duration: float
    terminal: float

    @classmethod
    def fit(cls, f1: float, f2: float, t_start: float, duration: float) -> "CubicProfile":
        a, b, c, d = solve_cubic(f1, f2)
        return cls(a, b, c, d, t_start, duration, f2)

    def phase(self, t: float) -> float:
        return (t - self.t_start) / self.duration

    def value(self, t: float) -> float:
        s = self.phase(t)
        if s >= 1.0:
            return self.terminal
        if s <= 0.0:
            return self.d
        return ((self.a * s + self.b) * s + self.c) * s + self.d

    def rate(self, t: float) -> float:
        s = self.phase(t)
        if s >= 1.0 or s <= 0.0:
            return 0.0
        return ((3.0 * self.a * s + 2.0 * self.b) * s + self.c) / self.duration

    @property
    def max_rate(self) -> float:
        return 1.5 * abs(self.terminal - self.d) / self.duration


@dataclass(frozen=True)
class GainSet:
    k_w1: float
    k_w2: float
    k_w4: float
    k_w5: float
    k_w3: float = 0.0


@dataclass(frozen=True)
class ModeEntrySnapshot:
    """What an agent freezes at the instant it enters a mode."""

    t_s: float
    v_at_switch: float
    orbit: Optional[OrbitSpec] = None
    role: Optional[Role] = None
    leader: Optional[int] = None
    partner: Optional[int] = None
    k_v: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.v_at_switch):
            raise ValueError("switch speed must be finite")


def gain_envelopes(params: Params) -> dict:
    """Upper bounds on the heading gains that keep ``|omega| <= omega_max - Delta``."""
    p = params
    share = p.v_min + p.v_max
    omega_phi = p.omega_max * p.v_max / share
    loiter = (p.omega_max * (1.0 - p.v_min / share) - p.Delta) / TWO_PI
    return {
        "k_w1": loiter,
        "k_w2": p.Delta / TWO_PI,
        "k_w4": (p.omega_max - omega_phi - p.Delta) / TWO_PI,
        "k_w5": loiter,
    }


def default_gains(params: Params, fraction: float = 0.9) -> GainSet:
    """Heading gains at ``fraction`` of their envelopes (``k_w2`` exact).

    Raises
    ------
    InfeasibleParams
        If ``Delta`` is outside its admissible interval or any envelope is
        not positive.
    """
    if not 0.0 < params.Delta < params.Delta_max:
        raise InfeasibleParams(
            f"Delta={params.Delta} must lie in (0, {params.Delta_max})"
        )
    env = gain_envelopes(params)
    for name, value in env.items():
        if value <= 0.0:
            raise InfeasibleParams(f"{name} envelope {value:.6g} is not positive")
    return GainSet(
        k_w1=fraction * env["k_w1"],
        k_w2=env["k_w2"],
        k_w4=fraction * env["k_w4"],
        k_w5=fraction * env["k_w5"],
    )


def limit_cycle_field(pos, orbit: OrbitSpec) -> Vec2:
    x = pos[0] - orbit.center[0]
    y = pos[1] - orbit.center[1]
    g = orbit.radius * orbit.radius - x * x - y * y
    return Vec2(-y + x * g, x + y * g)


def goal_field(pos, goal) -> Vec2:
    """Unit vector from ``pos`` towards ``goal``."""
    ex = goal[0] - pos[0]
    ey = goal[1] - pos[1]
    n = math.hypot(ex, ey)
    if n == 0.0:
        return Vec2(0.0, 0.0)
    return Vec2(ex / n, ey / n)


def field_norm(pos, orbit: OrbitSpec) -> float:
    return kernels.limit_cycle_terms(
        pos[0] - orbit.center[0], pos[1] - orbit.center[1], orbit.radius, 0.0
    )[0]


def orbit_speed_gain(pos, orbit: OrbitSpec, v_at_switch: float) -> float:
    """``k_v`` making the orbit law's speed equal ``v_at_switch`` at entry.

    Returns 0 when the agent sits on the orbit centre.
    """
    n = field_norm(pos, orbit)
    return v_at_switch / n if n > 0.0 else 0.0


def _sat(value: float, bound: float) -> float:
    if value > bound:
        return bound
    if value < -bound:
        return -bound
    return value


def orbit_law(x, y, theta, orbit: OrbitSpec, k_v, k_w, params: Params,
              speed_cap: Optional[CubicProfile] = None, t: float = 0.0):
    """Shared Go-Round / Loiter law: track the limit-cycle field.

    ``speed_cap`` optionally bounds the speed from above by a cubic ramp
    evaluated at ``t``; Loiter uses it to slow onto a trackable circle.
    """
    nf, phi, dphi, dnorm = kernels.limit_cycle_terms(
        x - orbit.center[0], y - orbit.center[1], orbit.radius, theta
    )
    if nf == 0.0 or k_v == 0.0:
        return 0.0, 0.0, 0.0, True
    v = k_v * nf
    vdot = k_v * dnorm * v
    if speed_cap is not None:
        cap = speed_cap.value(t)
        if v > cap:
            v = cap
            vdot = speed_cap.rate(t)
    if v > params.v_max:
        v = params.v_max
        vdot = 0.0
    elif v < params.v_min:
        v = params.v_min
        vdot = 0.0
    w = -k_w * wrap_angle(theta - phi) + v * dphi
    return v, _sat(w, params.omega_max), vdot, False


def loiter_speed_cap(v_at_switch: float, t_s: float, params: Params) -> CubicProfile:
    """Upper speed envelope in Loiter: ramps from the entry speed to ``v_min``.

    A circle of radius ``r_c`` needs a turn rate ``v / r_c``, which exceeds
    ``omega_max`` above the mid speed; settling at ``v_min`` keeps margin.
    """
    return CubicProfile.fit(max(v_at_switch, params.v_min), params.v_min, t_s, params.delta_t)


def goal_law(x, y, theta, goal, v_hold, k_w, params: Params):
    """Go-towards-Goal law: constant speed, heading tracks the goal bearing."""
    phi, dphi, rho = kernels.goal_terms(x, y, goal[0], goal[1], theta)
    if rho == 0.0:
        return v_hold, 0.0, 0.0, True
    w = -k_w * wrap_angle(theta - phi) + v_hold * dphi
    return v_hold, _sat(w, params.omega_max), 0.0, False


def changeu_law(profile: CubicProfile, t: float):
    return profile.value(t), 0.0, profile.rate(t), False


def follow_law(theta, profile: CubicProfile, t, theta_lead, omega_lead, k_w2, params):
    w = -k_w2 * wrap_angle(theta - theta_lead) + omega_lead
    return profile.value(t), _sat(w, params.omega_max), profile.rate(t), False


def _as_state(state):
    return state[0], state[1], state[2]


def go_round_control(state, snapshot: ModeEntrySnapshot, gains: GainSet,
                     params: Params) -> ControlInput:
    """Go-Round input; speed gain frozen in ``snapshot.k_v``."""
    if snapshot.orbit is None:
        raise ValueError("Go-Round needs an orbit in the snapshot")
    x, y, th = _as_state(state)
    k_v = snapshot.k_v or orbit_speed_gain((x, y), snapshot.orbit, snapshot.v_at_switch)
    v, w, _, degenerate = orbit_law(x, y, th, snapshot.orbit, k_v, gains.k_w1, params)
    if degenerate:
        return ControlInput(snapshot.v_at_switch, 0.0)
    return ControlInput(v, w)


def loiter_control(state, goal, snapshot: ModeEntrySnapshot, gains: GainSet,
                   params: Params, t: Optional[float] = None) -> ControlInput:
    """Loiter on the circle of radius ``r_c`` around ``goal``.

    With ``t`` given the speed is additionally held under
    :func:`loiter_speed_cap`, as the protocol does.
    """
    orbit = snapshot.orbit or OrbitSpec(Vec2(goal[0], goal[1]), params.r_c)
    x, y, th = _as_state(state)
    k_v = snapshot.k_v or orbit_speed_gain((x, y), orbit, snapshot.v_at_switch)
    cap = None if t is None else loiter_speed_cap(snapshot.v_at_switch, snapshot.t_s, params)
    v, w, _, degenerate = orbit_law(x, y, th, orbit, k_v, gains.k_w5, params,
                                    speed_cap=cap, t=t or 0.0)
    if degenerate:
        return ControlInput(snapshot.v_at_switch, 0.0)
    return ControlInput(v, w)


def change_u_control(state, snapshot: ModeEntrySnapshot, t: float,
                     params: Params) -> ControlInput:
    terminal = params.v_min if snapshot.role is Role.DECELERATE else params.v_max
    profile = CubicProfile.fit(snapshot.v_at_switch, terminal, snapshot.t_s, params.delta_t)
    return ControlInput(profile.value(t), 0.0)


def follow_leader_control(state, leader_theta: float, leader_input: ControlInput,
                          profile: CubicProfile, gains: GainSet, t: float,
                          params: Params) -> ControlInput:
    """Follower input given the profile fitted at the current interval start."""
    v, w, _, _ = follow_law(state[2], profile, t, leader_theta, leader_input[1],
                            gains.k_w2, params)
    return ControlInput(v, w)


def go_to_goal_control(state, goal, snapshot: ModeEntrySnapshot, gains: GainSet,
                       params: Params) -> ControlInput:
    x, y, th = _as_state(state)
    v, w, _, _ = goal_law(x, y, th, goal, snapshot.v_at_switch, gains.k_w4, params)
    return ControlInput(v, w)


def field_angle_rate(pos, theta: float, v: float, orbit: Optional[OrbitSpec] = None,
                     goal=None) -> Tuple[float, float]:
    """Field angle and its analytic time derivative along ``(v, theta)``.

    Pass ``orbit`` for the limit-cycle field or ``goal`` for the radial one.
    """
    if orbit is not None:
        _, phi, dphi, _ = kernels.limit_cycle_terms(
            pos[0] - orbit.center[0], pos[1] - orbit.center[1], orbit.radius, theta
        )
    else:
        phi, dphi, _ = kernels.goal_terms(pos[0], pos[1], goal[0], goal[1], theta)
    return phi, v * dphi

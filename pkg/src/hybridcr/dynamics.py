"""Unicycle state, parameter derivation and fixed-step integration."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List, NamedTuple, Optional, Tuple

from .geometry import wrap_angle

DEFAULT_DT = 0.01
ACOS_SLACK = 1e-12


class InfeasibleParams(ValueError):
    """A parameter set violates one of the bounds the protocol relies on."""


class NegativeDiscriminant(InfeasibleParams):
    """No critical angle exists: Change-U cannot be made safe."""


class AgentState(NamedTuple):
    x: float
    y: float
    theta: float


class ControlInput(NamedTuple):
    v: float
    omega: float


def critical_angle(v_min: float, v_max: float, d_m: float, R_c: float) -> float:
    """Largest heading difference for which speed change alone keeps ``d_m``.

    With ``d_r = d_m / R_c`` and ``v_r = v_min / v_max`` the separation
    condition reduces to ``cos^2 - 2 b cos + c >= 0``; the critical angle is
    ``arccos`` of its larger root.
    """
    d_r = d_m / R_c
    v_r = v_min / v_max
    if not (0.0 < d_r < 1.0 and 0.0 < v_r <= 1.0):
        raise InfeasibleParams(
            f"critical angle needs 0 < d_m/R_c < 1 and 0 < v_min/v_max <= 1 "
            f"(got d_r={d_r:.6g}, v_r={v_r:.6g})"
        )
    b = v_r * (1.0 - d_r * d_r)
    c = v_r * v_r - d_r * d_r * (1.0 + v_r * v_r)
    disc = b * b - c
    if disc < 0.0:
        raise NegativeDiscriminant(f"b^2 - c = {disc:.6g} < 0")
    arg = b + math.sqrt(disc)
    if arg > 1.0 + ACOS_SLACK or arg < -1.0 - ACOS_SLACK:
        raise NegativeDiscriminant(f"arccos argument {arg:.17g} outside [-1, 1]")
    return math.acos(max(-1.0, min(1.0, arg)))


def changeu_separation(theta: float, v_min: float, v_max: float, R_c: float) -> float:
    """Closest relative-motion distance in the Change-U worst case.

    One agent at ``v_min`` along the x axis, the other detected at range
    ``R_c`` flying at ``v_max`` with heading offset ``theta``. The distance is
    ``R_c cos(alpha)`` where ``alpha`` is the relative-velocity angle.
    """
    num = v_max * math.cos(theta) - v_min
    den = math.hypot(v_max * math.sin(theta), num)
    return R_c * num / den


@dataclass(frozen=True)
class Params:
    """Input bounds, safety distances and the quantities derived from them."""

    v_min: float
    v_max: float
    omega_max: float
    d_m: float
    delta_t: float
    Delta: float
    delta: float
    epsilon: float
    R_c: float
    r_c: float
    r_min: float
    theta_c: float

    def base(self) -> dict:
        """Fields sufficient to rebuild this set through :func:`derive_params`."""
        d = asdict(self)
        for k in ("r_c", "r_min", "theta_c"):
            d.pop(k)
        return d

    @property
    def Delta_max(self) -> float:
        return self.omega_max * self.v_min / (self.v_min + self.v_max)


def default_Delta(v_min: float, v_max: float, omega_max: float) -> float:
    return 0.05 * omega_max * v_min / (v_min + v_max)


def comm_radius_bound(delta_t: float, v_min: float, v_max: float, d_m: float) -> float:
    """Smallest sensing radius that keeps a follower clear of its leader."""
    return 0.5 * delta_t * (v_max - v_min) + d_m


@dataclass
class Check:
    name: str
    ok: bool
    detail: str


def feasibility_checks(
    v_min: float,
    v_max: float,
    omega_max: float,
    d_m: float,
    delta_t: float = 1.0,
    Delta: Optional[float] = None,
    delta: float = 0.05,
    epsilon: float = 0.01,
    R_c: Optional[float] = None,
) -> Tuple[List[Check], dict]:
    """Evaluate every parameter inequality without raising.

    Returns the list of checks and a dict of derived values (entries are
    ``None`` where they could not be computed).
    """
    checks: List[Check] = []
    derived: dict = {"r_c": None, "r_min": None, "R_c": None, "theta_c": None}

    def add(name, ok, detail):
        checks.append(Check(name, bool(ok), detail))

    finite = all(
        math.isfinite(x) for x in (v_min, v_max, omega_max, d_m, delta_t, delta, epsilon)
    )
    add("finite", finite, "all base fields finite")
    if not finite:
        return checks, derived
    add("speed_order", 0.0 < v_min < v_max, f"0 < v_min={v_min} < v_max={v_max}")
    add("omega_max_positive", omega_max > 0.0, f"omega_max={omega_max} > 0")
    add("d_m_positive", d_m > 0.0, f"d_m={d_m} > 0")
    add("delta_t_positive", delta_t > 0.0, f"delta_t={delta_t} > 0")
    add("delta_positive", delta > 0.0, f"delta={delta} > 0")
    add("epsilon_positive", epsilon > 0.0, f"epsilon={epsilon} > 0")
    if omega_max <= 0.0 or v_min <= 0.0 or v_max <= 0.0:
        return checks, derived

    r_c = (v_min + v_max) / (2.0 * omega_max)
    r_min = v_min / omega_max
    derived["r_c"] = r_c
    derived["r_min"] = r_min
    bound = comm_radius_bound(delta_t, v_min, v_max, d_m)
    if R_c is None:
        R_c = bound + epsilon
    derived["R_c"] = R_c
    add(
        "comm_radius",
        R_c >= bound and d_m < R_c,
        f"R_c={R_c:.6g} >= (delta_t/2)(v_max-v_min)+d_m={bound:.6g} and d_m < R_c",
    )
    if v_max > v_min:
        dt_max = 2.0 * (R_c - d_m) / (v_max - v_min)
        add("follow_leader_delta_t", delta_t <= dt_max,
            f"delta_t={delta_t:.6g} <= 2(R_c-d_m)/(v_max-v_min)={dt_max:.6g}")
    delta_cap = omega_max * v_min / (v_min + v_max)
    if Delta is None:
        Delta = default_Delta(v_min, v_max, omega_max)
    add("gain_margin", 0.0 < Delta < delta_cap,
        f"0 < Delta={Delta:.6g} < omega_max v_min/(v_min+v_max)={delta_cap:.6g}")

    theta_c = None
    try:
        theta_c = critical_angle(v_min, v_max, d_m, R_c)
    except InfeasibleParams as exc:
        add("critical_angle", False, str(exc))
    else:
        derived["theta_c"] = theta_c
        add("critical_angle", theta_c > 0.0,
            f"theta_c={theta_c:.6f} rad > 0" + ("" if theta_c > 0.0 else " (no margin)"))
    if theta_c is not None and theta_c > 0.0:
        need = d_m / (2.0 * math.sin(theta_c))
        add("turning_radius", r_min >= need,
            f"r_min={r_min:.6g} >= d_m/(2 sin theta_c)={need:.6g}")
    else:
        add("turning_radius", False, "needs theta_c > 0")
    return checks, derived


def derive_params(
    v_min: float,
    v_max: float,
    omega_max: float,
    d_m: float,
    delta_t: float = 1.0,
    Delta: Optional[float] = None,
    delta: float = 0.05,
    epsilon: float = 0.01,
    R_c: Optional[float] = None,
) -> Params:
    """Validate base fields and compute ``r_c``, ``r_min``, ``R_c``, ``theta_c``.

    ``R_c`` defaults to its lower bound plus ``epsilon``; an explicit value
    must respect that bound.

    Raises
    ------
    InfeasibleParams
        Naming the first violated inequality.
    """
    checks, derived = feasibility_checks(
        v_min, v_max, omega_max, d_m, delta_t, Delta, delta, epsilon, R_c
    )
    for c in checks:
        if not c.ok:
            if c.name == "critical_angle" and "b^2 - c" in c.detail:
                raise NegativeDiscriminant(c.detail)
            raise InfeasibleParams(f"{c.name}: {c.detail}")
    if Delta is None:
        Delta = default_Delta(v_min, v_max, omega_max)
    return Params(
        v_min=float(v_min),
        v_max=float(v_max),
        omega_max=float(omega_max),
        d_m=float(d_m),
        delta_t=float(delta_t),
        Delta=float(Delta),
        delta=float(delta),
        epsilon=float(epsilon),
        R_c=float(derived["R_c"]),
        r_c=derived["r_c"],
        r_min=derived["r_min"],
        theta_c=derived["theta_c"],
    )


def reference_params(**overrides) -> Params:
    """Reference parameter set: speeds 1.2 to 1.8, turn rate 0.5, d_m 0.41, R_c 1.64."""
    base = dict(v_min=1.2, v_max=1.8, omega_max=0.5, d_m=0.41, R_c=1.64)
    base.update(overrides)
    return derive_params(**base)


def step(state: AgentState, u: ControlInput, dt: float) -> AgentState:
    """Advance one agent by ``dt`` with RK4 under a held input."""
    from . import kernels

    x, y, th = kernels.rk4_unicycle(state[0], state[1], state[2], u[0], u[1], dt)
    return AgentState(x, y, wrap_angle(th))

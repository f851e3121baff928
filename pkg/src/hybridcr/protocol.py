"""Hybrid automaton: neighbour sensing, guards, resets and the world tick.

All decisions within a tick read the state frozen at the start of the tick
(positions, previous inputs, modes, orbits, goals); transitions are committed
afterwards in label order, so symmetric conflicts resolve symmetrically and a
run is a deterministic function of its scenario and seed.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .controllers import (
    CubicProfile,
    GainSet,
    ModeEntrySnapshot,
    OrbitSpec,
    Role,
    changeu_law,
    default_gains,
    follow_law,
    goal_law,
    loiter_speed_cap,
    orbit_law,
    orbit_speed_gain,
)
from .dynamics import Params
from .geometry import (
    TWO_PI,
    Vec2,
    angular_separation,
    bearing,
    predicted_min_distance,
    time_to_closest_approach,
    wrap_angle,
)


class Mode(enum.IntEnum):
    INIT = 0
    GO_ROUND = 1
    FOLLOW_LEADER = 2
    CHANGE_U = 3
    GO_TO_GOAL = 4
    LOITER = 5

    @property
    def short(self) -> str:
        return f"q{int(self)}"


Q1, Q2, Q3, Q4, Q5 = (Mode.GO_ROUND, Mode.FOLLOW_LEADER, Mode.CHANGE_U,
                      Mode.GO_TO_GOAL, Mode.LOITER)

EDGES = frozenset({
    (Mode.INIT, Q4), (Q1, Q4), (Q4, Q1), (Q2, Q4), (Q3, Q4),
    (Q4, Q3), (Q3, Q2), (Q4, Q5), (Q5, Q4),
})

# Reset identifiers as they appear in the event log.
R14 = "R(q1,q4)"
R24 = "R(q2,q4)"
R54 = "R(q5,q4)"
R44 = "R(q4,q4)"

SURFACE_TOL = 1e-9


class AssumptionViolation(ValueError):
    """Initial positions or goals are too close together."""


@dataclass(frozen=True)
class CommPackage:
    """What an agent broadcasts at the start of a tick."""

    id: int
    pos: Vec2
    heading: float
    v: float
    omega: float
    mode: Mode
    assigned: Vec2
    goal: Vec2
    ifw: FrozenSet[int]
    icw: FrozenSet[int]
    orbit: Optional[OrbitSpec]

    @property
    def at_goal(self) -> bool:
        return self.mode is Q5

    @property
    def at_obstacle(self) -> bool:
        return self.mode in (Q1, Q5)


class Event(NamedTuple):
    t: float
    tick: int
    id: int
    kind: str            # "switch", "reset" or "leader"
    from_mode: int
    to_mode: int
    reset_kind: str
    temp_goal: Tuple[float, float]


@dataclass(eq=False)
class AgentAutomaton:
    id: int
    goal: Vec2
    assigned: Vec2
    mode: Mode = Mode.INIT
    snapshot: Optional[ModeEntrySnapshot] = None
    profile: Optional[CubicProfile] = None
    ifw: FrozenSet[int] = frozenset()
    icw: FrozenSet[int] = frozenset()
    leader: Optional[int] = None
    sub_key: Optional[tuple] = None
    sub: Optional[ModeEntrySnapshot] = None
    switch_log: List[Tuple[float, int, int]] = field(default_factory=list)

    @property
    def orbit(self) -> Optional[OrbitSpec]:
        if self.mode in (Q1, Q5) and self.snapshot is not None:
            return self.snapshot.orbit
        return None

    @property
    def at_goal(self) -> bool:
        return self.mode is Q5

    @property
    def at_obstacle(self) -> bool:
        return self.mode in (Q1, Q5)


@dataclass
class _Decision:
    target: Optional[Mode]
    partner: Optional[int] = None
    orbit: Optional[OrbitSpec] = None
    role: Optional[Role] = None
    reset_kind: str = ""
    new_assigned: Optional[Vec2] = None
    formation: FrozenSet[int] = frozenset()


# -- stateless protocol helpers ---------------------------------------------

def neighbors(positions: Sequence, i: int, R_c: float) -> set:
    """Indices ``j != i`` within the closed sensing ball of agent ``i``."""
    xi, yi = positions[i]
    out = set()
    for j, (x, y) in enumerate(positions):
        if j != i and math.hypot(x - xi, y - yi) <= R_c:
            out.add(j)
    return out


def elect_leader(formation: Iterable[Tuple[int, Sequence[float]]]) -> int:
    """Member nearest the formation centroid; ties go to the smallest label."""
    members = sorted(formation, key=lambda m: m[0])
    if not members:
        raise ValueError("cannot elect a leader of an empty formation")
    cx = sum(p[0] for _, p in members) / len(members)
    cy = sum(p[1] for _, p in members) / len(members)
    best_id, best_d = None, math.inf
    for ident, p in members:
        d = math.hypot(p[0] - cx, p[1] - cy)
        if d < best_d:
            best_id, best_d = ident, d
    return best_id


def is_ahead(pos_i, theta_i: float, pos_j, d_m: float, R_c: float) -> bool:
    """True when ``j`` lies within ``arcsin(d_m/R_c)`` of ``i``'s heading."""
    return abs(wrap_angle(theta_i - bearing(pos_i, pos_j))) <= math.asin(d_m / R_c)


def assign_changeu_roles(id_i: int, pos_i, theta_i: float, v_i: float,
                         id_j: int, pos_j, theta_j: float, v_j: float,
                         d_m: float, R_c: float) -> Tuple[int, int]:
    """Return ``(decelerator, accelerator)`` for a Change-U pair."""
    if is_ahead(pos_i, theta_i, pos_j, d_m, R_c):
        return id_i, id_j
    if is_ahead(pos_j, theta_j, pos_i, d_m, R_c):
        return id_j, id_i
    if v_i < v_j:
        return id_i, id_j
    if v_j < v_i:
        return id_j, id_i
    return (id_i, id_j) if id_i < id_j else (id_j, id_i)


def fresh_orbit(pos_i, theta_i, v_i, pos_j, theta_j, v_j, params: Params) -> OrbitSpec:
    """Shared round-about for a new head-on-like conflict.

    Radius is the mean speed times the time to closest approach; the centre
    is the midpoint of both agents' points ``r_ob`` ahead along their
    headings (the exact common point for a symmetric encounter).
    """
    ci, si = math.cos(theta_i), math.sin(theta_i)
    cj, sj = math.cos(theta_j), math.sin(theta_j)
    t_min = time_to_closest_approach(pos_i, pos_j, (v_i * ci, v_i * si), (v_j * cj, v_j * sj))
    if t_min is None or t_min <= 0.0:
        r_ob = max(params.r_min, 0.5 * math.hypot(pos_i[0] - pos_j[0], pos_i[1] - pos_j[1]))
    else:
        r_ob = 0.5 * (v_i + v_j) * t_min
    cx = 0.5 * (pos_i[0] + r_ob * ci + pos_j[0] + r_ob * cj)
    cy = 0.5 * (pos_i[1] + r_ob * si + pos_j[1] + r_ob * sj)
    return OrbitSpec(Vec2(cx, cy), r_ob)


def assign_orbit(pos_i, theta_i, v_i, pos_j, theta_j, v_j, params: Params,
                 existing: Iterable[OrbitSpec] = (), join: Optional[OrbitSpec] = None
                 ) -> OrbitSpec:
    """Orbit for agent ``i`` entering Go-Round against ``j``.

    ``join`` is ``j``'s current orbit if it already circles; ``i`` then takes
    the next lane outside every known orbit sharing that centre.
    """
    if join is not None:
        r = max([o.radius for o in existing if o.center == join.center] + [join.radius])
        return OrbitSpec(join.center, r + 2.0 * params.d_m)
    return fresh_orbit(pos_i, theta_i, v_i, pos_j, theta_j, v_j, params)


def free_side_goal(pos, theta: float, goal, r_c: float) -> Vec2:
    """Temporary goal beside the agent, opposite to its goal's side."""
    m = math.copysign(1.0, math.sin(bearing(pos, goal) - theta))
    return Vec2(pos[0] + r_c * m * math.sin(theta), pos[1] - r_c * m * math.cos(theta))


def random_offset(rng: random.Random, radius: float) -> Vec2:
    a = rng.uniform(-math.pi, math.pi)
    return Vec2(radius * math.cos(a), radius * math.sin(a))


def check_assumptions(starts: Sequence, goals: Sequence, ids: Sequence[int],
                      params: Params) -> None:
    """Raise :class:`AssumptionViolation` naming the first offending pair."""
    goal_sep = params.R_c + 2.0 * params.r_c
    n = len(starts)
    for a in range(n):
        for b in range(a + 1, n):
            dg = math.hypot(goals[a][0] - goals[b][0], goals[a][1] - goals[b][1])
            if not dg > goal_sep:
                raise AssumptionViolation(
                    f"assumption 1 (goal separation > R_c + 2 r_c = {goal_sep:.6g}) "
                    f"violated by agents {ids[a]} and {ids[b]}: {dg:.6g}")
            ds = math.hypot(starts[a][0] - starts[b][0], starts[a][1] - starts[b][1])
            if not ds > params.R_c:
                raise AssumptionViolation(
                    f"assumption 2 (initial separation > R_c = {params.R_c:.6g}) "
                    f"violated by agents {ids[a]} and {ids[b]}: {ds:.6g}")


# -- trace -------------------------------------------------------------------

class Trace:
    """Preallocated per-tick record of every agent."""

    def __init__(self, ids: Sequence[int], n_rows: int, dt: float):
        n = len(ids)
        self.ids = list(ids)
        self.dt = dt
        self.n_rows = 0
        shape = (n_rows, n)
        self.x = np.zeros(shape)
        self.y = np.zeros(shape)
        self.theta = np.zeros(shape)
        self.v = np.zeros(shape)
        self.omega = np.zeros(shape)
        self.vdot = np.zeros(shape)
        self.mode = np.zeros(shape, dtype=np.int8)
        self.gx = np.zeros(shape)
        self.gy = np.zeros(shape)
        self.events: List[Event] = []
        self.goals: List[Tuple[float, float]] = []
        self.bound_violations: List[tuple] = []
        self.degenerate: List[tuple] = []

    _ARRAYS = ("x", "y", "theta", "v", "omega", "vdot", "mode", "gx", "gy")

    def reserve(self, n_rows: int) -> None:
        """Grow the buffers to hold at least ``n_rows`` rows."""
        have = self.x.shape[0]
        if n_rows <= have:
            return
        for name in self._ARRAYS:
            old = getattr(self, name)
            new = np.zeros((n_rows, old.shape[1]), dtype=old.dtype)
            new[:have] = old
            setattr(self, name, new)

    def trim(self) -> "Trace":
        k = self.n_rows
        for name in self._ARRAYS:
            setattr(self, name, getattr(self, name)[:k])
        return self

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n_rows) * self.dt

    def switches(self, agent_index: int) -> List[Event]:
        ident = self.ids[agent_index]
        return [e for e in self.events if e.kind == "switch" and e.id == ident]


# -- world -------------------------------------------------------------------

class World:
    """Agents, their continuous state arrays, and the synchronous tick."""

    def __init__(self, params: Params, ids: Sequence[int], starts: Sequence,
                 headings: Sequence[float], goals: Sequence, v0: Sequence[float],
                 dt: float = 0.01, seed: int = 0, gains: Optional[GainSet] = None,
                 horizon: int = 0, validate: bool = True):
        order = sorted(range(len(ids)), key=lambda k: ids[k])
        ids = [int(ids[k]) for k in order]
        if len(set(ids)) != len(ids):
            raise ValueError("agent ids must be unique")
        starts = [starts[k] for k in order]
        goals = [goals[k] for k in order]
        headings = [headings[k] for k in order]
        v0 = [v0[k] for k in order]
        if validate:
            check_assumptions(starts, goals, ids, params)
        for v in v0:
            if not params.v_min <= v <= params.v_max:
                raise ValueError(f"initial speed {v} outside [{params.v_min}, {params.v_max}]")
        self.params = params
        self.gains = gains or default_gains(params)
        self.dt = float(dt)
        self.rng = random.Random(seed)
        self.seed = seed
        self.k = 0
        n = len(ids)
        self.n = n
        self.ids = ids
        self.x = np.array([float(p[0]) for p in starts])
        self.y = np.array([float(p[1]) for p in starts])
        self.th = np.array([wrap_angle(float(h)) for h in headings])
        self.v = np.array([float(s) for s in v0])
        self.w = np.zeros(n)
        self.vd = np.zeros(n)
        self.px: Optional[List[float]] = None
        self.py: Optional[List[float]] = None
        self.agents = [AgentAutomaton(id=ids[k], goal=Vec2(*map(float, goals[k])),
                                      assigned=Vec2(*map(float, goals[k])))
                       for k in range(n)]
        self._goal_set = {a.goal for a in self.agents}
        self.trace = Trace(ids, horizon + 1, self.dt)
        self.trace.goals = [tuple(a.goal) for a in self.agents]
        self.nbrs: List[set] = [set() for _ in range(n)]

    # -- helpers over frozen start-of-tick data ------------------------------

    def packages(self) -> List[CommPackage]:
        xs, ys, ths = self.x.tolist(), self.y.tolist(), self.th.tolist()
        vs, ws = self.v.tolist(), self.w.tolist()
        return [CommPackage(a.id, Vec2(xs[i], ys[i]), ths[i], vs[i], ws[i], a.mode,
                            a.assigned, a.goal, a.ifw, a.icw, a.orbit)
                for i, a in enumerate(self.agents)]

    def index(self, ident: int) -> int:
        return self.ids.index(ident)

    def _other_goal(self, i: int, point) -> bool:
        """``point`` is the actual goal of some agent other than ``i``."""
        return point in self._goal_set and point != self.agents[i].goal

    def _log(self, t, i, kind, frm, to, reset_kind=""):
        a = self.agents[i]
        ev = Event(t, self.k, a.id, kind, int(frm), int(to), reset_kind,
                   (a.assigned[0], a.assigned[1]))
        self.trace.events.append(ev)
        if kind == "switch":
            a.switch_log.append((t, int(frm), int(to)))

    # -- guards --------------------------------------------------------------

    def _decide(self, i: int, S) -> Optional[_Decision]:
        mode = self.agents[i].mode
        if mode is Q4:
            return self._decide_go_to_goal(i, S)
        if mode is Q1:
            return self._decide_go_round(i, S)
        if mode is Q3:
            return self._decide_change_u(i, S)
        if mode is Q2:
            return self._decide_follow(i, S)
        if mode is Q5:
            return self._decide_loiter(i, S)
        raise AssertionError(f"unexpected mode {mode!r}")

    def _goal_surface_hit(self, i, S, goal) -> bool:
        xs, ys = S[0], S[1]
        r_c = self.params.r_c
        cur = math.hypot(xs[i] - goal[0], ys[i] - goal[1]) - r_c
        tol = SURFACE_TOL * r_c
        if abs(cur) <= tol:
            return True
        if self.px is None:
            return False
        prev = math.hypot(self.px[i] - goal[0], self.py[i] - goal[1]) - r_c
        return (prev > tol and cur < 0.0) or (prev < -tol and cur > 0.0)

    def _a41(self, i, j, S) -> bool:
        xs, ys, ths, vs = S[0], S[1], S[2], S[3]
        vi, vj = vs[i], vs[j]
        return predicted_min_distance(
            (xs[i], ys[i]), (xs[j], ys[j]),
            (vi * math.cos(ths[i]), vi * math.sin(ths[i])),
            (vj * math.cos(ths[j]), vj * math.sin(ths[j])),
        ) <= self.params.d_m

    def _orbit_against(self, i, j, S) -> OrbitSpec:
        xs, ys, ths, vs = S[0], S[1], S[2], S[3]
        other = self.agents[j]
        join = other.orbit
        existing = [a.orbit for a in self.agents if a.orbit is not None]
        return assign_orbit((xs[i], ys[i]), ths[i], vs[i], (xs[j], ys[j]), ths[j], vs[j],
                            self.params, existing, join)

    def _roles(self, i, j, S) -> Tuple[int, int]:
        xs, ys, ths, vs = S[0], S[1], S[2], S[3]
        p = self.params
        return assign_changeu_roles(i, (xs[i], ys[i]), ths[i], vs[i],
                                    j, (xs[j], ys[j]), ths[j], vs[j], p.d_m, p.R_c)

    def _go_round_trigger(self, i, S) -> Optional[int]:
        """First neighbour (label order) that sends a Q4 agent into Go-Round."""
        ths = S[2]
        theta_c = self.params.theta_c
        for j in sorted(self.nbrs[i], key=lambda j: self.ids[j]):
            b = self.agents[j]
            if ((angular_separation(ths[i], ths[j]) >= theta_c or b.at_obstacle)
                    and self._a41(i, j, S)):
                return j
        return None

    def _change_u_trigger(self, i, j, S) -> bool:
        # An orbiting neighbour cannot adjust its speed, so only the Go-Round
        # guard applies to it; a separating pair needs no resolution.
        return (not self.agents[j].at_obstacle
                and angular_separation(S[2][i], S[2][j]) < self.params.theta_c
                and not self._separating(i, j, S))

    def _decide_go_to_goal(self, i, S) -> Optional[_Decision]:
        a = self.agents[i]
        p = self.params
        N = self.nbrs[i]
        assigned = a.assigned
        reset_kind, new_assigned = "", None
        if not N and assigned != a.goal and not self._other_goal(i, assigned):
            reset_kind, new_assigned = R44, a.goal
            assigned = a.goal
        if self._goal_surface_hit(i, S, assigned):
            return _Decision(Q5, orbit=OrbitSpec(assigned, p.r_c),
                             reset_kind=reset_kind, new_assigned=new_assigned)
        if N:
            j = self._go_round_trigger(i, S)
            if j is not None:
                return _Decision(Q1, partner=j, orbit=self._orbit_against(i, j, S))
            if len(N) == 1:
                (j,) = N
                if self._change_u_trigger(i, j, S):
                    dec, _ = self._roles(i, j, S)
                    role = Role.DECELERATE if dec == i else Role.ACCELERATE
                    return _Decision(Q3, partner=j, role=role)
        if reset_kind:
            return _Decision(None, reset_kind=reset_kind, new_assigned=new_assigned)
        return None

    def _decide_go_round(self, i, S) -> Optional[_Decision]:
        a = self.agents[i]
        p = self.params
        orbit = a.snapshot.orbit
        xs, ys, ths = S[0], S[1], S[2]
        pos = (xs[i], ys[i])
        N = self.nbrs[i]
        same = []
        for j in N:
            o = self.agents[j].orbit
            if o is not None and o.center == orbit.center:
                if o.radius > orbit.radius:
                    return None
                same.append((j, o))
        if N and self._go_round_trigger(i, S) is not None:
            return None
        # "Near" is judged against the goal currently pursued, so a temporary
        # goal that is itself blocked can be handed on again.
        d_goal = math.hypot(pos[0] - a.assigned[0], pos[1] - a.assigned[1])
        near = d_goal <= 2.0 * orbit.radius
        if not near:
            to_goal = bearing(pos, a.assigned)
            if abs(wrap_angle(ths[i] - to_goal)) >= p.delta:
                return None
            if math.cos(bearing(pos, orbit.center) - to_goal) >= 0.0:
                return None
            return _Decision(Q4)
        # Close to the pursued goal: hand over to an inner neighbour's goal.
        if N and len(same) == len(N) and all(o.radius < orbit.radius for _, o in same):
            j1 = min(N, key=lambda j: self.ids[j])
            inner = self.agents[j1]
            if inner.goal == inner.assigned:
                return _Decision(Q4, reset_kind=R14, new_assigned=inner.goal)
        return _Decision(Q4)

    def _separating(self, i, j, S) -> bool:
        xs, ys, ths, vs = S[0], S[1], S[2], S[3]
        rx, ry = xs[i] - xs[j], ys[i] - ys[j]
        return (vs[i] * (rx * math.cos(ths[i]) + ry * math.sin(ths[i]))
                - vs[j] * (rx * math.cos(ths[j]) + ry * math.sin(ths[j]))) > 0.0

    def _decide_change_u(self, i, S) -> Optional[_Decision]:
        a = self.agents[i]
        N = self.nbrs[i]
        if not N:
            return _Decision(Q4)
        partner = a.snapshot.partner
        if partner not in N:
            partner = min(N, key=lambda j: self.ids[j])
        others = (N | self.nbrs[partner]) - {i, partner}
        if others and self.agents[partner].mode in (Q2, Q3):
            members = {a.id, self.agents[partner].id} | a.ifw | self.agents[partner].ifw
            return _Decision(Q2, partner=partner, formation=frozenset(members))
        if self._separating(i, partner, S):
            return _Decision(Q4)
        return None

    def _formation_indices(self, i) -> List[int]:
        return [self.ids.index(m) for m in sorted(self.agents[i].ifw)]

    def _decide_follow(self, i, S) -> Optional[_Decision]:
        a = self.agents[i]
        members = self._formation_indices(i)
        if len(members) <= 1:
            return _Decision(Q4)
        mset = set(members)
        for m in members:
            if self.nbrs[m] - mset:
                return None
        xs, ys, ths = S[0], S[1], S[2]
        lead = self._leader_index(members, S)
        dl = lambda m: math.hypot(xs[m] - xs[lead], ys[m] - ys[lead])
        d_i = dl(i)
        if any(dl(m) > d_i for m in members):
            return None
        if i == lead:
            return _Decision(Q4)
        g = a.assigned
        if (g[0] - xs[i]) * (xs[lead] - xs[i]) + (g[1] - ys[i]) * (ys[lead] - ys[i]) < 0.0:
            return _Decision(Q4)
        temp = free_side_goal((xs[i], ys[i]), ths[i], a.goal, self.params.r_c)
        return _Decision(Q4, reset_kind=R24, new_assigned=temp)

    def _leader_index(self, members: List[int], S) -> int:
        xs, ys = S[0], S[1]
        lead_id = elect_leader([(self.ids[m], (xs[m], ys[m])) for m in members])
        return self.ids.index(lead_id)

    def _decide_loiter(self, i, S) -> Optional[_Decision]:
        a = self.agents[i]
        N = self.nbrs[i]
        for j in sorted(N, key=lambda j: self.ids[j]):
            if self.agents[j].goal == a.assigned:
                # Stay put while leaving would trip Go-Round on the next tick.
                if self._go_round_trigger(i, S) is not None:
                    return None
                z = random_offset(self.rng, self.params.r_c)
                return _Decision(Q4, reset_kind=R54,
                                 new_assigned=Vec2(a.goal[0] + z[0], a.goal[1] + z[1]))
        if not N and a.assigned != a.goal and not self._other_goal(i, a.assigned):
            return _Decision(Q4, reset_kind=R44, new_assigned=a.goal)
        return None

    # -- commit --------------------------------------------------------------

    def _enter(self, i, target: Mode, d: _Decision, t: float, S):
        a = self.agents[i]
        p = self.params
        v_prev = S[3][i]
        frm = a.mode
        if (frm, target) not in EDGES:
            raise AssertionError(f"illegal transition {frm!r} -> {target!r}")
        if d.new_assigned is not None:
            a.assigned = d.new_assigned
        k_v = 0.0
        orbit = d.orbit
        if target is Q5:
            orbit = OrbitSpec(a.assigned, p.r_c)
        if orbit is not None:
            k_v = orbit_speed_gain((S[0][i], S[1][i]), orbit, v_prev)
        leader = None
        a.profile = None
        if target is Q5:
            a.profile = loiter_speed_cap(v_prev, t, p)
        if target is Q3:
            terminal = p.v_min if d.role is Role.DECELERATE else p.v_max
            a.profile = CubicProfile.fit(v_prev, terminal, t, p.delta_t)
        a.snapshot = ModeEntrySnapshot(t_s=t, v_at_switch=v_prev, orbit=orbit, role=d.role,
                                       leader=leader, partner=d.partner, k_v=k_v)
        a.mode = target
        a.sub_key = None
        a.sub = None
        if target is not Q2:
            a.ifw = frozenset()
            a.leader = None
        self._log(t, i, "switch", frm, target, d.reset_kind)

    def _commit(self, decisions: List[Optional[_Decision]], t: float, S):
        n = self.n
        done = [False] * n
        new_mode_orbit: Dict[int, OrbitSpec] = {}
        left_formation: List[int] = []
        joined: List[Tuple[int, FrozenSet[int]]] = []
        for i in range(n):
            if done[i]:
                continue
            d = decisions[i]
            if d is None:
                continue
            done[i] = True
            if d.target is None:
                self.agents[i].assigned = d.new_assigned
                self._log(t, i, "reset", self.agents[i].mode, self.agents[i].mode, d.reset_kind)
                continue
            j = d.partner
            if d.target is Q1:
                if done[j] and j in new_mode_orbit and new_mode_orbit[j] != d.orbit:
                    base = new_mode_orbit[j]
                    existing = [o for o in new_mode_orbit.values()] + [
                        a.orbit for a in self.agents if a.orbit is not None]
                    r = max(o.radius for o in existing if o.center == base.center)
                    d.orbit = OrbitSpec(base.center, r + 2.0 * self.params.d_m)
                new_mode_orbit[i] = d.orbit
                if self.agents[i].mode is Q2:
                    left_formation.append(i)
                self._enter(i, Q1, d, t, S)
                if not done[j] and self.agents[j].mode is Q4:
                    done[j] = True
                    pd = decisions[j]
                    reset = {}
                    if pd is not None and pd.target is None:
                        reset = dict(reset_kind=pd.reset_kind, new_assigned=pd.new_assigned)
                    new_mode_orbit[j] = d.orbit
                    self._enter(j, Q1, _Decision(Q1, partner=i, orbit=d.orbit, **reset), t, S)
                continue
            if d.target is Q3:
                self._enter(i, Q3, d, t, S)
                if not done[j] and self.agents[j].mode is Q4:
                    done[j] = True
                    role = Role.ACCELERATE if d.role is Role.DECELERATE else Role.DECELERATE
                    self._enter(j, Q3, _Decision(Q3, partner=i, role=role), t, S)
                continue
            if d.target is Q2:
                joined.append((i, d.formation))
                self._enter(i, Q2, d, t, S)
                continue
            if self.agents[i].mode is Q2:
                left_formation.append(i)
            self._enter(i, d.target, d, t, S)
        if joined or left_formation:
            self._update_formations(joined, left_formation)

    def _update_formations(self, joined, left):
        gone = {self.ids[i] for i in left}
        parent: Dict[int, int] = {}

        def find(u):
            while parent.setdefault(u, u) != u:
                parent[u] = parent[parent[u]]
                u = parent[u]
            return u

        in_q2 = {a.id for a in self.agents if a.mode is Q2}
        groups = [set(a.ifw) | {a.id} for a in self.agents if a.mode is Q2]
        groups += [set(f) for _, f in joined]
        for g in groups:
            g &= in_q2
            g -= gone
            members = sorted(g)
            for m in members[1:]:
                parent[find(m)] = find(members[0])
        comps: Dict[int, set] = {}
        for ident in in_q2 - gone:
            comps.setdefault(find(ident), set()).add(ident)
        for a in self.agents:
            if a.mode is Q2:
                a.ifw = frozenset(comps[find(a.id)])

    # -- control -------------------------------------------------------------

    def _control(self, i, t, S, leaders: Dict[int, int]):
        a = self.agents[i]
        p, g = self.params, self.gains
        x, y, th = S[0][i], S[1][i], S[2][i]
        snap = a.snapshot
        mode = a.mode
        if mode is Q4:
            return goal_law(x, y, th, a.assigned, snap.v_at_switch, g.k_w4, p)
        if mode is Q5:
            return orbit_law(x, y, th, snap.orbit, snap.k_v, g.k_w5, p, a.profile, t)
        if mode is Q1:
            return orbit_law(x, y, th, snap.orbit, snap.k_v, g.k_w1, p)
        if mode is Q3:
            return changeu_law(a.profile, t)
        lead = leaders[i]
        a.leader = self.ids[lead]
        if lead == i:
            return self._leader_control(i, t, S)
        a.sub_key = None
        a.sub = None
        vs = S[3]
        prof = a.profile
        if prof is None:
            prof = CubicProfile.fit(vs[i], vs[lead], t, p.delta_t)
        elif prof.phase(t) >= 1.0 - 1e-9:
            prof = CubicProfile.fit(prof.value(t), vs[lead], t, p.delta_t)
        a.profile = prof
        return follow_law(th, prof, t, S[2][lead], S[4][lead], g.k_w2, p)

    def _leader_control(self, i, t, S):
        """Formation leader: resolve external conflicts with a Go-Round or
        Change-U manoeuvre, otherwise head for the assigned goal."""
        a = self.agents[i]
        p, g = self.params, self.gains
        x, y, th = S[0][i], S[1][i], S[2][i]
        external = sorted(self.nbrs[i] - {self.ids.index(m) for m in a.ifw},
                          key=lambda j: self.ids[j])
        if external:
            k = external[0]
            b = self.agents[k]
            if angular_separation(th, S[2][k]) >= p.theta_c or b.at_obstacle:
                key = ("round", b.id)
            else:
                key = ("changeu", b.id)
        else:
            key = ("goal",)
        if key != a.sub_key:
            v_prev = S[3][i]
            orbit = role = None
            kv = 0.0
            if key[0] == "round":
                orbit = self._orbit_against(i, k, S)
                kv = orbit_speed_gain((x, y), orbit, v_prev)
            elif key[0] == "changeu":
                dec, _ = self._roles(i, k, S)
                role = Role.DECELERATE if dec == i else Role.ACCELERATE
                terminal = p.v_min if role is Role.DECELERATE else p.v_max
                a.profile = CubicProfile.fit(v_prev, terminal, t, p.delta_t)
            a.sub = ModeEntrySnapshot(t_s=t, v_at_switch=v_prev, orbit=orbit, role=role,
                                      partner=self.ids[k] if external else None, k_v=kv)
            if a.sub_key is not None:
                self._log(t, i, "leader", Q2, Q2, key[0])
            a.sub_key = key
        sub = a.sub
        if key[0] == "round":
            return orbit_law(x, y, th, sub.orbit, sub.k_v, g.k_w1, p)
        if key[0] == "changeu":
            return changeu_law(a.profile, t)
        return goal_law(x, y, th, a.assigned, sub.v_at_switch, g.k_w4, p)

    # -- tick ----------------------------------------------------------------

    def start(self):
        """Enter Go-towards-Goal from the initial condition (tick 0)."""
        S = self._frozen()
        for i, a in enumerate(self.agents):
            self._enter(i, Q4, _Decision(Q4), 0.0, S)

    def _frozen(self):
        return (self.x.tolist(), self.y.tolist(), self.th.tolist(),
                self.v.tolist(), self.w.tolist())

    def tick(self, integrate: bool = True) -> None:
        """Decide, control, record row ``k`` and integrate to ``k + 1``."""
        if self.k == 0 and self.agents and self.agents[0].mode is Mode.INIT:
            self.start()
        p = self.params
        t = self.k * self.dt
        S = self._frozen()
        pairs, _, _, _ = kernels.close_pairs(self.x, self.y, p.R_c)
        nbrs = [set() for _ in range(self.n)]
        for i, j, _ in pairs:
            nbrs[i].add(j)
            nbrs[j].add(i)
        self.nbrs = nbrs
        for i, a in enumerate(self.agents):
            a.icw = frozenset(self.ids[j] for j in nbrs[i])

        decisions = [self._decide(i, S) for i in range(self.n)]
        if any(d is not None for d in decisions):
            self._commit(decisions, t, S)

        leaders: Dict[int, int] = {}
        for i, a in enumerate(self.agents):
            if a.mode is Q2 and i not in leaders:
                members = self._formation_indices(i)
                lead = self._leader_index(members, S) if members else i
                for m in members:
                    leaders[m] = lead
                leaders.setdefault(i, lead)

        V = self.v
        W = self.w
        VD = self.vd
        tr = self.trace
        row = self.k
        for i in range(self.n):
            v, w, vdot, degenerate = self._control(i, t, S, leaders)
            if degenerate:
                v, w, vdot = S[3][i], S[4][i], 0.0
                tr.degenerate.append((row, self.ids[i]))
            if not (p.v_min <= v <= p.v_max and abs(w) <= p.omega_max):
                tr.bound_violations.append((row, self.ids[i], v, w))
            V[i] = v
            W[i] = w
            VD[i] = vdot
        tr.x[row] = self.x
        tr.y[row] = self.y
        tr.theta[row] = self.th
        tr.v[row] = V
        tr.omega[row] = W
        tr.vdot[row] = VD
        tr.mode[row] = [int(a.mode) for a in self.agents]
        tr.gx[row] = [a.assigned[0] for a in self.agents]
        tr.gy[row] = [a.assigned[1] for a in self.agents]
        tr.n_rows = row + 1
        if integrate:
            self.px, self.py = S[0], S[1]
            kernels.rk4_batch(self.x, self.y, self.th, V, W, self.dt)
            self.k += 1

    def run(self, horizon: int) -> Trace:
        """Run ``horizon`` integration steps, recording ``horizon + 1`` rows."""
        self.trace.reserve(self.k + horizon + 1)
        for _ in range(horizon):
            self.tick()
        self.tick(integrate=False)
        return self.trace.trim()

"""Post-hoc runtime verification over a recorded :class:`~hybridcr.protocol.Trace`.

Every check is a pure function of the trace (and parameters), so the same
trace always yields the same report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .dynamics import Params
from .protocol import Mode, Trace

JUMP_TOL = 1e-9
RATE_SLACK = 1e-6


@dataclass
class SafetyResult:
    passed: bool
    min_distance: float
    time: float
    pair: Tuple[int, int]
    tolerance: float
    series: np.ndarray = field(repr=False)
    first_violation: Optional[Tuple[float, int, int]] = None


@dataclass
class BoundsResult:
    passed: bool
    violations: List[Tuple[float, int, float, float]]


@dataclass
class SmoothnessResult:
    passed: bool
    max_switch_jump: float
    switch_jumps: List[Tuple[float, int, float]]
    rate_violations: List[Tuple[float, int, float, float]]
    omega_jumps: Dict[int, int]
    switch_counts: Dict[int, int]


@dataclass
class ZenoResult:
    passed: bool
    switch_counts: Dict[int, int]
    min_dwell: Dict[int, float]
    max_dwell: Dict[int, float]
    offenders: List[str]


@dataclass
class ConvergenceResult:
    passed: bool
    times: Dict[int, Optional[float]]
    unconverged: Dict[int, dict]


@dataclass
class ExcursionResult:
    passed: bool
    max_excursion: Dict[int, float]
    bound: Dict[int, float]


@dataclass
class MonitorReport:
    safety: Optional[SafetyResult] = None
    bounds: Optional[BoundsResult] = None
    smoothness: Optional[SmoothnessResult] = None
    zeno: Optional[ZenoResult] = None
    convergence: Optional[ConvergenceResult] = None
    excursion: Optional[ExcursionResult] = None

    @property
    def verdicts(self) -> Dict[str, bool]:
        out = {}
        for name in ("safety", "bounds", "smoothness", "zeno", "convergence", "excursion"):
            res = getattr(self, name)
            if res is not None:
                out[name] = bool(res.passed)
        return out

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def first_failure(self) -> Optional[str]:
        for name, ok in self.verdicts.items():
            if not ok:
                return name
        return None


def _switch_ticks(trace: Trace) -> Dict[int, List[int]]:
    """Tick indices of every mode switch per agent index (initial entry included)."""
    index = {ident: k for k, ident in enumerate(trace.ids)}
    out: Dict[int, List[int]] = {k: [] for k in range(len(trace.ids))}
    for e in trace.events:
        if e.kind == "switch":
            out[index[e.id]].append(e.tick)
    return out


def _discontinuity_ticks(trace: Trace) -> Dict[int, set]:
    """Ticks where a control law is re-initialised: switches, resets and
    leader sub-behaviour changes."""
    index = {ident: k for k, ident in enumerate(trace.ids)}
    out: Dict[int, set] = {k: set() for k in range(len(trace.ids))}
    for e in trace.events:
        out[index[e.id]].add(e.tick)
    return out


def check_safety(trace: Trace, params: Params, tol_d: Optional[float] = None) -> SafetyResult:
    """Minimum pairwise distance against ``d_m - tol_d``.

    ``tol_d`` defaults to ``2 v_max dt``, one tick of worst-case closing.
    """
    if tol_d is None:
        tol_d = 2.0 * params.v_max * trace.dt
    n_rows = trace.n_rows
    if len(trace.ids) < 2 or n_rows == 0:
        return SafetyResult(True, math.inf, 0.0, (-1, -1), tol_d, np.full(n_rows, np.inf))
    dmin, imin, jmin = kernels.min_distance_series(trace.x, trace.y)
    k = int(np.argmin(dmin))
    pair = (trace.ids[int(imin[k])], trace.ids[int(jmin[k])])
    limit = params.d_m - tol_d
    bad = np.nonzero(dmin < limit)[0]
    first = None
    if bad.size:
        b = int(bad[0])
        first = (b * trace.dt, trace.ids[int(imin[b])], trace.ids[int(jmin[b])])
    return SafetyResult(bad.size == 0, float(dmin[k]), k * trace.dt, pair, tol_d,
                        np.asarray(dmin), first)


def check_bounds(trace: Trace, params: Params) -> BoundsResult:
    """Exact input-bound check on the recorded (post-saturation) inputs."""
    v, w = trace.v, trace.omega
    bad = (v < params.v_min) | (v > params.v_max) | (np.abs(w) > params.omega_max)
    rows, cols = np.nonzero(bad)
    out = [(r * trace.dt, trace.ids[c], float(v[r, c]), float(w[r, c]))
           for r, c in zip(rows.tolist(), cols.tolist())]
    return BoundsResult(not out, out)


def check_smoothness(trace: Trace, omega_jump_tol: float = 0.1,
                     jump_tol: float = JUMP_TOL) -> SmoothnessResult:
    """Speed continuity at switches and rate-bounded speed between them."""
    dt = trace.dt
    sw = _switch_ticks(trace)
    disc = _discontinuity_ticks(trace)
    jumps, rate_bad = [], []
    omega_jumps, counts = {}, {}
    n_rows = trace.n_rows
    for a, ident in enumerate(trace.ids):
        ticks = [k for k in sw[a] if 0 < k < n_rows]
        counts[ident] = len(sw[a])
        v = trace.v[:, a]
        vd = np.abs(trace.vdot[:, a])
        for k in ticks:
            jumps.append((k * dt, ident, abs(float(v[k] - v[k - 1]))))
        # Segment boundaries are the rows where a law was re-initialised.
        cuts = sorted({0, n_rows} | {k for k in disc[a] if 0 < k < n_rows})
        dv = np.abs(np.diff(v))
        for s, e in zip(cuts[:-1], cuts[1:]):
            if e - s < 2:
                continue
            # The speed is held over each tick while the recorded rate uses the
            # freshly updated speed, so allow one tick of relative mismatch.
            rate = float(vd[s:e].max())
            held = rate * dt / max(float(v[s:e].min()), 1e-12)
            bound = rate * dt * (1.0 + held + RATE_SLACK) + 1e-12
            seg = dv[s:e - 1]
            over = np.nonzero(seg > bound)[0]
            for o in over.tolist():
                rate_bad.append(((s + o + 1) * dt, ident, float(seg[o]), bound))
        dw = np.abs(np.diff(trace.omega[:, a]))
        omega_jumps[ident] = int(np.count_nonzero(dw > omega_jump_tol))
    max_jump = max((j for _, _, j in jumps), default=0.0)
    allow = {trace.ids[a]: len(disc[a]) for a in range(len(trace.ids))}
    passed = (max_jump <= jump_tol and not rate_bad
              and all(omega_jumps[i] <= allow[i] for i in trace.ids))
    return SmoothnessResult(passed, max_jump, jumps, rate_bad, omega_jumps, counts)


def check_no_zeno(trace: Trace, min_dwell: Optional[float] = None,
                  max_switches: int = 200) -> ZenoResult:
    """Dwell time between consecutive switches and total switch count per agent."""
    dt = trace.dt
    if min_dwell is None:
        min_dwell = 2.0 * dt
    sw = _switch_ticks(trace)
    end = max(trace.n_rows - 1, 0)
    counts, mins, maxs, offenders = {}, {}, {}, []
    for a, ident in enumerate(trace.ids):
        ticks = sw[a]
        counts[ident] = len(ticks)
        gaps = [(b - c) * dt for c, b in zip(ticks[:-1], ticks[1:])]
        mins[ident] = min(gaps) if gaps else math.inf
        tail = (end - ticks[-1]) * dt if ticks else end * dt
        maxs[ident] = max(gaps + [tail])
        if gaps and mins[ident] < min_dwell - 1e-9:
            offenders.append(f"agent {ident}: dwell {mins[ident]:.6g} < {min_dwell:.6g}")
        if len(ticks) > max_switches:
            offenders.append(f"agent {ident}: {len(ticks)} switches > {max_switches}")
    return ZenoResult(not offenders, counts, mins, maxs, offenders)


def check_convergence(trace: Trace, params: Params, tol_r: Optional[float] = None,
                      deadline: Optional[float] = None) -> ConvergenceResult:
    """First time after which each agent loiters at its actual goal for good."""
    if tol_r is None:
        tol_r = 0.05 * params.r_c
    times: Dict[int, Optional[float]] = {}
    missing: Dict[int, dict] = {}
    n = trace.n_rows
    for a, ident in enumerate(trace.ids):
        gx, gy = trace.goals[a]
        if n == 0:
            times[ident] = None
            missing[ident] = {"reason": "empty trace"}
            continue
        dist = np.hypot(trace.x[:, a] - gx, trace.y[:, a] - gy)
        ok = ((trace.mode[:, a] == int(Mode.LOITER)) & (trace.gx[:, a] == gx)
              & (trace.gy[:, a] == gy) & (np.abs(dist - params.r_c) <= tol_r))
        if not ok[-1]:
            times[ident] = None
            missing[ident] = {"last_mode": int(trace.mode[-1, a]),
                              "assigned": (float(trace.gx[-1, a]), float(trace.gy[-1, a])),
                              "distance_to_goal": float(dist[-1])}
            continue
        bad = np.nonzero(~ok)[0]
        first = int(bad[-1]) + 1 if bad.size else 0
        times[ident] = first * trace.dt
        if deadline is not None and times[ident] > deadline:
            missing[ident] = {"reason": f"converged at {times[ident]:.6g} after deadline"}
    return ConvergenceResult(not missing, times, missing)


def check_excursion(trace: Trace, params: Params) -> ExcursionResult:
    """Trace-level form of the liveness boundedness argument.

    Each agent's largest distance from its goal must not exceed its initial
    distance plus (switches x longest dwell x v_max).
    """
    zeno = check_no_zeno(trace)
    exc, bound = {}, {}
    ok = True
    for a, ident in enumerate(trace.ids):
        gx, gy = trace.goals[a]
        if trace.n_rows == 0:
            exc[ident] = bound[ident] = 0.0
            continue
        d = np.hypot(trace.x[:, a] - gx, trace.y[:, a] - gy)
        exc[ident] = float(d.max())
        bound[ident] = float(d[0]) + zeno.switch_counts[ident] * zeno.max_dwell[ident] * params.v_max
        ok = ok and exc[ident] <= bound[ident] + 1e-9
    return ExcursionResult(ok, exc, bound)


ALL_MONITORS = ("safety", "bounds", "smoothness", "zeno", "convergence", "excursion")


def run_monitors(trace: Trace, params: Params, monitors: Sequence[str] = ALL_MONITORS,
                 deadline: Optional[float] = None) -> MonitorReport:
    unknown = set(monitors) - set(ALL_MONITORS)
    if unknown:
        raise ValueError(f"unknown monitors: {sorted(unknown)}")
    rep = MonitorReport()
    if "safety" in monitors:
        rep.safety = check_safety(trace, params)
    if "bounds" in monitors:
        rep.bounds = check_bounds(trace, params)
    if "smoothness" in monitors:
        rep.smoothness = check_smoothness(trace)
    if "zeno" in monitors:
        rep.zeno = check_no_zeno(trace)
    if "convergence" in monitors:
        rep.convergence = check_convergence(trace, params, deadline=deadline)
    if "excursion" in monitors:
        rep.excursion = check_excursion(trace, params)
    return rep

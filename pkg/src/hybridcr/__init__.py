"""Decentralised conflict resolution for input-constrained unicycle agents.

A five-mode hybrid automaton per agent (Go-Round, Follow-Leader, Change-U,
Go-towards-Goal, Loiter) with guard/reset switching, temporary goal
reassignment, runtime safety monitors and a fixed-step simulator.
"""

from . import kernels
from .controllers import CubicProfile, GainSet, OrbitSpec, Role, default_gains, solve_cubic
from .dynamics import (
    AgentState,
    ControlInput,
    InfeasibleParams,
    NegativeDiscriminant,
    Params,
    critical_angle,
    derive_params,
    feasibility_checks,
    reference_params,
    step,
)
from .monitor import MonitorReport, run_monitors
from .protocol import AssumptionViolation, Event, Mode, Trace, World
from .scenario_io import Scenario, ScenarioError, builtin_scenario, load_scenario

__version__ = "0.1.0"

__all__ = [
    "AgentState",
    "AssumptionViolation",
    "ControlInput",
    "CubicProfile",
    "Event",
    "GainSet",
    "InfeasibleParams",
    "Mode",
    "MonitorReport",
    "NegativeDiscriminant",
    "OrbitSpec",
    "Params",
    "Role",
    "Scenario",
    "ScenarioError",
    "Trace",
    "World",
    "builtin_scenario",
    "critical_angle",
    "default_gains",
    "derive_params",
    "feasibility_checks",
    "kernels",
    "load_scenario",
    "reference_params",
    "run_monitors",
    "solve_cubic",
    "step",
]

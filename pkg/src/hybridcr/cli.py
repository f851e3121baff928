"""Command-line front end.

Subcommands: ``run`` a scenario and write its files, ``validate-params``,
``bench`` the execution time against the number of agents, and ``gen`` a
random scenario file.  ``run`` exits 0 exactly when every enabled monitor
passes.
"""

from __future__ import annotations

import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import click

from . import kernels
from .dynamics import feasibility_checks
from .monitor import ALL_MONITORS, run_monitors
from .protocol import AssumptionViolation
from .scenario_io import (
    DEFAULT_BOX,
    DEFAULT_HORIZON,
    REFERENCE_BASE,
    Scenario,
    ScenarioError,
    dump_scenario,
    generate_random_scenario,
    load_scenario,
    summary_document,
    write_events,
    write_plot_data,
    write_report,
    write_trace,
)
from .dynamics import DEFAULT_DT, derive_params

EXIT_MONITOR_FAILED = 1


@dataclass
class RunConfig:
    source: str
    seed: Optional[int] = None
    dt: Optional[float] = None
    horizon: Optional[int] = None
    out: Optional[Path] = None
    monitors: Tuple[str, ...] = ALL_MONITORS
    plots: bool = True

    def resolve(self) -> Scenario:
        """Load the scenario and apply overrides; validation happens on load."""
        scen = load_scenario(self.source, self.seed)
        changes = {}
        if self.dt is not None:
            changes["dt"] = self.dt
        if self.horizon is not None:
            changes["horizon"] = self.horizon
        if changes:
            scen = scen.replace(**changes)
        scen.world(horizon=0)
        return scen


@dataclass
class RunOutcome:
    scenario: Scenario
    report: object
    runtime: float
    files: List[Path] = field(default_factory=list)

    @property
    def exit_status(self) -> int:
        return exit_status(self.report.verdicts)


def exit_status(verdicts) -> int:
    return 0 if all(verdicts.values()) else EXIT_MONITOR_FAILED


def parse_monitors(text: Optional[str]) -> Tuple[str, ...]:
    if text is None or text.strip().lower() == "all":
        return ALL_MONITORS
    names = tuple(n.strip() for n in text.split(",") if n.strip())
    unknown = [n for n in names if n not in ALL_MONITORS]
    if unknown:
        raise click.BadParameter(
            f"unknown monitor(s) {', '.join(unknown)}; choose from {', '.join(ALL_MONITORS)}",
            param_hint="--monitors")
    return names


def parse_box(text: Optional[str]) -> Tuple[float, float, float, float]:
    """``L`` for the square ``[-L, L]^2`` or ``x0,x1,y0,y1``."""
    if text is None:
        return DEFAULT_BOX
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise click.BadParameter(f"cannot parse {text!r}", param_hint="--box")
    if len(vals) == 1:
        h = abs(vals[0])
        return (-h, h, -h, h)
    if len(vals) == 4:
        return tuple(vals)
    raise click.BadParameter("give one half-width or four values x0,x1,y0,y1",
                             param_hint="--box")


def _parse_ints(text: str, hint: str) -> List[int]:
    try:
        out = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}",
                                 param_hint=hint)
    if not out:
        raise click.BadParameter("empty list", param_hint=hint)
    return out


def execute(config: RunConfig) -> RunOutcome:
    """Simulate, run the monitors and, if ``config.out`` is set, write files."""
    scen = config.resolve()
    t0 = time.perf_counter()
    trace = scen.run()
    runtime = time.perf_counter() - t0
    report = run_monitors(trace, scen.params, config.monitors)
    outcome = RunOutcome(scen, report, runtime)
    if config.out is not None:
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        outcome.files.append(write_trace(trace, out / "trajectory.csv"))
        outcome.files.append(write_events(trace.events, out / "events.csv"))
        outcome.files.append(write_report(summary_document(scen, trace, report, runtime),
                                          out / "summary.yaml"))
        if config.plots:
            plot_dir = out / "plot"
            plot_dir.mkdir(exist_ok=True)
            outcome.files.extend(write_plot_data(trace, report, plot_dir))
    return outcome


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Hybrid conflict-resolution simulator for input-constrained unicycles."""


@main.command("run")
@click.argument("scenario_arg", required=False, metavar="[SCENARIO]")
@click.option("--scenario", "scenario_opt", help="Built-in name (table2, reassign3, random-N) or YAML path.")
@click.option("--seed", type=int, help="Override the scenario seed.")
@click.option("--dt", type=float, help="Override the time step.")
@click.option("--horizon", type=int, help="Override the number of steps.")
@click.option("--out", type=click.Path(file_okay=False), help="Output directory.")
@click.option("--monitors", help="Comma-separated monitors to enable, or 'all'.")
@click.option("--no-plots", is_flag=True, help="Skip the plot data files.")
def cmd_run(scenario_arg, scenario_opt, seed, dt, horizon, out, monitors, no_plots):
    """Run a scenario; exit status reflects the monitor verdicts."""
    source = scenario_opt or scenario_arg
    if source is None:
        raise click.UsageError("a scenario is required (positional or --scenario)")
    if scenario_opt and scenario_arg and scenario_opt != scenario_arg:
        raise click.UsageError("give the scenario once, positionally or with --scenario")
    if dt is not None and not (dt > 0.0 and math.isfinite(dt)):
        raise click.BadParameter("must be positive", param_hint="--dt")
    if horizon is not None and horizon < 0:
        raise click.BadParameter("must be non-negative", param_hint="--horizon")
    config = RunConfig(source, seed, dt, horizon,
                       Path(out) if out else Path("runs") / Path(source).stem,
                       parse_monitors(monitors), not no_plots)
    try:
        outcome = execute(config)
    except (ScenarioError, AssumptionViolation) as exc:
        raise click.UsageError(str(exc))
    scen, report = outcome.scenario, outcome.report
    click.echo(f"scenario {scen.name}: {len(scen.agents)} agents, "
               f"{scen.horizon} steps at dt={scen.dt} in {outcome.runtime:.2f} s "
               f"[{kernels.BACKEND} kernels]")
    for name, ok in report.verdicts.items():
        click.echo(f"  {name:<12} {'pass' if ok else 'FAIL'}")
    if report.safety is not None:
        s = report.safety
        click.echo(f"  min distance {s.min_distance:.6g} at t={s.time:.2f} between {s.pair}")
    click.echo(f"wrote {len(outcome.files)} files to {config.out}")
    status = outcome.exit_status
    if status:
        click.echo(f"monitor failed: {report.first_failure()}", err=True)
    sys.exit(status)


@main.command("validate-params")
@click.option("--v-min", type=float, default=REFERENCE_BASE["v_min"], show_default=True)
@click.option("--v-max", type=float, default=REFERENCE_BASE["v_max"], show_default=True)
@click.option("--omega-max", type=float, default=REFERENCE_BASE["omega_max"], show_default=True)
@click.option("--d-m", type=float, default=REFERENCE_BASE["d_m"], show_default=True)
@click.option("--R-c", "R_c", type=float, default=REFERENCE_BASE["R_c"], show_default=True,
              help="Sensing radius; pass a negative value to use its lower bound.")
@click.option("--delta-t", type=float, default=1.0, show_default=True,
              help="Speed-change duration.")
@click.option("--gain-margin", "Delta", type=float, default=None,
              help="Turn-rate margin reserved by the gain envelopes.")
@click.option("--delta", type=float, default=0.05, show_default=True,
              help="Line-of-sight tolerance.")
@click.option("--epsilon", type=float, default=0.01, show_default=True)
def cmd_validate_params(v_min, v_max, omega_max, d_m, R_c, delta_t, Delta, delta, epsilon):
    """Print derived quantities and every feasibility inequality."""
    checks, derived = feasibility_checks(v_min, v_max, omega_max, d_m, delta_t, Delta,
                                         delta, epsilon, None if R_c < 0 else R_c)
    for key in ("r_c", "r_min", "R_c", "theta_c"):
        val = derived.get(key)
        click.echo(f"{key:<8} {'n/a' if val is None else format(val, '.6f')}")
    for c in checks:
        click.echo(f"[{'pass' if c.ok else 'FAIL'}] {c.name}: {c.detail}")


def _bench_one(task):
    n, seed, horizon, dt, box = task
    scen = generate_random_scenario(n, seed, derive_params(**REFERENCE_BASE), box, horizon, dt)
    t0 = time.perf_counter()
    scen.run()
    return n, seed, time.perf_counter() - t0


def bench_table(ns: Sequence[int], seeds: Sequence[int], horizon: int = DEFAULT_HORIZON,
                dt: float = DEFAULT_DT, box=DEFAULT_BOX, parallel: bool = False):
    """Rows of ``(N, T, T/N)`` with ``T`` the mean wall time over seeds."""
    tasks = [(n, s, horizon, dt, box) for n in ns for s in seeds]
    if parallel:
        with ProcessPoolExecutor() as pool:
            results = list(pool.map(_bench_one, tasks))
    else:
        results = []
        for task in tasks:
            try:
                results.append(_bench_one(task))
            except Exception as exc:
                raise RuntimeError(f"bench run n={task[0]} seed={task[1]} failed: {exc}") from exc
    rows = []
    for n in ns:
        times = [t for (m, _, t) in results if m == n]
        mean = sum(times) / len(times)
        rows.append((n, mean, mean / n))
    return rows


@main.command("bench")
@click.option("--n", "n_list", default="1,5,10", show_default=True,
              help="Comma-separated agent counts.")
@click.option("--seeds", default="1", show_default=True, help="Comma-separated seeds.")
@click.option("--seed", type=int, help="Single seed (overrides --seeds).")
@click.option("--horizon", type=int, default=DEFAULT_HORIZON, show_default=True)
@click.option("--dt", type=float, default=DEFAULT_DT, show_default=True)
@click.option("--box", help="Half-width L or x0,x1,y0,y1.")
@click.option("--parallel", is_flag=True,
              help="Run scenarios in worker processes (timings no longer comparable).")
def cmd_bench(n_list, seeds, seed, horizon, dt, box, parallel):
    """Execution time against the number of agents."""
    ns = _parse_ints(n_list, "--n")
    seed_list = [seed] if seed is not None else _parse_ints(seeds, "--seeds")
    try:
        rows = bench_table(ns, seed_list, horizon, dt, parse_box(box), parallel)
    except (RuntimeError, ScenarioError, AssumptionViolation) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"{horizon} steps, dt={dt}, seeds {seed_list}, {kernels.BACKEND} kernels")
    click.echo(f"{'N':>5} {'T (s)':>10} {'T/N (s)':>10}")
    for n, t, tn in rows:
        click.echo(f"{n:>5} {t:>10.3f} {tn:>10.3f}")


@main.command("gen")
@click.option("--n", "n", type=int, required=True, help="Number of agents.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--box", help="Half-width L or x0,x1,y0,y1.")
@click.option("--horizon", type=int, default=DEFAULT_HORIZON, show_default=True)
@click.option("--dt", type=float, default=DEFAULT_DT, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Output YAML file (stdout if omitted).")
def cmd_gen(n, seed, box, horizon, dt, out):
    """Write a random scenario satisfying both spacing assumptions."""
    if n < 1:
        raise click.BadParameter("must be at least 1", param_hint="--n")
    try:
        scen = generate_random_scenario(n, seed, derive_params(**REFERENCE_BASE),
                                        parse_box(box), horizon, dt)
    except (ScenarioError, ValueError) as exc:
        raise click.ClickException(str(exc))
    text = dump_scenario(scen, out)
    if out is None:
        click.echo(text, nl=False)
    else:
        click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()

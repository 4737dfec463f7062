"""Rolling-horizon loop: assemble a window, solve it, commit the first steps, roll forward."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .assembly import WindowHandles, accounting_objective, assemble, initial_boundary, slack_used
from .devices import DeviceBoundary, flow_alias
from .kpi import SimulationResult
from .model import (
    ConfigurationError,
    EnergySystemModel,
    Profile,
    SimulationConfig,
    forecast_view,
    validate_model,
)
from .problem import AssemblyError, HighsBackend, PlanningProblem, Solution, SolverBackend, SolverError

__all__ = [
    "SimulationState",
    "commit_window",
    "default_span",
    "forecast_view",
    "roll_forward",
    "run_simulation",
    "window_starts",
]

DECIMALS = 9

ProgressHook = Callable[[int, int, str, float | None, float], None]


def _clean(v: float) -> float:
    """Round committed values so serialized output is reproducible; folds -0.0 into 0.0."""
    return round(float(v), DECIMALS) + 0.0


@dataclass
class SimulationState:
    t: int
    boundary: dict[str, DeviceBoundary]
    tables: dict[str, list[dict[str, float]]] = field(
        default_factory=lambda: {k: [] for k in SimulationResult.TABLES}
    )
    windows: list[dict] = field(default_factory=list)


def window_starts(n_steps: int, reopt_interval: int) -> list[int]:
    return list(range(0, n_steps, reopt_interval))


def default_span(model: EnergySystemModel, config: SimulationConfig, profiles: Mapping[str, Profile]) -> int:
    used = {d.profile for d in model.devices if d.profile is not None}
    if not used:
        raise ConfigurationError("no profile decides the span; pass the number of steps explicitly")
    return max(0, min(len(profiles[p]) for p in used) - config.horizon)


def step_values(problem: PlanningProblem, x: np.ndarray, k: int) -> dict[str, dict[str, float]]:
    """Column -> value for window-local step ``k``, grouped by result table."""
    h: WindowHandles = problem.handles
    flows, binaries, storage, edges, nodes, slack = {}, {}, {}, {}, {}, {}
    for dev_id, v in h.devices.items():
        for c, series in v.flow_in.items():
            flows[f"{dev_id}:{c}:in"] = series[k].value(x)
        for c, series in v.flow_out.items():
            flows[f"{dev_id}:{c}:out"] = series[k].value(x)
        if v.on is not None:
            for kind in ("on", "prep", "start", "stop"):
                binaries[f"{dev_id}:{kind}"] = getattr(v, kind)[k].value(x)
        if v.y_storage is not None:
            binaries[f"{dev_id}:y_storage"] = v.y_storage[k].value(x)
        if v.storage is not None:
            storage[f"{dev_id}:E"] = v.storage[k].value(x)
        if v.p_max is not None:
            storage[f"{dev_id}:p_max"] = v.p_max[k].value(x)
    for edge_id, ev in h.edges.items():
        edges[f"{edge_id}:q"] = ev.q[k].value(x)
        if ev.has_losses:
            edges[f"{edge_id}:loss_plus"] = ev.loss_plus[k].value(x)
            edges[f"{edge_id}:loss_minus"] = ev.loss_minus[k].value(x) if ev.loss_minus else 0.0
    for (node, carrier, terminal), per_step in h.pressure.created.items():
        if k in per_step:
            nodes[f"{node}:{carrier}:{terminal}:p"] = per_step[k].value(x)
    for node, series in h.theta.items():
        nodes[f"{node}:theta"] = series[k].value(x)
    for (node, carrier), series in h.slack_supply.items():
        slack[f"{node}:{carrier}:supply"] = series[k].value(x)
    for (node, carrier), series in h.slack_demand.items():
        slack[f"{node}:{carrier}:demand"] = series[k].value(x)
    if h.reserve_slack:
        slack["reserve"] = h.reserve_slack[k].value(x)
    if h.emission_slack:
        slack["emission"] = h.emission_slack[k].value(x)
    profiles = {pid: float(vals[k]) for pid, vals in h.profile_view.items()}
    out = {
        "flows": flows,
        "binaries": binaries,
        "storage": storage,
        "edges": edges,
        "nodes": nodes,
        "slack": slack,
        "profiles_used": profiles,
    }
    return {table: {col: _clean(v) for col, v in sorted(cols.items())} for table, cols in out.items()}


def commit_window(state: SimulationState, solution: Solution, n_commit: int) -> SimulationState:
    """Append the first ``n_commit`` steps of ``solution`` and carry the boundary forward."""
    problem = solution.problem
    if problem.t0 != state.t:
        raise AssemblyError(f"solution starts at step {problem.t0}, state is at step {state.t}")
    if not 1 <= n_commit <= problem.horizon:
        raise AssemblyError(f"cannot commit {n_commit} steps of a {problem.horizon}-step window")
    x = solution.x
    for k in range(n_commit):
        values = step_values(problem, x, k)
        for table, row in values.items():
            state.tables[table].append(row)
    last = n_commit - 1
    boundary = {}
    h: WindowHandles = problem.handles
    for dev_id, v in h.devices.items():
        spec = v.spec
        old = state.boundary[dev_id]
        b = replace(old, flow_prev=_clean(flow_alias(spec, v, last).value(x)))
        if v.on is not None:
            recent = tuple(int(round(v.start[k].value(x))) for k in range(last, -1, -1))
            b = replace(
                b,
                on_prev=int(round(v.on[last].value(x))),
                start_history=(recent + old.start_history)[: spec.startup_delay],
            )
        if v.storage is not None:
            b = replace(b, storage_prev=_clean(v.storage[last].value(x)))
        boundary[dev_id] = b
    return SimulationState(state.t + n_commit, boundary, state.tables, state.windows)


def run_simulation(
    model: EnergySystemModel,
    config: SimulationConfig,
    profiles: Mapping[str, Profile],
    n_steps: int | None = None,
    backend: SolverBackend | None = None,
    progress: ProgressHook | None = None,
) -> SimulationResult:
    diagnostics = validate_model(model, profiles)
    if diagnostics:
        raise ConfigurationError("; ".join(str(d) for d in diagnostics))
    state = roll_forward(model, config, profiles, n_steps, backend, progress)
    return SimulationResult.from_tables(state.tables, state.windows, config.timestep, model=model)


def roll_forward(
    model: EnergySystemModel,
    config: SimulationConfig,
    profiles: Mapping[str, Profile],
    n_steps: int | None = None,
    backend: SolverBackend | None = None,
    progress: ProgressHook | None = None,
) -> SimulationState:
    """Run the window loop over ``n_steps`` steps and return the final state."""
    if n_steps is None:
        n_steps = config.n_steps if config.n_steps is not None else default_span(model, config, profiles)
    backend = backend or HighsBackend(config.mip_gap, config.time_limit)
    state = SimulationState(0, initial_boundary(model))
    for w, t0 in enumerate(window_starts(n_steps, config.reopt_interval)):
        started = time.perf_counter()
        problem = assemble(model, config, profiles, state.boundary, t0)
        solution = backend.solve(problem)
        elapsed = time.perf_counter() - started
        if progress is not None:
            progress(w, t0, solution.status, solution.objective, elapsed)
        if not solution.ok:
            raise SolverError(solution, w)
        n_commit = min(config.reopt_interval, n_steps - t0)
        state.windows.append(
            {
                "window": w,
                "t0": t0,
                "status": solution.status,
                "objective": _clean(solution.objective),
                "accounted_objective": _clean(accounting_objective(problem, solution.x)),
                "max_violation": _clean(problem.max_violation(solution.x)),
                "slack_committed": _clean(slack_used(problem, solution.x, n_commit)),
                "n_vars": problem.n_vars,
                "n_binaries": int(sum(problem.binary)),
                "n_constraints": len(problem.constraints),
            }
        )
        state = commit_window(state, solution, n_commit)
    return state

"""Build one optimisation window: variables, objective and every constraint family."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .devices import (
    DeviceBoundary,
    DeviceVariables,
    WindowContext,
    create_device_variables,
    device_constraints,
    emission_rate,
    flow_alias,
    reserve_contribution,
    vname,
)
from .model import (
    EL,
    STORAGE_TYPES,
    EnergySystemModel,
    PenaltyCurve,
    Profile,
    SimulationConfig,
    carrier_name,
    device_carriers,
    forecast_view,
    is_gas_combusting,
)
from .network import (
    EdgeVariables,
    NetworkView,
    PressureRegistry,
    create_edge_variables,
    create_terminal_variables,
    darcy_linearized_constraints,
    dc_power_flow_constraints,
    edge_limit_constraints,
    loss_constraints,
    node_carriers,
    pressure_band_constraints,
    terminal_balance_constraints,
    weymouth_linearized_constraints,
)
from .problem import INF, AssemblyError, Constraint, LinExpr, PlanningProblem, quicksum

__all__ = [
    "DomainError",
    "PenaltyCurve",
    "WindowHandles",
    "accounting_objective",
    "assemble",
    "emission_rate_constraint",
    "evaluate_penalty",
    "initial_boundary",
    "reserve_constraint",
]

ELASTIC_COST = 1e4  # objective units per MW of slack per step


class DomainError(ValueError):
    """Flow outside the abscissa range of a penalty curve."""


def evaluate_penalty(curve: PenaltyCurve, flow: float, y_on: float = 0.0, y_prep: float = 0.0,
                     tol: float = 1e-9) -> float:
    xs, ys = curve.xs, curve.ys
    if flow < xs[0] - tol or flow > xs[-1] + tol:
        raise DomainError(f"flow {flow} outside penalty curve domain [{xs[0]}, {xs[-1]}]")
    value = float(np.interp(np.clip(flow, xs[0], xs[-1]), xs, ys))
    return value + curve.on_cost * y_on + curve.prep_cost * y_prep


def penalty_flow(spec, v: DeviceVariables, k: int) -> LinExpr:
    """The flow a penalty curve is evaluated on: ``f`` or ``<carrier>.<in|out>``."""
    what = spec.penalty.flow
    if what == "f":
        return flow_alias(spec, v, k)
    carrier, _, side = what.partition(".")
    carrier = carrier_name(carrier)
    flows = v.flow_in if side == "in" else v.flow_out
    if side not in ("in", "out") or carrier not in flows:
        raise AssemblyError(f"device {spec.id}: penalty flow {what!r} does not exist")
    return flows[carrier][k]


def encode_penalty(problem: PlanningProblem, spec, flow: LinExpr, t: int
                   ) -> tuple[LinExpr, list[Constraint]]:
    """Piecewise-linear penalty as an expression plus its defining constraints.

    Two-point curves are substituted directly; convex curves use a convex
    combination of breakpoints; anything else adds segment-selection binaries.
    """
    curve = spec.penalty
    xs, ys = curve.xs, curve.ys
    if len(xs) == 2:
        slope = (ys[1] - ys[0]) / (xs[1] - xs[0])
        pen = (flow - xs[0]) * slope + ys[0]
        return pen, [
            (flow >= xs[0]).named(vname("pen_dom_lo", spec.id, t)),
            (flow <= xs[1]).named(vname("pen_dom_hi", spec.id, t)),
        ]
    lam = [problem.add_var(vname("pen_lam", spec.id, i, t)) for i in range(len(xs))]
    cons = [
        (quicksum(lam) == 1).named(vname("pen_sum", spec.id, t)),
        (flow == quicksum(l * x for l, x in zip(lam, xs))).named(vname("pen_x", spec.id, t)),
    ]
    pen = quicksum(l * y for l, y in zip(lam, ys))
    if not curve.is_convex():
        n_seg = len(xs) - 1
        z = [problem.add_var(vname("pen_seg", spec.id, j, t), binary=True) for j in range(n_seg)]
        cons.append((quicksum(z) == 1).named(vname("pen_seg_sum", spec.id, t)))
        for i, l in enumerate(lam):
            adjacent = [z[j] for j in (i - 1, i) if 0 <= j < n_seg]
            cons.append((l <= quicksum(adjacent)).named(vname("pen_adj", spec.id, i, t)))
    return pen, cons


@dataclass
class WindowHandles:
    """Variable handles of one window, used to read and re-account a solution."""

    devices: dict[str, DeviceVariables]
    edges: dict[str, EdgeVariables]
    terminals: dict[tuple[str, str], list[LinExpr]]
    theta: dict[str, list[LinExpr]]
    pressure: PressureRegistry
    profile_view: dict[str, np.ndarray]
    penalty_flows: dict[str, list[LinExpr]] = field(default_factory=dict)
    tie_break: LinExpr = field(default_factory=LinExpr)
    slack_supply: dict[tuple[str, str], list[LinExpr]] = field(default_factory=dict)
    slack_demand: dict[tuple[str, str], list[LinExpr]] = field(default_factory=dict)
    reserve_slack: list[LinExpr] = field(default_factory=list)
    emission_slack: list[LinExpr] = field(default_factory=list)

    def slack_groups(self):
        yield from self.slack_supply.values()
        yield from self.slack_demand.values()
        yield self.reserve_slack
        yield self.emission_slack


def initial_boundary(model: EnergySystemModel) -> dict[str, DeviceBoundary]:
    """Boundary before step 0: devices on unless configured otherwise, storages half full."""
    out = {}
    for d in model.devices:
        on = 1 if d.initial_on is None else int(bool(d.initial_on))
        storage = None
        if d.type in STORAGE_TYPES:
            storage = d.initial_storage
            if storage is None:
                storage = 0.5 * float(d.param("E_max"))
        out[d.id] = DeviceBoundary(
            on_prev=on if d.start_stop else 1,
            start_history=(0,) * d.startup_delay if d.start_stop else (),
            flow_prev=d.initial_flow,
            storage_prev=storage,
        )
    return out


def check_boundary(model: EnergySystemModel, boundary: Mapping[str, DeviceBoundary]):
    for d in model.devices:
        if d.id not in boundary:
            raise AssemblyError(f"boundary state missing for device {d.id}")
        b = boundary[d.id]
        if not d.start_stop:
            continue
        ts = d.startup_delay
        if len(b.start_history) < ts:
            raise AssemblyError(
                f"device {d.id}: start history depth {len(b.start_history)} < startup delay {ts}"
            )
        pending = sum(b.start_history[:ts])
        if pending > 1:
            raise AssemblyError(f"device {d.id}: several starts within one preparation period")
        if pending and b.on_prev:
            raise AssemblyError(f"device {d.id}: marked online while a start is still in preparation")


def reserve_constraint(model: EnergySystemModel, devices: Mapping[str, DeviceVariables], k: int,
                       ctx: WindowContext, r_min: float, slack: LinExpr | None = None) -> Constraint:
    total = quicksum(reserve_contribution(d, devices[d.id], k, ctx) for d in model.devices)
    if slack is not None:
        total = total + slack
    return (total >= r_min).named(vname("reserve", ctx.t0 + k))


def emission_rate_constraint(model: EnergySystemModel, devices: Mapping[str, DeviceVariables], k: int,
                             ctx: WindowContext, cap: float, slack: LinExpr | None = None) -> Constraint:
    total = quicksum(emission_rate(d, devices[d.id], k, ctx) for d in model.devices)
    if slack is not None:
        total = total - slack
    return (total <= cap).named(vname("emission_cap", ctx.t0 + k))


def assemble(
    model: EnergySystemModel,
    config: SimulationConfig,
    profiles: Mapping[str, Profile],
    boundary_state: Mapping[str, DeviceBoundary] | None = None,
    t0: int = 0,
) -> PlanningProblem:
    horizon = config.horizon
    for d in model.devices:
        if d.start_stop and horizon < d.startup_delay + 1:
            raise AssemblyError(
                f"window of {horizon} steps is shorter than startup delay + 1 of device {d.id}"
            )
    boundary = dict(boundary_state) if boundary_state is not None else initial_boundary(model)
    check_boundary(model, boundary)
    used = {d.profile for d in model.devices if d.profile is not None}
    view = forecast_view({p: profiles[p] for p in sorted(used)}, t0, horizon, config.nowcast_window)

    problem = PlanningProblem(t0=t0, horizon=horizon, boundary=boundary)
    pressure = PressureRegistry(problem, t0)
    ctx = WindowContext(model, config, t0, horizon, view, pressure)

    devices = {
        d.id: create_device_variables(problem, d, t0, horizon, boundary[d.id]) for d in model.devices
    }
    edges = {e.id: create_edge_variables(problem, e, t0, horizon) for e in model.edges}
    terminals = create_terminal_variables(problem, model, t0, horizon)
    dc_nodes = sorted({n for e in model.edges if e.flow_model == "dc-power" for n in (e.from_node, e.to_node)})
    theta = {
        n: [problem.add_var(vname("theta", n, t), -INF, INF) for t in range(t0, t0 + horizon)]
        for n in dc_nodes
    }
    handles = WindowHandles(devices, edges, terminals, theta, pressure, view)
    problem.handles = handles

    net = NetworkView(model, devices, edges, terminals)
    if config.elastic:
        for n in model.nodes:
            if EL in node_carriers(model, n):
                steps = range(t0, t0 + horizon)
                handles.slack_supply[(n.id, EL)] = [problem.add_var(vname("slack_up", n.id, t)) for t in steps]
                handles.slack_demand[(n.id, EL)] = [problem.add_var(vname("slack_dn", n.id, t)) for t in steps]
        net.extra_supply = handles.slack_supply
        net.extra_demand = handles.slack_demand
        if config.reserve_min > 0:
            handles.reserve_slack = [problem.add_var(vname("slack_res", t)) for t in range(t0, t0 + horizon)]
        if config.emission_cap is not None:
            handles.emission_slack = [problem.add_var(vname("slack_co2", t)) for t in range(t0, t0 + horizon)]

    objective = LinExpr()
    ranks: dict[str, int] = {}
    for d in model.devices:
        v = devices[d.id]
        rank = ranks[d.type] = ranks.get(d.type, 0) + 1
        for k in range(horizon):
            t = t0 + k
            problem.add_all(device_constraints(d, v, k, ctx))
            if d.penalty is not None:
                flow = penalty_flow(d, v, k)
                handles.penalty_flows.setdefault(d.id, []).append(flow)
                pen, cons = encode_penalty(problem, d, flow, t)
                problem.add_all(cons)
                objective.iadd(pen)
                objective.iadd(v.on_at(k), d.penalty.on_cost)
                objective.iadd(v.prep_at(k), d.penalty.prep_cost)
            if d.start_stop:
                objective.iadd(v.start[k], d.start_cost)
                objective.iadd(v.stop[k], d.stop_cost)
            if config.tie_break and d.type == "gas_turbine":
                handles.tie_break.iadd(flow_alias(d, v, k), config.tie_break * rank)
        if v.delta_E is not None:
            objective.iadd(v.delta_E, d.storage_cost)

    for e in model.edges:
        ev = edges[e.id]
        for k in range(horizon):
            problem.add_all(edge_limit_constraints(e, ev, k, t0))
            problem.add_all(loss_constraints(e, ev, k, t0))
            if e.flow_model == "weymouth":
                problem.add_all(weymouth_linearized_constraints(model, e, ev, k, ctx))
            elif e.flow_model == "darcy":
                problem.add_all(darcy_linearized_constraints(model, e, ev, k, ctx))
            if config.tie_break and ev.has_losses:
                handles.tie_break.iadd(ev.loss(k), config.tie_break)
                handles.tie_break.iadd(ev.q_plus[k], config.tie_break)
                if ev.q_minus is not None:
                    handles.tie_break.iadd(ev.q_minus[k], config.tie_break)
    if theta:
        for k in range(horizon):
            problem.add_all(dc_power_flow_constraints(model, edges, theta, k, config.s_base, t0))

    for n in model.nodes:
        for c in node_carriers(model, n):
            for k in range(horizon):
                problem.add_all(terminal_balance_constraints(n, c, k, net, t0))

    # pressures exist only where some device or pipeline referenced them
    for (node_id, carrier, terminal), per_step in sorted(pressure.created.items()):
        node = model.node(node_id)
        for k, p in sorted(per_step.items()):
            problem.add_all(pressure_band_constraints(node, carrier, terminal, p, t0 + k))
    for (node_id, carrier), _ in sorted(terminals.items()):
        p_in = pressure.created.get((node_id, carrier, "in"), {})
        p_out = pressure.created.get((node_id, carrier, "out"), {})
        for k in sorted(set(p_in) & set(p_out)):
            problem.add((p_in[k] == p_out[k]).named(vname("p_merge", node_id, carrier, t0 + k)))

    has_el = any(EL in device_carriers(d)[0] + device_carriers(d)[1] for d in model.devices)
    for k in range(horizon):
        if config.reserve_min > 0 and has_el:
            slack = handles.reserve_slack[k] if handles.reserve_slack else None
            problem.add(reserve_constraint(model, devices, k, ctx, config.reserve_min, slack))
        if config.emission_cap is not None:
            slack = handles.emission_slack[k] if handles.emission_slack else None
            problem.add(emission_rate_constraint(model, devices, k, ctx, config.emission_cap, slack))

    objective.iadd(handles.tie_break)
    for series in handles.slack_groups():
        objective.iadd(quicksum(series), ELASTIC_COST)
    problem.objective = objective
    return problem


def accounting_objective(problem: PlanningProblem, x: np.ndarray) -> float:
    """Objective recomputed term by term from a solution, independent of the encoding."""
    h: WindowHandles = problem.handles
    model_devices = {v.spec.id: v for v in h.devices.values()}
    total = 0.0
    for dev_id, v in model_devices.items():
        spec = v.spec
        for k in range(v.horizon):
            on = v.on_at(k).value(x)
            prep = v.prep_at(k).value(x)
            if spec.penalty is not None:
                total += evaluate_penalty(spec.penalty, h.penalty_flows[dev_id][k].value(x), on, prep,
                                          tol=1e-6)
            if spec.start_stop:
                total += spec.start_cost * v.start[k].value(x) + spec.stop_cost * v.stop[k].value(x)
        if v.delta_E is not None:
            total += spec.storage_cost * v.delta_E.value(x)
    total += h.tie_break.value(x)
    for series in h.slack_groups():
        total += ELASTIC_COST * sum(s.value(x) for s in series)
    return total


def slack_used(problem: PlanningProblem, x: np.ndarray, k_max: int | None = None) -> float:
    """Total elastic slack (MW summed over steps) in the first ``k_max`` steps."""
    h: WindowHandles = problem.handles
    k_max = problem.horizon if k_max is None else k_max
    return sum(s.value(x) for series in h.slack_groups() for s in series[:k_max])


def gas_combusting_ids(model: EnergySystemModel) -> list[str]:
    return [d.id for d in model.devices if is_gas_combusting(d)]

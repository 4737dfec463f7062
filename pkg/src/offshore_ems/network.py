"""Node terminal balances, edge limits, losses, pressure bands and flow models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import physics
from .devices import DeviceVariables, WindowContext, vname
from .model import (
    EL,
    GAS,
    ConfigurationError,
    Edge,
    EnergySystemModel,
    Node,
    device_carriers,
    serial_carriers,
)
from .problem import INF, Constraint, LinExpr, PlanningProblem, quicksum


@dataclass
class EdgeVariables:
    edge: Edge
    q: list[LinExpr]
    q_plus: list[LinExpr] | None = None
    q_minus: list[LinExpr] | None = None
    loss_plus: list[LinExpr] | None = None
    loss_minus: list[LinExpr] | None = None
    lam_plus: list[list[LinExpr]] | None = None
    lam_minus: list[list[LinExpr]] | None = None

    @property
    def has_losses(self) -> bool:
        return self.q_plus is not None

    def q_from(self, k: int) -> LinExpr:
        """Flow leaving the from-end."""
        if self.loss_minus is None:
            return self.q[k]
        return self.q[k] + self.loss_minus[k]

    def q_to(self, k: int) -> LinExpr:
        """Flow arriving at the to-end."""
        if self.loss_plus is None:
            return self.q[k]
        return self.q[k] - self.loss_plus[k]

    def loss(self, k: int) -> LinExpr:
        if not self.has_losses:
            return LinExpr()
        total = self.loss_plus[k].copy()
        if self.loss_minus is not None:
            total.iadd(self.loss_minus[k])
        return total


def create_edge_variables(problem: PlanningProblem, edge: Edge, t0: int, horizon: int) -> EdgeVariables:
    steps = range(t0, t0 + horizon)
    ev = EdgeVariables(edge, [problem.add_var(vname("q", edge.id, t), -INF, INF) for t in steps])
    if edge.losses:
        xs = [p[0] for p in edge.losses]
        ev.q_plus = [problem.add_var(vname("q_plus", edge.id, t)) for t in steps]
        ev.loss_plus = [problem.add_var(vname("loss_plus", edge.id, t)) for t in steps]
        ev.lam_plus = [
            [problem.add_var(vname("lam_plus", edge.id, i, t)) for i in range(len(xs))] for t in steps
        ]
        if edge.is_bidirectional:
            ev.q_minus = [problem.add_var(vname("q_minus", edge.id, t)) for t in steps]
            ev.loss_minus = [problem.add_var(vname("loss_minus", edge.id, t)) for t in steps]
            ev.lam_minus = [
                [problem.add_var(vname("lam_minus", edge.id, i, t)) for i in range(len(xs))]
                for t in steps
            ]
    return ev


class PressureRegistry:
    """Lazily created pressure variables ``p(node,carrier,terminal,t)``."""

    def __init__(self, problem: PlanningProblem, t0: int):
        self.problem = problem
        self.t0 = t0
        self.created: dict[tuple[str, str, str], dict[int, LinExpr]] = {}

    def __call__(self, node: str, carrier: str, terminal: str, k: int) -> LinExpr:
        per_step = self.created.setdefault((node, carrier, terminal), {})
        if k not in per_step:
            per_step[k] = self.problem.add_var(vname("p", node, carrier, terminal, self.t0 + k))
        return per_step[k]


def node_carriers(model: EnergySystemModel, node: Node) -> list[str]:
    """Carriers with at least one device or edge attached at ``node`` (sorted)."""
    found = set()
    for d in model.devices_at(node.id):
        ins, outs = device_carriers(d)
        found.update(ins)
        found.update(outs)
    for e in model.edges:
        if node.id in (e.from_node, e.to_node):
            found.add(e.carrier)
    return sorted(found)


def is_bridged(model: EnergySystemModel, node_id: str, carrier: str) -> bool:
    """True when a device at the node carries ``carrier`` from the in- to the out-terminal."""
    return any(carrier in serial_carriers(d) for d in model.devices_at(node_id))


def create_terminal_variables(problem: PlanningProblem, model: EnergySystemModel, t0: int, horizon: int
                              ) -> dict[tuple[str, str], list[LinExpr]]:
    out = {}
    for node in model.nodes:
        for c in node_carriers(model, node):
            if not is_bridged(model, node.id, c):
                out[(node.id, c)] = [
                    problem.add_var(vname("q_term", node.id, c, t), -INF, INF)
                    for t in range(t0, t0 + horizon)
                ]
    return out


@dataclass
class NetworkView:
    """Everything a balance equation at one node needs to see."""

    model: EnergySystemModel
    devices: dict[str, DeviceVariables]
    edges: dict[str, EdgeVariables]
    terminals: dict[tuple[str, str], list[LinExpr]]
    # extra injections (+) into the out-terminal / withdrawals (+) from the in-terminal
    extra_supply: dict[tuple[str, str], list[LinExpr]] = field(default_factory=dict)
    extra_demand: dict[tuple[str, str], list[LinExpr]] = field(default_factory=dict)


def terminal_balance_constraints(node: Node, carrier: str, k: int, net: NetworkView, t0: int = 0
                                 ) -> list[Constraint]:
    """In-terminal: edge arrivals = device intake + merge flow.
    Out-terminal: edge departures = device output + merge flow."""
    model = net.model
    dev_in, dev_out = LinExpr(), LinExpr()
    has_in = has_out = False
    for d in model.devices_at(node.id):
        v = net.devices[d.id]
        if carrier in v.flow_in:
            dev_in.iadd(v.fin(carrier, k))
            has_in = True
        if carrier in v.flow_out:
            dev_out.iadd(v.fout(carrier, k))
            has_out = True
    arrive, depart = LinExpr(), LinExpr()
    for e in model.edges:
        if e.carrier != carrier:
            continue
        if e.to_node == node.id:
            arrive.iadd(net.edges[e.id].q_to(k))
            has_in = True
        if e.from_node == node.id:
            depart.iadd(net.edges[e.id].q_from(k))
            has_out = True
    key = (node.id, carrier)
    if key in net.extra_supply:
        dev_out.iadd(net.extra_supply[key][k])
    if key in net.extra_demand:
        dev_in.iadd(net.extra_demand[key][k])
    if not (has_in or has_out):
        return []
    term = net.terminals[key][k] if key in net.terminals else LinExpr()
    t = t0 + k
    return [
        (arrive - dev_in - term == 0).named(vname("bal_in", node.id, carrier, t)),
        (depart - dev_out - term == 0).named(vname("bal_out", node.id, carrier, t)),
    ]


def loss_constraints(edge: Edge, ev: EdgeVariables, k: int, t0: int = 0) -> list[Constraint]:
    """Directional split and convex-combination loss evaluation."""
    if not ev.has_losses:
        return []
    xs = [float(p[0]) for p in edge.losses]
    ys = [float(p[1]) for p in edge.losses]
    if any(y < 0 for y in ys):
        raise ConfigurationError(f"edge {edge.id}: loss table has negative losses")
    t = t0 + k
    split = ev.q_plus[k] - (ev.q_minus[k] if ev.q_minus is not None else 0.0)
    out = [(ev.q[k] == split).named(vname("q_split", edge.id, t))]
    for tag, q_dir, loss, lam in (
        ("plus", ev.q_plus, ev.loss_plus, ev.lam_plus),
        ("minus", ev.q_minus, ev.loss_minus, ev.lam_minus),
    ):
        if q_dir is None:
            continue
        lam_k = lam[k]
        out += [
            (quicksum(lam_k) == 1).named(vname(f"lam_sum_{tag}", edge.id, t)),
            (q_dir[k] == quicksum(l * x for l, x in zip(lam_k, xs))).named(
                vname(f"lam_q_{tag}", edge.id, t)),
            (loss[k] == quicksum(l * y for l, y in zip(lam_k, ys))).named(
                vname(f"lam_loss_{tag}", edge.id, t)),
        ]
    return out


def pressure_band_constraints(node: Node, carrier: str, terminal: str, p: LinExpr, t: int
                              ) -> list[Constraint]:
    delta = node.max_deviation.get(carrier)
    nominal = node.nominal_pressure(carrier, terminal)
    if delta is None or nominal is None:
        return []
    name = vname("p_band", node.id, carrier, terminal, t)
    if delta == 0:
        return [(p == nominal).named(name)]
    return [
        (p >= nominal * (1 - delta)).named(name + "_lo"),
        (p <= nominal * (1 + delta)).named(name + "_hi"),
    ]


def edge_limit_constraints(edge: Edge, ev: EdgeVariables, k: int, t0: int = 0) -> list[Constraint]:
    t = t0 + k
    q = ev.q[k]
    out = []
    if not edge.is_bidirectional:
        out.append((q >= 0).named(vname("q_dir", edge.id, t)))
    if edge.q_max is not None:
        out.append((q <= edge.q_max).named(vname("q_max", edge.id, t)))
        if edge.is_bidirectional:
            out.append((q >= -edge.q_max).named(vname("q_min", edge.id, t)))
    return out


def dc_reference_nodes(model: EnergySystemModel) -> list[str]:
    """One reference node per connected component of the dc-power edge graph."""
    dc_edges = [e for e in model.edges if e.flow_model == "dc-power"]
    parent: dict[str, str] = {}

    def find(a):
        while parent.setdefault(a, a) != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in dc_edges:
        parent[find(e.from_node)] = find(e.to_node)
    components: dict[str, list[str]] = {}
    for n in model.nodes:
        if n.id in parent:
            components.setdefault(find(n.id), []).append(n.id)
    flagged = {n.id for n in model.nodes if n.reference}
    refs = []
    for members in components.values():
        chosen = [m for m in members if m in flagged]
        if len(chosen) > 1:
            raise ConfigurationError(f"electric subnetwork {members} has several reference nodes")
        if not chosen and flagged:
            raise ConfigurationError(f"electric subnetwork {members} has no reference node")
        refs.append(chosen[0] if chosen else members[0])
    return refs


def dc_power_flow_constraints(model: EnergySystemModel, edges: dict[str, EdgeVariables],
                              theta: dict[str, list[LinExpr]], k: int, s_base: float, t0: int = 0
                              ) -> list[Constraint]:
    """Per-unit ``q = -(theta_from - theta_to) / x`` per dc-power edge and zero reference angles."""
    t = t0 + k
    out = []
    for e in model.edges:
        if e.flow_model != "dc-power":
            continue
        rhs = (theta[e.from_node][k] - theta[e.to_node][k]) * (-1.0 / e.reactance)
        out.append((edges[e.id].q[k] / s_base == rhs).named(vname("dcpf", e.id, t)))
    for ref in dc_reference_nodes(model):
        out.append((theta[ref][k] == 0).named(vname("theta_ref", ref, t)))
    return out


def weymouth_linearisation(model: EnergySystemModel, edge: Edge) -> physics.WeymouthLinearisation:
    gas = model.carrier(GAS)
    src, dst = model.node(edge.from_node), model.node(edge.to_node)
    s, l_e = physics.weymouth_elevation(
        gas.gravity, gas.temperature, gas.compressibility, dst.elevation - src.elevation, edge.length
    )
    k = physics.weymouth_k(
        edge.diameter, l_e, gas.gravity, gas.temperature, gas.compressibility,
        edge.base_temperature, edge.base_pressure,
    )
    return physics.linearise_weymouth(
        src.nominal_pressure(GAS, "out"), dst.nominal_pressure(GAS, "in"), k, s
    )


def weymouth_linearized_constraints(model: EnergySystemModel, edge: Edge, ev: EdgeVariables, k: int,
                                    ctx: WindowContext) -> list[Constraint]:
    lin = weymouth_linearisation(model, edge)
    p1 = ctx.pressure(edge.from_node, GAS, "out", k)
    p2 = ctx.pressure(edge.to_node, GAS, "in", k)
    return [(ev.q[k] == p1 * lin.p1_coef + p2 * lin.p2_coef).named(vname("weymouth", edge.id, ctx.t0 + k))]


def darcy_linearisation(model: EnergySystemModel, edge: Edge) -> physics.DarcyLinearisation:
    liquid = model.carrier(edge.carrier)
    src, dst = model.node(edge.from_node), model.node(edge.to_node)
    k = physics.darcy_k(edge.diameter, edge.length, liquid.density, liquid.darcy_friction)
    return physics.linearise_darcy(
        src.nominal_pressure(edge.carrier, "out"),
        dst.nominal_pressure(edge.carrier, "in"),
        k,
        liquid.density,
        dst.elevation - src.elevation,
    )


def darcy_linearized_constraints(model: EnergySystemModel, edge: Edge, ev: EdgeVariables, k: int,
                                 ctx: WindowContext) -> list[Constraint]:
    lin = darcy_linearisation(model, edge)
    p1 = ctx.pressure(edge.from_node, edge.carrier, "out", k)
    p2 = ctx.pressure(edge.to_node, edge.carrier, "in", k)
    return [
        (p2 - p1 == (ev.q[k] - lin.q_nom) * -lin.slope + lin.dp_nom).named(
            vname("darcy", edge.id, ctx.t0 + k))
    ]


def incidence_matrix(model: EnergySystemModel, carrier: str = EL) -> np.ndarray:
    """Edge-by-node incidence (+1 at the from-node, -1 at the to-node) for one carrier."""
    edges = [e for e in model.edges if e.carrier == carrier]
    index = {n.id: i for i, n in enumerate(model.nodes)}
    a = np.zeros((len(edges), len(model.nodes)))
    for r, e in enumerate(edges):
        a[r, index[e.from_node]] = 1.0
        a[r, index[e.to_node]] = -1.0
    return a

"""Per-device variables and constraint generators.

Each generator takes ``(spec, vars, k, ctx)`` for window-local step ``k`` and
returns a list of named constraints; none of them touch the problem directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import physics
from .model import (
    EL,
    GAS,
    HEAT,
    HYDROGEN,
    OIL,
    WATER,
    ConfigurationError,
    DeviceSpec,
    EnergySystemModel,
    SimulationConfig,
    carrier_name,
    device_carriers,
)
from .problem import AssemblyError, Constraint, LinExpr, PlanningProblem, as_expr


@dataclass(frozen=True)
class DeviceBoundary:
    """State of one device just before a window starts."""

    on_prev: int = 1
    # start decisions at t0-1, t0-2, ... (most recent first)
    start_history: tuple[int, ...] = ()
    flow_prev: float | None = None
    storage_prev: float | None = None


@dataclass
class WindowContext:
    """Read-only data shared by the constraint generators of one window."""

    model: EnergySystemModel
    config: SimulationConfig
    t0: int
    horizon: int
    profile_view: dict[str, np.ndarray] = field(default_factory=dict)
    pressure: Callable[[str, str, str, int], LinExpr] | None = None

    def profile(self, spec: DeviceSpec, k: int) -> float:
        if spec.profile is None:
            return 1.0
        return float(self.profile_view[spec.profile][k])

    def carrier_constant(self, carrier: str, name: str) -> float:
        value = getattr(self.model.carrier(carrier), name)
        if value is None:
            raise ConfigurationError(f"carrier {carrier} needs {name}")
        return value


@dataclass
class DeviceVariables:
    spec: DeviceSpec
    t0: int
    horizon: int
    boundary: DeviceBoundary
    flow_in: dict[str, list[LinExpr]] = field(default_factory=dict)
    flow_out: dict[str, list[LinExpr]] = field(default_factory=dict)
    on: list[LinExpr] | None = None
    prep: list[LinExpr] | None = None
    start: list[LinExpr] | None = None
    stop: list[LinExpr] | None = None
    storage: list[LinExpr] | None = None
    p_max: list[LinExpr] | None = None
    y_storage: list[LinExpr] | None = None
    delta_E: LinExpr | None = None

    def fin(self, carrier: str, k: int) -> LinExpr:
        return self.flow_in[carrier][k]

    def fout(self, carrier: str, k: int) -> LinExpr:
        return self.flow_out[carrier][k]

    def on_at(self, k: int) -> LinExpr:
        if self.on is None:
            return LinExpr(const=1.0)
        if k < 0:
            if k != -1:
                raise AssemblyError("on-state is only carried one step back")
            return LinExpr(const=self.boundary.on_prev)
        return self.on[k]

    def prep_at(self, k: int) -> LinExpr:
        return LinExpr() if self.prep is None else self.prep[k]

    def start_at(self, k: int) -> LinExpr:
        if k >= 0:
            return self.start[k]
        back = -k - 1
        hist = self.boundary.start_history
        if back >= len(hist):
            raise AssemblyError(
                f"device {self.spec.id}: start history of depth {len(hist)} "
                f"cannot reach {back + 1} steps back"
            )
        return LinExpr(const=hist[back])

    def storage_at(self, k: int) -> LinExpr:
        if k < 0:
            return LinExpr(const=self.boundary.storage_prev)
        return self.storage[k]


def vname(kind: str, *keys) -> str:
    return f"{kind}({','.join(str(k) for k in keys)})"


def create_device_variables(
    problem: PlanningProblem, spec: DeviceSpec, t0: int, horizon: int, boundary: DeviceBoundary
) -> DeviceVariables:
    v = DeviceVariables(spec, t0, horizon, boundary)
    ins, outs = device_carriers(spec)
    steps = range(t0, t0 + horizon)
    for c in ins:
        v.flow_in[c] = [problem.add_var(vname("f_in", spec.id, c, t)) for t in steps]
    for c in outs:
        v.flow_out[c] = [problem.add_var(vname("f_out", spec.id, c, t)) for t in steps]
    if spec.start_stop:
        for kind in ("on", "prep", "start", "stop"):
            setattr(v, kind, [problem.add_var(vname("y_" + kind, spec.id, t), binary=True) for t in steps])
    if spec.type in ("battery", "hydrogen_storage"):
        e_min = float(spec.param("E_min") or 0.0)
        e_max = float(spec.param("E_max"))
        if boundary.storage_prev is None:
            raise AssemblyError(f"device {spec.id}: storage level before window is missing")
        v.storage = [problem.add_var(vname("E", spec.id, t), e_min, e_max) for t in steps]
        v.delta_E = problem.add_var(vname("dE", spec.id, t0))
    if spec.type == "battery":
        v.p_max = [problem.add_var(vname("p_max", spec.id, t)) for t in steps]
        v.y_storage = [problem.add_var(vname("y_storage", spec.id, t), binary=True) for t in steps]
    return v


def flow_alias(spec: DeviceSpec, v: DeviceVariables, k: int) -> LinExpr:
    """The flow ``f`` that the generic bounds and ramp limits act on."""
    t = spec.type
    if t == "well":
        return v.fout(GAS, k) - v.fin(GAS, k) + v.fout(OIL, k) + v.fout(WATER, k)
    if t == "separator":
        return v.fin(OIL, k) + v.fin(GAS, k) + v.fin(WATER, k)
    if t == "compressor":
        return v.fin(GAS, k)
    if t == "pump":
        return v.fin(carrier_name(str(spec.param("carrier"))), k)
    if t in ("gas_turbine", "battery", "fuel_cell"):
        return v.fout(EL, k)
    if t in ("heater", "electrolyser"):
        return v.fin(EL, k)
    if t == "hydrogen_storage":
        return v.fout(HYDROGEN, k)
    if t == "source":
        return next(iter(v.flow_out.values()))[k]
    if t == "sink":
        return next(iter(v.flow_in.values()))[k]
    raise ConfigurationError(f"device {spec.id}: unknown type {t!r}")


def generic_device_constraints(spec: DeviceSpec, v: DeviceVariables, k: int, ctx: WindowContext
                               ) -> list[Constraint]:
    """Profile-scaled bounds, ramp limits and the start/stop state machine."""
    t = ctx.t0 + k
    f = flow_alias(spec, v, k)
    pr = ctx.profile(spec, k)
    on = v.on_at(k)
    out = [
        (f <= on * (spec.f_max * pr)).named(vname("fmax", spec.id, t)),
        (f >= on * (spec.f_min * pr)).named(vname("fmin", spec.id, t)),
    ]
    if spec.ramp_up is not None or spec.ramp_down is not None:
        if spec.f_max == 0:
            raise ConfigurationError(f"device {spec.id}: ramp limits need f_max > 0")
        prev = None
        if k > 0:
            prev = flow_alias(spec, v, k - 1)
        elif v.boundary.flow_prev is not None:
            prev = as_expr(v.boundary.flow_prev)
        if prev is not None:
            step = spec.f_max * ctx.config.timestep
            if spec.ramp_up is not None:
                out.append((f - prev <= spec.ramp_up * step).named(vname("ramp_up", spec.id, t)))
            if spec.ramp_down is not None:
                out.append((f - prev >= -spec.ramp_down * step).named(vname("ramp_down", spec.id, t)))
    if spec.start_stop:
        ts = spec.startup_delay
        out.append(
            (v.on_at(k) - v.on_at(k - 1) == v.start_at(k - ts) - v.stop[k]).named(
                vname("onoff", spec.id, t)
            )
        )
        prep = LinExpr()
        for tau in range(ts):
            prep.iadd(v.start_at(k - tau))
        out.append((v.prep[k] == prep).named(vname("prep", spec.id, t)))
        out.append((v.on[k] + v.prep[k] <= 1).named(vname("on_or_prep", spec.id, t)))
    return out


def well_constraints(spec, v, k, ctx) -> list[Constraint]:
    t = ctx.t0 + k
    gor = float(spec.param("gor"))
    water_cut = float(spec.param("water_cut"))
    if not 0 <= water_cut < 1:
        raise ConfigurationError(f"well {spec.id}: water cut must lie in [0, 1)")
    water, oil, gas = physics.well_fractions(gor, water_cut)
    f = flow_alias(spec, v, k)
    net_gas = v.fout(GAS, k) - v.fin(GAS, k)
    out = [
        (v.fout(WATER, k) == f * water).named(vname("well_water", spec.id, t)),
        (v.fout(OIL, k) == f * oil).named(vname("well_oil", spec.id, t)),
        (net_gas == f * gas).named(vname("well_gas", spec.id, t)),
        (v.fin(GAS, k) == v.fout(OIL, k) * float(spec.param("injection_ratio"))).named(
            vname("well_gaslift", spec.id, t)
        ),
    ]
    p_sep = float(spec.param("separator_pressure"))
    for c in (OIL, GAS, WATER):
        out.append(
            (ctx.pressure(spec.node, c, "out", k) == p_sep).named(vname("well_p", spec.id, c, t))
        )
    out.append(
        (ctx.pressure(spec.node, GAS, "in", k) == float(spec.param("injection_pressure"))).named(
            vname("well_pinj", spec.id, t)
        )
    )
    return out


def separator_constraints(spec, v, k, ctx) -> list[Constraint]:
    t = ctx.t0 + k
    out = [
        (v.fout(c, k) == v.fin(c, k)).named(vname("sep_pass", spec.id, c, t)) for c in (OIL, GAS, WATER)
    ]
    total = v.fin(OIL, k) + v.fin(GAS, k) + v.fin(WATER, k)
    out.append((v.fin(HEAT, k) == total * float(spec.param("heat_demand_factor"))).named(
        vname("sep_heat", spec.id, t)))
    out.append((v.fin(EL, k) == total * float(spec.param("el_demand_factor"))).named(
        vname("sep_el", spec.id, t)))
    for c in (OIL, GAS, WATER):
        p = spec.param(f"{c}_outlet_pressure")
        if p is not None:
            out.append((ctx.pressure(spec.node, c, "out", k) == float(p)).named(
                vname("sep_p", spec.id, c, t)))
    return out


def nominal_pressures(spec: DeviceSpec, ctx: WindowContext, carrier: str) -> tuple[float, float]:
    node = ctx.model.node(spec.node)
    p_in = spec.param("inlet_pressure")
    p_out = spec.param("outlet_pressure")
    p_in = float(p_in) if p_in is not None else node.nominal_pressure(carrier, "in")
    p_out = float(p_out) if p_out is not None else node.nominal_pressure(carrier, "out")
    if p_in is None or p_out is None:
        raise ConfigurationError(f"device {spec.id}: nominal pressures missing")
    return p_in, p_out


def compressor_linearisation(spec: DeviceSpec, ctx: WindowContext) -> physics.CompressorLinearisation:
    a, c = physics.compressor_coefficients(
        float(spec.param("heat_capacity_ratio")),
        float(spec.param("compressibility")),
        float(spec.param("gas_constant")),
        float(spec.param("inlet_temperature")),
        float(spec.param("density")),
        float(spec.param("eta")),
    )
    p_in, p_out = nominal_pressures(spec, ctx, GAS)
    q_nom = spec.param("nominal_flow")
    q_nom = float(q_nom) if q_nom is not None else spec.f_max
    return physics.linearise_compressor(q_nom, p_in, p_out, a, c)


def compressor_constraints(spec, v, k, ctx) -> list[Constraint]:
    t = ctx.t0 + k
    lin = compressor_linearisation(spec, ctx)
    q = v.fout(GAS, k)
    power = (
        q * lin.q_coef
        + ctx.pressure(spec.node, GAS, "in", k) * lin.p_in_coef
        + ctx.pressure(spec.node, GAS, "out", k) * lin.p_out_coef
    )
    if spec.param("variant") == "electric":
        return [
            (v.fout(GAS, k) == v.fin(GAS, k)).named(vname("comp_pass", spec.id, t)),
            (v.fin(EL, k) == power).named(vname("comp_power", spec.id, t)),
        ]
    c_gas = ctx.carrier_constant(GAS, "calorific_value")
    return [(v.fout(GAS, k) == v.fin(GAS, k) - power / c_gas).named(vname("comp_fuel", spec.id, t))]


def pump_constraints(spec, v, k, ctx) -> list[Constraint]:
    t = ctx.t0 + k
    c = carrier_name(str(spec.param("carrier")))
    p_in, p_out = nominal_pressures(spec, ctx, c)
    eta = float(spec.param("eta"))
    if eta <= 0:
        raise ConfigurationError(f"pump {spec.id}: efficiency must be > 0")
    return [
        (v.fout(c, k) == v.fin(c, k)).named(vname("pump_pass", spec.id, t)),
        (v.fin(EL, k) == v.fin(c, k) * ((p_out - p_in) / eta)).named(vname("pump_power", spec.id, t)),
    ]


def gas_turbine_constraints(spec, v, k, ctx) -> list[Constraint]:
    t = ctx.t0 + k
    if spec.f_max <= 0:
        raise ConfigurationError(f"gas turbine {spec.id}: f_max must be > 0")
    c_gas = ctx.carrier_constant(GAS, "calorific_value")
    a = float(spec.param("fuel_A"))
    b = float(spec.param("fuel_B"))
    eta_heat = float(spec.param("eta_heat"))
    gas_in, el_out = v.fin(GAS, k), v.fout(EL, k)
    running = v.on_at(k) + v.prep_at(k)
    return [
        (gas_in * c_gas == el_out * a + running * (b * spec.f_max)).named(vname("gt_fuel", spec.id, t)),
        (v.fout(HEAT, k) == (gas_in * c_gas - el_out) * eta_heat).named(vname("gt_heat", spec.id, t)),
    ]


def heater_constraints(spec, v, k, ctx) -> list[Constraint]:
    t = ctx.t0 + k
    return [(v.fout(HEAT, k) == v.fin(EL, k) * float(spec.param("eta"))).named(vname("heater", spec.id, t))]


def battery_big_m(spec: DeviceSpec) -> float:
    m = spec.param("big_m")
    if m is not None:
        m = float(m)
        if m <= spec.f_max:
            raise ConfigurationError(f"battery {spec.id}: big-M {m} must exceed f_max {spec.f_max}")
        return m
    return 2.0 * spec.f_max + float(spec.param("E_max")) / float(spec.param("reserve_time"))


def battery_constraints(spec, v, k, ctx) -> list[Constraint]:
    """Energy balance, charge/discharge caps and ``p_max = min(f_max, E/t_res)``.

    ``y_storage = 1`` selects the energy-limited branch (E/t_res < f_max).
    """
    t = ctx.t0 + k
    eta = float(spec.param("eta"))
    t_res = float(spec.param("reserve_time"))
    m = battery_big_m(spec)
    el_in, el_out = v.fin(EL, k), v.fout(EL, k)
    energy = v.storage_at(k)
    p_max, y = v.p_max[k], v.y_storage[k]
    dt = ctx.config.dt_hours
    return [
        ((el_in * eta - el_out / eta) * dt == energy - v.storage_at(k - 1)).named(
            vname("bat_balance", spec.id, t)),
        (el_out <= spec.f_max).named(vname("bat_out", spec.id, t)),
        (el_in <= -spec.f_min).named(vname("bat_in", spec.id, t)),
        (p_max <= spec.f_max).named(vname("bat_pmax_cap", spec.id, t)),
        (p_max >= spec.f_max - y * m).named(vname("bat_pmax_cap_lo", spec.id, t)),
        (p_max <= energy / t_res).named(vname("bat_pmax_energy", spec.id, t)),
        (p_max >= energy / t_res - (1 - y) * m).named(vname("bat_pmax_energy_lo", spec.id, t)),
    ]


def storage_target(spec: DeviceSpec, v: DeviceVariables) -> float:
    target = spec.param("E_target")
    return float(target) if target is not None else float(v.boundary.storage_prev)


def storage_deviation_constraint(spec, v, ctx) -> Constraint:
    last = v.horizon - 1
    return (v.delta_E >= storage_target(spec, v) - v.storage[last]).named(
        vname("storage_dev", spec.id, ctx.t0))


def hydrogen_storage_constraints(spec, v, k, ctx, is_last_step: bool = False) -> list[Constraint]:
    # mass balance in Sm3: flows in Sm3/s times the step length in seconds
    t = ctx.t0 + k
    out = [
        ((v.fin(HYDROGEN, k) - v.fout(HYDROGEN, k)) * ctx.config.dt_seconds
         == v.storage_at(k) - v.storage_at(k - 1)).named(vname("h2_balance", spec.id, t))
    ]
    if is_last_step:
        out.append(storage_deviation_constraint(spec, v, ctx))
    return out


def electrolyser_constraints(spec, v, k, ctx) -> list[Constraint]:
    t = ctx.t0 + k
    c_h = ctx.carrier_constant(HYDROGEN, "calorific_value")
    eta = float(spec.param("eta"))
    eta_heat = float(spec.param("eta_heat"))
    el_in = v.fin(EL, k)
    return [
        (v.fout(HYDROGEN, k) * c_h == el_in * eta).named(vname("elyser_h2", spec.id, t)),
        (v.fout(HEAT, k) == el_in * ((1 - eta) * eta_heat)).named(vname("elyser_heat", spec.id, t)),
    ]


def fuel_cell_constraints(spec, v, k, ctx) -> list[Constraint]:
    t = ctx.t0 + k
    c_h = ctx.carrier_constant(HYDROGEN, "calorific_value")
    eta = float(spec.param("eta"))
    eta_heat = float(spec.param("eta_heat"))
    h_in = v.fin(HYDROGEN, k)
    return [
        (v.fout(EL, k) == h_in * (c_h * eta)).named(vname("fc_el", spec.id, t)),
        (v.fout(HEAT, k) == h_in * (c_h * (1 - eta) * eta_heat)).named(vname("fc_heat", spec.id, t)),
    ]


def source_sink_constraints(spec, v, k, ctx) -> list[Constraint]:
    # the flow alias is the single in/out flow, so only the generic bounds apply
    declared = carrier_name(str(spec.param("carrier")))
    flows = v.flow_out if spec.type == "source" else v.flow_in
    if list(flows) != [declared]:
        raise ConfigurationError(f"device {spec.id}: carrier mismatch with declared {declared}")
    return []


SPECIFIC: dict[str, Callable] = {
    "well": well_constraints,
    "separator": separator_constraints,
    "compressor": compressor_constraints,
    "pump": pump_constraints,
    "gas_turbine": gas_turbine_constraints,
    "heater": heater_constraints,
    "battery": battery_constraints,
    "electrolyser": electrolyser_constraints,
    "fuel_cell": fuel_cell_constraints,
    "source": source_sink_constraints,
    "sink": source_sink_constraints,
}


def device_constraints(spec: DeviceSpec, v: DeviceVariables, k: int, ctx: WindowContext
                       ) -> list[Constraint]:
    out = generic_device_constraints(spec, v, k, ctx)
    if spec.type == "hydrogen_storage":
        out += hydrogen_storage_constraints(spec, v, k, ctx, is_last_step=k == v.horizon - 1)
    else:
        out += SPECIFIC[spec.type](spec, v, k, ctx)
        if spec.type == "battery" and k == v.horizon - 1:
            out.append(storage_deviation_constraint(spec, v, ctx))
    return out


def el_available(spec: DeviceSpec, v: DeviceVariables, k: int, ctx: WindowContext) -> LinExpr | None:
    """Maximum available electric output counted by the reserve, if the device has one."""
    _, outs = device_carriers(spec)
    if EL not in outs:
        return None
    if spec.type == "battery":
        return v.p_max[k]
    return v.on_at(k) * (spec.f_max * ctx.profile(spec, k))


def reserve_contribution(spec: DeviceSpec, v: DeviceVariables, k: int, ctx: WindowContext) -> LinExpr:
    ins, outs = device_carriers(spec)
    term = LinExpr()
    avail = el_available(spec, v, k, ctx)
    if avail is not None:
        term.iadd(avail, spec.reserve_factor)
        term.iadd(v.fout(EL, k), -1.0)
    if EL in ins:
        term.iadd(v.fin(EL, k), spec.load_reserve_factor)
    return term


def emission_rate(spec: DeviceSpec, v: DeviceVariables, k: int, ctx: WindowContext) -> LinExpr:
    """kg CO2/s of a gas-combusting device (zero expression otherwise)."""
    from .model import is_gas_combusting

    if not is_gas_combusting(spec):
        return LinExpr()
    c_co2 = ctx.carrier_constant(GAS, "co2_content")
    burned = v.fin(GAS, k) - (v.fout(GAS, k) if GAS in v.flow_out else 0.0)
    return burned * c_co2

"""Domain types for an energy system: carriers, nodes, edges, devices, profiles.

Units used throughout the package:
fluid flows in Sm3/s, electricity and heat in MW, pressures in MPa,
battery energy in MWh, hydrogen storage in Sm3, time steps in minutes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Model or simulation parameters cannot be turned into a valid problem."""


class OutOfDataError(IndexError):
    """A profile was asked for a step beyond its last value."""

    def __init__(self, profile_id: str, index: int, length: int):
        super().__init__(
            f"profile {profile_id!r} has {length} values, index {index} is out of data"
        )
        self.profile_id = profile_id
        self.index = index


class CarrierKind(str, Enum):
    ELECTRICITY = "electricity"
    HEAT = "heat"
    OIL = "oil"
    GAS = "gas"
    WATER = "water"
    HYDROGEN = "hydrogen"
    WELLSTREAM = "wellstream"


EL = CarrierKind.ELECTRICITY.value
HEAT = CarrierKind.HEAT.value
OIL = CarrierKind.OIL.value
GAS = CarrierKind.GAS.value
WATER = CarrierKind.WATER.value
HYDROGEN = CarrierKind.HYDROGEN.value

CARRIER_ALIASES = {"el": EL}
FLUIDS = frozenset({OIL, GAS, WATER, HYDROGEN, CarrierKind.WELLSTREAM.value})
LIQUIDS = frozenset({OIL, WATER})
FLOW_MODELS = ("transport", "dc-power", "weymouth", "darcy")

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def carrier_name(name: str) -> str:
    name = CARRIER_ALIASES.get(name, name)
    return CarrierKind(name).value


@dataclass(frozen=True)
class Carrier:
    kind: str
    calorific_value: float | None = None  # MJ/Sm3
    co2_content: float | None = None  # kg/Sm3
    gravity: float | None = None
    compressibility: float | None = None
    temperature: float | None = None  # K
    density: float | None = None  # kg/m3
    darcy_friction: float | None = None


@dataclass(frozen=True)
class Node:
    id: str
    elevation: float = 0.0
    # carrier -> (in-terminal, out-terminal) nominal pressure
    pressure: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    max_deviation: Mapping[str, float] = field(default_factory=dict)
    reference: bool = False

    def nominal_pressure(self, carrier: str, terminal: str) -> float | None:
        pair = self.pressure.get(carrier)
        if pair is None:
            return None
        return pair[0] if terminal == "in" else pair[1]


@dataclass(frozen=True)
class Edge:
    id: str
    carrier: str
    from_node: str
    to_node: str
    q_max: float | None = None
    bidirectional: bool | None = None
    flow_model: str = "transport"
    reactance: float | None = None  # per unit
    losses: tuple[tuple[float, float], ...] = ()
    diameter: float | None = None  # mm
    length: float | None = None  # km
    base_temperature: float | None = None  # K
    base_pressure: float | None = None  # MPa

    @property
    def is_bidirectional(self) -> bool:
        if self.bidirectional is None:
            return self.carrier == EL
        return self.bidirectional


@dataclass(frozen=True)
class PenaltyCurve:
    """Piecewise-linear penalty of one device flow, plus fixed on/prep terms.

    ``flow`` is ``"f"`` for the device's main flow or ``"<carrier>.<in|out>"``.
    """

    points: tuple[tuple[float, float], ...]
    flow: str = "f"
    on_cost: float = 0.0
    prep_cost: float = 0.0

    @property
    def xs(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=float)

    @property
    def ys(self) -> np.ndarray:
        return np.array([p[1] for p in self.points], dtype=float)

    def is_convex(self) -> bool:
        slopes = np.diff(self.ys) / np.diff(self.xs)
        return bool(np.all(np.diff(slopes) >= -1e-12))


@dataclass(frozen=True)
class ParamSpec:
    dimension: str
    required: bool = True
    default: float | str | None = None


# type -> parameter table; string-valued params use dimension "choice:<a>|<b>"
_PRESSURE_OPT = ParamSpec("pressure", required=False)
DEVICE_PARAMS: dict[str, dict[str, ParamSpec]] = {
    "well": {
        "gor": ParamSpec("dimensionless"),
        "water_cut": ParamSpec("dimensionless"),
        "injection_ratio": ParamSpec("dimensionless"),
        "injection_pressure": ParamSpec("pressure"),
        "separator_pressure": ParamSpec("pressure"),
    },
    "separator": {
        "heat_demand_factor": ParamSpec("dimensionless"),
        "el_demand_factor": ParamSpec("dimensionless"),
        "gas_outlet_pressure": _PRESSURE_OPT,
        "oil_outlet_pressure": _PRESSURE_OPT,
        "water_outlet_pressure": _PRESSURE_OPT,
    },
    "compressor": {
        "variant": ParamSpec("choice:electric|gas", required=False, default="electric"),
        "eta": ParamSpec("dimensionless"),
        "heat_capacity_ratio": ParamSpec("dimensionless"),
        "compressibility": ParamSpec("dimensionless"),
        "gas_constant": ParamSpec("gas_constant"),
        "inlet_temperature": ParamSpec("temperature"),
        "density": ParamSpec("mass_per_volume"),
        "inlet_pressure": _PRESSURE_OPT,
        "outlet_pressure": _PRESSURE_OPT,
        "nominal_flow": ParamSpec("flow", required=False),
    },
    "pump": {
        "carrier": ParamSpec("choice:oil|water"),
        "eta": ParamSpec("dimensionless"),
        "inlet_pressure": _PRESSURE_OPT,
        "outlet_pressure": _PRESSURE_OPT,
    },
    "gas_turbine": {
        "fuel_A": ParamSpec("dimensionless"),
        "fuel_B": ParamSpec("dimensionless"),
        "eta_heat": ParamSpec("dimensionless"),
    },
    "heater": {"eta": ParamSpec("dimensionless")},
    "source": {"carrier": ParamSpec("choice:electricity|heat|oil|gas|water|hydrogen")},
    "sink": {"carrier": ParamSpec("choice:electricity|heat|oil|gas|water|hydrogen")},
    "battery": {
        "eta": ParamSpec("dimensionless"),
        "E_max": ParamSpec("energy"),
        "E_min": ParamSpec("energy", required=False, default=0.0),
        "reserve_time": ParamSpec("hours"),
        "big_m": ParamSpec("power", required=False),
    },
    "hydrogen_storage": {
        "E_max": ParamSpec("volume"),
        "E_min": ParamSpec("volume", required=False, default=0.0),
        "E_target": ParamSpec("volume", required=False),
    },
    "electrolyser": {"eta": ParamSpec("dimensionless"), "eta_heat": ParamSpec("dimensionless")},
    "fuel_cell": {"eta": ParamSpec("dimensionless"), "eta_heat": ParamSpec("dimensionless")},
}

DEVICE_TYPES = tuple(DEVICE_PARAMS)
STORAGE_TYPES = frozenset({"battery", "hydrogen_storage"})


@dataclass(frozen=True)
class DeviceSpec:
    id: str
    node: str
    type: str
    f_max: float
    f_min: float = 0.0
    ramp_up: float | None = None  # fraction of f_max per minute
    ramp_down: float | None = None
    start_stop: bool = False
    startup_delay: int = 0  # time steps
    start_cost: float = 0.0
    stop_cost: float = 0.0
    storage_cost: float = 0.0
    penalty: PenaltyCurve | None = None
    profile: str | None = None
    reserve_factor: float = 1.0
    load_reserve_factor: float = 0.0
    params: Mapping[str, float | str] = field(default_factory=dict)
    initial_on: bool | None = None
    initial_flow: float | None = None
    initial_storage: float | None = None

    def param(self, name: str):
        if name in self.params:
            return self.params[name]
        spec = DEVICE_PARAMS[self.type].get(name)
        if spec is not None and spec.default is not None:
            return spec.default
        return None


def device_carriers(dev: DeviceSpec) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """(input carriers, output carriers) of a device."""
    t = dev.type
    if t == "well":
        return (GAS,), (OIL, GAS, WATER)
    if t == "separator":
        return (OIL, GAS, WATER, HEAT, EL), (OIL, GAS, WATER)
    if t == "compressor":
        return ((GAS, EL) if dev.param("variant") == "electric" else (GAS,)), (GAS,)
    if t == "pump":
        c = carrier_name(str(dev.param("carrier")))
        return (c, EL), (c,)
    if t == "gas_turbine":
        return (GAS,), (EL, HEAT)
    if t == "heater":
        return (EL,), (HEAT,)
    if t == "source":
        return (), (carrier_name(str(dev.param("carrier"))),)
    if t == "sink":
        return (carrier_name(str(dev.param("carrier"))),), ()
    if t == "battery":
        return (EL,), (EL,)
    if t == "hydrogen_storage":
        return (HYDROGEN,), (HYDROGEN,)
    if t == "electrolyser":
        return (EL,), (HYDROGEN, HEAT)
    if t == "fuel_cell":
        return (HYDROGEN,), (EL, HEAT)
    raise ConfigurationError(f"device {dev.id!r}: unknown type {t!r}")


def serial_carriers(dev: DeviceSpec) -> tuple[str, ...]:
    """Carriers a device passes from a node's in-terminal to its out-terminal."""
    t = dev.type
    if t == "well" or t == "compressor":
        return (GAS,)
    if t == "separator":
        return (OIL, GAS, WATER)
    if t == "pump":
        return (carrier_name(str(dev.param("carrier"))),)
    return ()


def alias_carrier(dev: DeviceSpec) -> str:
    """Carrier of the device's main flow ``f`` (decides f_max units)."""
    ins, outs = device_carriers(dev)
    if dev.type in ("gas_turbine", "battery", "fuel_cell"):
        return EL
    if dev.type in ("heater", "electrolyser"):
        return EL
    if dev.type == "hydrogen_storage":
        return HYDROGEN
    if dev.type in ("well", "separator"):
        return GAS
    return (outs or ins)[0]


def is_gas_combusting(dev: DeviceSpec) -> bool:
    return dev.type == "gas_turbine" or (
        dev.type == "compressor" and dev.param("variant") == "gas"
    )


@dataclass(frozen=True)
class EnergySystemModel:
    carriers: Mapping[str, Carrier]
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...] = ()
    devices: tuple[DeviceSpec, ...] = ()

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def device(self, device_id: str) -> DeviceSpec:
        for d in self.devices:
            if d.id == device_id:
                return d
        raise KeyError(device_id)

    def devices_at(self, node_id: str) -> list[DeviceSpec]:
        return [d for d in self.devices if d.node == node_id]

    def carrier(self, kind: str) -> Carrier:
        return self.carriers.get(kind) or Carrier(kind)


@dataclass(frozen=True)
class Profile:
    id: str
    forecast: np.ndarray
    nowcast: np.ndarray | None = None

    def __post_init__(self):
        forecast = np.asarray(self.forecast, dtype=float)
        object.__setattr__(self, "forecast", forecast)
        if np.any(forecast < 0):
            raise ConfigurationError(f"profile {self.id!r}: negative forecast values")
        if self.nowcast is not None:
            nowcast = np.asarray(self.nowcast, dtype=float)
            object.__setattr__(self, "nowcast", nowcast)
            if np.any(nowcast < 0):
                raise ConfigurationError(f"profile {self.id!r}: negative nowcast values")
            if len(nowcast) != len(forecast):
                raise ConfigurationError(
                    f"profile {self.id!r}: forecast has {len(forecast)} values, "
                    f"nowcast has {len(nowcast)}"
                )

    def __len__(self) -> int:
        return len(self.forecast)

    def __eq__(self, other):
        if not isinstance(other, Profile):
            return NotImplemented
        same_now = (self.nowcast is None and other.nowcast is None) or (
            self.nowcast is not None
            and other.nowcast is not None
            and np.array_equal(self.nowcast, other.nowcast)
        )
        return self.id == other.id and np.array_equal(self.forecast, other.forecast) and same_now


TimeSeriesSet = dict  # profile id -> Profile


@dataclass(frozen=True)
class SimulationConfig:
    timestep: float = 5.0  # minutes
    horizon: int = 24  # steps
    reopt_interval: int = 6  # steps
    nowcast_window: int = 0  # steps
    reserve_min: float = 0.0  # MW
    emission_cap: float | None = None  # kg/s
    mip_gap: float = 1e-6
    time_limit: float | None = None  # seconds per window
    seed: int = 0
    elastic: bool = False
    s_base: float = 100.0  # MVA
    tie_break: float = 1e-6
    forecast_noise: float | None = None
    profile_files: tuple[str, ...] = ()
    n_steps: int | None = None  # simulated span; None = as far as the profiles reach

    def __post_init__(self):
        if self.timestep <= 0:
            raise ConfigurationError("timestep must be positive")
        if not (self.horizon >= self.reopt_interval >= 1):
            raise ConfigurationError(
                f"need horizon >= re-optimisation interval >= 1, got "
                f"{self.horizon} and {self.reopt_interval}"
            )
        if not 0 <= self.nowcast_window <= self.horizon:
            raise ConfigurationError("nowcast window must lie within the horizon")
        if self.reserve_min < 0:
            raise ConfigurationError("reserve requirement must be >= 0")
        if self.n_steps is not None and self.n_steps < 0:
            raise ConfigurationError("simulated span must be >= 0 steps")

    @property
    def dt_hours(self) -> float:
        return self.timestep / 60.0

    @property
    def dt_seconds(self) -> float:
        return self.timestep * 60.0


@dataclass(frozen=True)
class Diagnostic:
    element: str
    message: str

    def __str__(self) -> str:
        return f"{self.element}: {self.message}"


def _check_points(points, what: str, element: str, out: list[Diagnostic]):
    xs = [p[0] for p in points]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        out.append(Diagnostic(element, f"{what} abscissae must be strictly increasing"))
        return False
    return True


def validate_model(model: EnergySystemModel, profiles: Mapping | None = None) -> list[Diagnostic]:
    """Structural checks; returns one diagnostic per violation (empty when clean)."""
    out: list[Diagnostic] = []
    node_ids = [n.id for n in model.nodes]
    for kind, ids in (
        ("node", node_ids),
        ("edge", [e.id for e in model.edges]),
        ("device", [d.id for d in model.devices]),
    ):
        seen = set()
        for i in ids:
            if i in seen:
                out.append(Diagnostic(f"{kind} {i}", "duplicate id"))
            seen.add(i)
            if not _IDENT.match(i):
                out.append(Diagnostic(f"{kind} {i}", "id must be a letter/underscore identifier"))
    known_nodes = set(node_ids)

    for kind, c in model.carriers.items():
        el = f"carrier {kind}"
        for name in ("calorific_value", "density"):
            v = getattr(c, name)
            if v is not None and v <= 0:
                out.append(Diagnostic(el, f"{name} must be > 0"))
        if c.darcy_friction is not None and not 0 < c.darcy_friction < 1:
            out.append(Diagnostic(el, "darcy_friction must lie in (0, 1)"))

    for n in model.nodes:
        el = f"node {n.id}"
        for c, pair in n.pressure.items():
            if any(p <= 0 for p in pair):
                out.append(Diagnostic(el, f"nominal {c} pressure must be > 0"))
        for c, d in n.max_deviation.items():
            if not 0 <= d <= 1:
                out.append(Diagnostic(el, f"max {c} pressure deviation must lie in [0, 1]"))
            if c not in n.pressure:
                out.append(Diagnostic(el, f"{c} pressure deviation set without nominal pressure"))

    for e in model.edges:
        el = f"edge {e.id}"
        for end in (e.from_node, e.to_node):
            if end not in known_nodes:
                out.append(Diagnostic(el, f"references missing node {end!r}"))
        if e.q_max is not None and e.q_max <= 0:
            out.append(Diagnostic(el, "q_max must be > 0"))
        if e.flow_model not in FLOW_MODELS:
            out.append(Diagnostic(el, f"unknown flow model {e.flow_model!r}"))
        if e.flow_model == "dc-power":
            if e.carrier != EL:
                out.append(Diagnostic(el, "dc-power flow model requires an electricity edge"))
            if e.reactance is None or e.reactance <= 0:
                out.append(Diagnostic(el, "dc-power edge needs reactance > 0"))
        if e.losses:
            _validate_loss_table(e, out)
        if e.flow_model in ("weymouth", "darcy"):
            _validate_pipe(model, e, out)

    for d in model.devices:
        _validate_device(model, d, known_nodes, profiles, out)
    return out


def _validate_loss_table(e: Edge, out: list[Diagnostic]):
    el = f"edge {e.id}"
    pts = e.losses
    if not _check_points(pts, "loss table", el, out):
        return
    if pts[0] != (0.0, 0.0) and tuple(map(float, pts[0])) != (0.0, 0.0):
        out.append(Diagnostic(el, "loss table must pass through (0, 0)"))
    ys = [p[1] for p in pts]
    if any(y < 0 for y in ys):
        out.append(Diagnostic(el, "loss table has negative losses"))
    if any(b < a for a, b in zip(ys, ys[1:])):
        out.append(Diagnostic(el, "loss table must be nondecreasing"))
    if len(pts) > 2 and not PenaltyCurve(tuple(pts)).is_convex():
        out.append(Diagnostic(el, "loss table must be convex"))
    if e.q_max is not None and pts[-1][0] < e.q_max:
        out.append(Diagnostic(el, "loss table must extend to q_max"))


def _validate_pipe(model: EnergySystemModel, e: Edge, out: list[Diagnostic]):
    el = f"edge {e.id}"
    if e.diameter is None or e.diameter <= 0 or e.length is None or e.length <= 0:
        out.append(Diagnostic(el, f"{e.flow_model} edge needs diameter and length > 0"))
    c = model.carriers.get(e.carrier)
    if e.flow_model == "weymouth":
        if e.carrier != GAS:
            out.append(Diagnostic(el, "weymouth flow model requires a gas edge"))
        if e.base_temperature is None or e.base_pressure is None:
            out.append(Diagnostic(el, "weymouth edge needs base_temperature and base_pressure"))
        if c is None or None in (c.gravity, c.compressibility, c.temperature):
            out.append(Diagnostic(el, "gas carrier needs gravity, compressibility, temperature"))
    else:
        if e.carrier not in LIQUIDS:
            out.append(Diagnostic(el, "darcy flow model requires an oil or water edge"))
        if c is None or c.density is None or c.darcy_friction is None:
            out.append(Diagnostic(el, f"{e.carrier} carrier needs density and darcy_friction"))
    nodes = {n.id: n for n in model.nodes}
    src, dst = nodes.get(e.from_node), nodes.get(e.to_node)
    if src is not None and src.nominal_pressure(e.carrier, "out") is None:
        out.append(Diagnostic(el, f"node {src.id} needs a nominal {e.carrier} pressure"))
    if dst is not None and dst.nominal_pressure(e.carrier, "in") is None:
        out.append(Diagnostic(el, f"node {dst.id} needs a nominal {e.carrier} pressure"))


def _validate_device(model, d: DeviceSpec, known_nodes, profiles, out: list[Diagnostic]):
    el = f"device {d.id}"
    if d.node not in known_nodes:
        out.append(Diagnostic(el, f"references missing node {d.node!r}"))
    if d.type not in DEVICE_PARAMS:
        out.append(Diagnostic(el, f"unknown device type {d.type!r}"))
        return
    if d.profile is not None and profiles is not None and d.profile not in profiles:
        out.append(Diagnostic(el, f"references missing profile {d.profile!r}"))
    table = DEVICE_PARAMS[d.type]
    for name, spec in table.items():
        if spec.required and spec.default is None and name not in d.params:
            out.append(Diagnostic(el, f"missing parameter {name!r} for type {d.type}"))
        value = d.params.get(name)
        if value is not None and spec.dimension.startswith("choice:"):
            if str(value) not in spec.dimension[7:].split("|") and not (
                name == "carrier" and str(value) in CARRIER_ALIASES
            ):
                out.append(Diagnostic(el, f"parameter {name}={value!r} not one of {spec.dimension[7:]}"))
    for name in d.params:
        if name not in table:
            out.append(Diagnostic(el, f"unknown parameter {name!r} for type {d.type}"))

    if d.type == "battery":
        if d.f_min > 0 or d.f_max < 0:
            out.append(Diagnostic(el, "battery needs f_min <= 0 <= f_max"))
    elif not 0 <= d.f_min <= d.f_max:
        out.append(Diagnostic(el, "need 0 <= f_min <= f_max"))
    if d.startup_delay < 0:
        out.append(Diagnostic(el, "startup delay must be >= 0"))
    for name in ("reserve_factor", "load_reserve_factor"):
        if not 0 <= getattr(d, name) <= 1:
            out.append(Diagnostic(el, f"{name} must lie in [0, 1]"))
    if (d.ramp_up is not None or d.ramp_down is not None) and d.f_max == 0:
        out.append(Diagnostic(el, "ramp limits need f_max > 0"))
    if d.penalty is not None:
        _check_points(d.penalty.points, "penalty curve", el, out)
        if len(d.penalty.points) < 2:
            out.append(Diagnostic(el, "penalty curve needs at least two points"))
    for name in ("eta", "eta_heat"):
        v = d.params.get(name)
        if v is None:
            continue
        upper = np.inf if d.type == "heater" else 1.0
        if d.type != "heater" and name == "eta_heat" and not 0 <= float(v) <= 1:
            out.append(Diagnostic(el, f"{name} must lie in [0, 1]"))
        elif name == "eta" and not 0 < float(v) <= upper:
            out.append(Diagnostic(el, f"{name} must lie in (0, {upper:g}]"))

    if d.type == "well":
        wc = d.params.get("water_cut")
        if wc is not None and not 0 <= float(wc) < 1:
            out.append(Diagnostic(el, "water_cut must lie in [0, 1)"))
        gor = d.params.get("gor")
        if gor is not None and float(gor) < 0:
            out.append(Diagnostic(el, "gor must be >= 0"))
    if d.type in STORAGE_TYPES:
        e_min, e_max = d.param("E_min"), d.param("E_max")
        if e_min is not None and e_max is not None and float(e_min) > float(e_max):
            out.append(Diagnostic(el, "need E_min <= E_max"))
        if d.initial_storage is not None and e_max is not None and not (
            float(e_min or 0) <= d.initial_storage <= float(e_max)
        ):
            out.append(Diagnostic(el, "initial storage outside [E_min, E_max]"))
    if d.type == "battery":
        t_res = d.param("reserve_time")
        if t_res is not None and float(t_res) <= 0:
            out.append(Diagnostic(el, "reserve_time must be > 0"))
        m = d.param("big_m")
        if m is not None and float(m) <= d.f_max:
            out.append(Diagnostic(el, "big_m must exceed f_max"))
    if d.type == "gas_turbine":
        gas = model.carriers.get(GAS)
        if gas is None or gas.calorific_value is None:
            out.append(Diagnostic(el, "gas carrier needs calorific_value"))
        if d.f_max <= 0:
            out.append(Diagnostic(el, "gas turbine needs f_max > 0"))
    if d.type in ("electrolyser", "fuel_cell"):
        h2 = model.carriers.get(HYDROGEN)
        if h2 is None or h2.calorific_value is None:
            out.append(Diagnostic(el, "hydrogen carrier needs calorific_value"))
    if d.type == "compressor" and d.param("variant") == "gas":
        gas = model.carriers.get(GAS)
        if gas is None or gas.calorific_value is None:
            out.append(Diagnostic(el, "gas carrier needs calorific_value"))
    if d.type in ("compressor", "pump") and d.node in known_nodes:
        carrier = GAS if d.type == "compressor" else d.params.get("carrier")
        node = model.node(d.node)
        for term, key in (("in", "inlet_pressure"), ("out", "outlet_pressure")):
            if d.params.get(key) is None and (
                carrier is None or node.nominal_pressure(carrier_name(str(carrier)), term) is None
            ):
                out.append(Diagnostic(el, f"no nominal {term}let pressure (param {key} or node)"))


def profile_value(profile: Profile, t: int, horizon_offset: int, nowcast_window: int) -> float:
    """Value used at step ``t + horizon_offset`` in a plan made at step ``t``."""
    index = t + horizon_offset
    if index < 0 or index >= len(profile.forecast):
        raise OutOfDataError(profile.id, index, len(profile.forecast))
    if profile.nowcast is not None and horizon_offset < nowcast_window:
        return float(profile.nowcast[index])
    return float(profile.forecast[index])


def generate_forecast_from_nowcast(nowcast: Sequence[float], sigma: float, seed: int) -> np.ndarray:
    """Nowcast plus i.i.d. Gaussian noise, clipped at zero."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    nowcast = np.asarray(nowcast, dtype=float)
    if sigma == 0:
        return nowcast.copy()
    rng = np.random.default_rng(seed)
    return np.clip(nowcast + rng.normal(0.0, sigma, size=nowcast.shape), 0.0, None)


def forecast_view(profiles: Mapping[str, Profile], t0: int, horizon: int, nowcast_window: int
                  ) -> dict[str, np.ndarray]:
    """Per-profile values seen by the window starting at ``t0``."""
    return {
        pid: np.array([profile_value(p, t0, j, nowcast_window) for j in range(horizon)])
        for pid, p in profiles.items()
    }

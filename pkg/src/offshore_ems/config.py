"""YAML case files and CSV profile files.

A case file has the top-level sections ``simulation``, ``profiles``,
``carriers``, ``nodes``, ``edges`` and ``devices``. Every dimensional value
carries a unit suffix; durations given as times are converted to steps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .model import (
    DEVICE_PARAMS,
    EL,
    HEAT,
    Carrier,
    ConfigurationError,
    DeviceSpec,
    Diagnostic,
    Edge,
    EnergySystemModel,
    Node,
    PenaltyCurve,
    Profile,
    SimulationConfig,
    alias_carrier,
    carrier_name,
    generate_forecast_from_nowcast,
    validate_model,
)
from .units import UnitError, format_quantity, parse_quantity


class ConfigError(ConfigurationError):
    """A case file cannot be read; ``location`` names the offending element."""

    def __init__(self, message: str, location: str = "", line: int | None = None,
                 column: int | None = None):
        where = location
        if line is not None:
            where = f"{where} (line {line}{f', column {column}' if column is not None else ''})".strip()
        super().__init__(f"{where}: {message}" if where else message)
        self.location = location
        self.line = line
        self.column = column


class ValidationError(ConfigurationError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


class _Map(dict):
    line: int | None = None


class _Loader(yaml.SafeLoader):
    pass


def _construct_map(loader: _Loader, node: yaml.MappingNode) -> _Map:
    loader.flatten_mapping(node)
    seen = set()
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=True)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", line=key_node.start_mark.line + 1,
                              column=key_node.start_mark.column + 1)
        seen.add(key)
    m = _Map(loader.construct_mapping(node, deep=True))
    m.line = node.start_mark.line + 1
    return m


_Loader.add_constructor("tag:yaml.org,2002:map", _construct_map)


def _line(obj) -> int | None:
    return getattr(obj, "line", None)


# ------------------------------------------------------------------ schema

SIM_FIELDS = {
    "timestep": "time",
    "horizon": "steps",
    "reopt_interval": "steps",
    "nowcast_window": "steps",
    "span": "steps",
    "reserve_min": "power",
    "emission_cap": "emission_rate",
    "mip_gap": "dimensionless",
    "time_limit": "seconds",
    "seed": "int",
    "elastic": "bool",
    "s_base": "power",
    "tie_break": "dimensionless",
    "forecast_noise": "dimensionless",
}
CARRIER_FIELDS = {
    "calorific_value": "calorific",
    "co2_content": "mass_per_volume",
    "gravity": "dimensionless",
    "compressibility": "dimensionless",
    "temperature": "temperature",
    "density": "mass_per_volume",
    "darcy_friction": "dimensionless",
}
NODE_KEYS = {"id", "elevation", "pressure", "max_deviation", "reference"}
EDGE_KEYS = {
    "id", "carrier", "from", "to", "q_max", "bidirectional", "flow_model", "reactance",
    "losses", "diameter", "length", "base_temperature", "base_pressure",
}
DEVICE_KEYS = {
    "id", "node", "type", "f_max", "f_min", "ramp_up", "ramp_down", "start_stop",
    "startup_delay", "start_cost", "stop_cost", "storage_cost", "penalty", "profile",
    "reserve_factor", "load_reserve_factor", "params", "initial_on", "initial_flow",
    "initial_storage",
}
PENALTY_KEYS = {"points", "flow", "on_cost", "prep_cost"}
TOP_KEYS = {"simulation", "profiles", "carriers", "nodes", "edges", "devices"}


def _check_keys(obj, allowed: set[str], where: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"expected a mapping, got {type(obj).__name__}", where)
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} (allowed: {sorted(allowed)})", where, _line(obj))


def carrier_dimension(carrier: str) -> str:
    return "power" if carrier in (EL, HEAT) else "flow"


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a plain number, got {value!r}", where)
    return float(value)


def _steps(value, timestep: float, where: str) -> int:
    minutes = _q(value, "time", where)
    steps = minutes / timestep
    if abs(steps - round(steps)) > 1e-9:
        raise ConfigError(f"{value!r} is not a whole number of {timestep:g}-min steps", where)
    return int(round(steps))


def _q(value, dimension: str, where: str) -> float:
    try:
        return parse_quantity(value, dimension, where)
    except UnitError as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class Case:
    model: EnergySystemModel
    config: SimulationConfig
    profiles: dict[str, Profile]
    path: Path | None = None
    profile_file: str | None = None


def _parse_simulation(doc, where="simulation") -> SimulationConfig:
    doc = doc or {}
    _check_keys(doc, set(SIM_FIELDS), where)
    timestep = _q(doc.get("timestep", "5 min"), "time", f"{where}.timestep")
    kwargs: dict[str, Any] = {"timestep": timestep}
    for key, kind in SIM_FIELDS.items():
        if key == "timestep" or key not in doc or doc[key] is None:
            continue
        value, loc = doc[key], f"{where}.{key}"
        if kind == "steps":
            kwargs["n_steps" if key == "span" else key] = _steps(value, timestep, loc)
        elif kind == "seconds":
            kwargs[key] = _q(value, "hours", loc) * 3600.0
        elif kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"expected an integer, got {value!r}", loc)
            kwargs[key] = value
        elif kind == "bool":
            if not isinstance(value, bool):
                raise ConfigError(f"expected true/false, got {value!r}", loc)
            kwargs[key] = value
        else:
            kwargs[key] = _q(value, kind, loc)
    try:
        return SimulationConfig(**kwargs)
    except ConfigurationError as exc:
        raise ConfigError(str(exc), where, _line(doc)) from None


def _parse_carriers(doc) -> dict[str, Carrier]:
    out = {}
    if doc is None:
        return out
    if not isinstance(doc, dict):
        raise ConfigError("expected a mapping of carrier name to constants", "carriers")
    for name, consts in doc.items():
        where = f"carriers.{name}"
        try:
            kind = carrier_name(str(name))
        except ValueError:
            raise ConfigError(f"unknown carrier {name!r}", where, _line(doc)) from None
        consts = consts or {}
        _check_keys(consts, set(CARRIER_FIELDS), where)
        out[kind] = Carrier(kind, **{k: _q(v, CARRIER_FIELDS[k], f"{where}.{k}") for k, v in consts.items()})
    return out


def _parse_node(doc, i: int) -> Node:
    where = f"nodes[{i}]"
    _check_keys(doc, NODE_KEYS, where)
    if "id" not in doc:
        raise ConfigError("missing key 'id'", where, _line(doc))
    where = f"nodes[{i}] ({doc['id']})"
    pressure = {}
    for c, pair in (doc.get("pressure") or {}).items():
        _check_keys(pair, {"in", "out"}, f"{where}.pressure.{c}")
        p_in = _q(pair["in"], "pressure", f"{where}.pressure.{c}.in") if "in" in pair else None
        p_out = _q(pair["out"], "pressure", f"{where}.pressure.{c}.out") if "out" in pair else None
        if p_in is None and p_out is None:
            continue
        pressure[carrier_name(c)] = (p_in if p_in is not None else p_out, p_out if p_out is not None else p_in)
    deviation = {
        carrier_name(c): _number(v, f"{where}.max_deviation.{c}")
        for c, v in (doc.get("max_deviation") or {}).items()
    }
    return Node(
        id=str(doc["id"]),
        elevation=_q(doc.get("elevation", "0 m"), "elevation", f"{where}.elevation"),
        pressure=pressure,
        max_deviation=deviation,
        reference=bool(doc.get("reference", False)),
    )


def _parse_edge(doc, i: int) -> Edge:
    where = f"edges[{i}]"
    _check_keys(doc, EDGE_KEYS, where)
    for key in ("id", "carrier", "from", "to"):
        if key not in doc:
            raise ConfigError(f"missing key {key!r}", where, _line(doc))
    where = f"edges[{i}] ({doc['id']})"
    try:
        carrier = carrier_name(str(doc["carrier"]))
    except ValueError:
        raise ConfigError(f"unknown carrier {doc['carrier']!r}", where, _line(doc)) from None
    dim = carrier_dimension(carrier)
    losses = tuple(
        (_q(p[0], dim, f"{where}.losses[{j}]"), _q(p[1], dim, f"{where}.losses[{j}]"))
        for j, p in enumerate(doc.get("losses") or ())
    )
    opt = lambda key, dimension: _q(doc[key], dimension, f"{where}.{key}") if key in doc else None
    return Edge(
        id=str(doc["id"]),
        carrier=carrier,
        from_node=str(doc["from"]),
        to_node=str(doc["to"]),
        q_max=opt("q_max", dim),
        bidirectional=doc.get("bidirectional"),
        flow_model=str(doc.get("flow_model", "transport")),
        reactance=_number(doc["reactance"], f"{where}.reactance") if "reactance" in doc else None,
        losses=losses,
        diameter=opt("diameter", "length_mm"),
        length=opt("length", "length_km"),
        base_temperature=opt("base_temperature", "temperature"),
        base_pressure=opt("base_pressure", "pressure"),
    )


def _parse_params(dev_type: str, doc, where: str) -> dict:
    table = DEVICE_PARAMS.get(dev_type)
    if table is None:
        raise ConfigError(f"unknown device type {dev_type!r} (known: {sorted(DEVICE_PARAMS)})", where)
    doc = doc or {}
    _check_keys(doc, set(table), f"{where}.params")
    out = {}
    for key, value in doc.items():
        dim = table[key].dimension
        loc = f"{where}.params.{key}"
        if dim.startswith("choice:"):
            out[key] = str(value)
        else:
            out[key] = _q(value, dim, loc)
    return out


def _parse_device(doc, i: int, timestep: float) -> DeviceSpec:
    where = f"devices[{i}]"
    _check_keys(doc, DEVICE_KEYS, where)
    for key in ("id", "node", "type", "f_max"):
        if key not in doc:
            raise ConfigError(f"missing key {key!r}", where, _line(doc))
    where = f"devices[{i}] ({doc['id']})"
    dev_type = str(doc["type"])
    params = _parse_params(dev_type, doc.get("params"), where)
    probe = DeviceSpec(str(doc["id"]), str(doc["node"]), dev_type, 0.0, params=params)
    try:
        dim = carrier_dimension(alias_carrier(probe))
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc), where, _line(doc)) from None
    penalty = None
    if doc.get("penalty") is not None:
        pen = doc["penalty"]
        _check_keys(pen, PENALTY_KEYS, f"{where}.penalty")
        flow = str(pen.get("flow", "f"))
        pen_dim = dim if flow == "f" else carrier_dimension(carrier_name(flow.partition(".")[0]))
        points = tuple(
            (_q(p[0], pen_dim, f"{where}.penalty.points[{j}]"), _number(p[1], f"{where}.penalty.points[{j}]"))
            for j, p in enumerate(pen.get("points") or ())
        )
        penalty = PenaltyCurve(
            points=points,
            flow=flow,
            on_cost=_number(pen.get("on_cost", 0), f"{where}.penalty.on_cost"),
            prep_cost=_number(pen.get("prep_cost", 0), f"{where}.penalty.prep_cost"),
        )
    storage_dim = "energy" if dev_type == "battery" else "volume"
    opt = lambda key, dimension: _q(doc[key], dimension, f"{where}.{key}") if doc.get(key) is not None else None
    return DeviceSpec(
        id=str(doc["id"]),
        node=str(doc["node"]),
        type=dev_type,
        f_max=_q(doc["f_max"], dim, f"{where}.f_max"),
        f_min=_q(doc.get("f_min", f"0 {'MW' if dim == 'power' else 'Sm3/s'}"), dim, f"{where}.f_min"),
        ramp_up=opt("ramp_up", "ramp"),
        ramp_down=opt("ramp_down", "ramp"),
        start_stop=bool(doc.get("start_stop", False)),
        startup_delay=_steps(doc.get("startup_delay", "0 min"), timestep, f"{where}.startup_delay"),
        start_cost=_number(doc.get("start_cost", 0), f"{where}.start_cost"),
        stop_cost=_number(doc.get("stop_cost", 0), f"{where}.stop_cost"),
        storage_cost=_number(doc.get("storage_cost", 0), f"{where}.storage_cost"),
        penalty=penalty,
        profile=str(doc["profile"]) if doc.get("profile") is not None else None,
        reserve_factor=_number(doc.get("reserve_factor", 1.0), f"{where}.reserve_factor"),
        load_reserve_factor=_number(doc.get("load_reserve_factor", 0.0), f"{where}.load_reserve_factor"),
        params=params,
        initial_on=doc.get("initial_on"),
        initial_flow=opt("initial_flow", dim),
        initial_storage=opt("initial_storage", storage_dim),
    )


def parse_config_text(text: str, source: str = "<config>") -> tuple[EnergySystemModel, SimulationConfig]:
    """Parse without model validation (see :func:`load_config`)."""
    try:
        doc = yaml.load(text, Loader=_Loader)
    except ConfigError:
        raise
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(
            f"cannot parse: {getattr(exc, 'problem', exc)}", source,
            mark.line + 1 if mark else None, mark.column + 1 if mark else None,
        ) from None
    if doc is None:
        raise ConfigError("file is empty", source, 1, 1)
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping", source, 1, 1)
    _check_keys(doc, TOP_KEYS, "top level")
    config = _parse_simulation(doc.get("simulation"))
    profile_files = doc.get("profiles") or {}
    if profile_files:
        _check_keys(profile_files, {"file"}, "profiles")
        from dataclasses import replace

        config = replace(config, profile_files=(str(profile_files["file"]),))
    for key in ("nodes", "edges", "devices"):
        if doc.get(key) is not None and not isinstance(doc[key], list):
            raise ConfigError("expected a list", key, _line(doc))
    model = EnergySystemModel(
        carriers=_parse_carriers(doc.get("carriers")),
        nodes=tuple(_parse_node(n, i) for i, n in enumerate(doc.get("nodes") or ())),
        edges=tuple(_parse_edge(e, i) for i, e in enumerate(doc.get("edges") or ())),
        devices=tuple(_parse_device(d, i, config.timestep) for i, d in enumerate(doc.get("devices") or ())),
    )
    return model, config


def load_config(path: str | Path, profiles: Mapping[str, Profile] | None = None
                ) -> tuple[EnergySystemModel, SimulationConfig]:
    """Parse and validate a case file; raises :class:`ValidationError` listing every diagnostic."""
    path = Path(path)
    model, config = parse_config_text(path.read_text(), str(path))
    diagnostics = validate_model(model, profiles)
    if diagnostics:
        raise ValidationError(diagnostics)
    return model, config


# ------------------------------------------------------------------ serialization


def _fmt(value: float, dimension: str):
    return format_quantity(value, dimension)


def dump_config(model: EnergySystemModel, config: SimulationConfig, profile_file: str | None = None) -> str:
    """Case file text that loads back into an equal model and configuration."""
    dt = config.timestep
    steps = lambda n: f"{n * dt!r} min"
    sim: dict[str, Any] = {
        "timestep": _fmt(dt, "time"),
        "horizon": steps(config.horizon),
        "reopt_interval": steps(config.reopt_interval),
        "nowcast_window": steps(config.nowcast_window),
        "reserve_min": _fmt(config.reserve_min, "power"),
        "mip_gap": config.mip_gap,
        "seed": config.seed,
        "elastic": config.elastic,
        "s_base": _fmt(config.s_base, "power"),
        "tie_break": config.tie_break,
    }
    if config.n_steps is not None:
        sim["span"] = steps(config.n_steps)
    if config.emission_cap is not None:
        sim["emission_cap"] = _fmt(config.emission_cap, "emission_rate")
    if config.time_limit is not None:
        sim["time_limit"] = f"{config.time_limit!r} s"
    if config.forecast_noise is not None:
        sim["forecast_noise"] = config.forecast_noise
    doc: dict[str, Any] = {"simulation": sim}
    pfile = profile_file or (config.profile_files[0] if config.profile_files else None)
    if pfile:
        doc["profiles"] = {"file": pfile}
    doc["carriers"] = {
        kind: {
            f.name: _fmt(getattr(c, f.name), CARRIER_FIELDS[f.name])
            for f in fields(c)
            if f.name != "kind" and getattr(c, f.name) is not None
        }
        for kind, c in model.carriers.items()
    }
    nodes = []
    for n in model.nodes:
        entry: dict[str, Any] = {"id": n.id, "elevation": _fmt(n.elevation, "elevation")}
        if n.pressure:
            entry["pressure"] = {
                c: {"in": _fmt(p[0], "pressure"), "out": _fmt(p[1], "pressure")} for c, p in n.pressure.items()
            }
        if n.max_deviation:
            entry["max_deviation"] = dict(n.max_deviation)
        if n.reference:
            entry["reference"] = True
        nodes.append(entry)
    doc["nodes"] = nodes
    edges = []
    for e in model.edges:
        dim = carrier_dimension(e.carrier)
        entry = {"id": e.id, "carrier": e.carrier, "from": e.from_node, "to": e.to_node,
                 "flow_model": e.flow_model}
        if e.q_max is not None:
            entry["q_max"] = _fmt(e.q_max, dim)
        if e.bidirectional is not None:
            entry["bidirectional"] = e.bidirectional
        if e.reactance is not None:
            entry["reactance"] = e.reactance
        if e.losses:
            entry["losses"] = [[_fmt(a, dim), _fmt(b, dim)] for a, b in e.losses]
        for key, dimension in (("diameter", "length_mm"), ("length", "length_km"),
                               ("base_temperature", "temperature"), ("base_pressure", "pressure")):
            if getattr(e, key) is not None:
                entry[key] = _fmt(getattr(e, key), dimension)
        edges.append(entry)
    doc["edges"] = edges
    devices = []
    for d in model.devices:
        dim = carrier_dimension(alias_carrier(d))
        entry = {"id": d.id, "node": d.node, "type": d.type, "f_max": _fmt(d.f_max, dim),
                 "f_min": _fmt(d.f_min, dim)}
        for key in ("ramp_up", "ramp_down"):
            if getattr(d, key) is not None:
                entry[key] = _fmt(getattr(d, key), "ramp")
        if d.start_stop:
            entry["start_stop"] = True
            entry["startup_delay"] = steps(d.startup_delay)
        for key in ("start_cost", "stop_cost", "storage_cost", "reserve_factor", "load_reserve_factor"):
            entry[key] = getattr(d, key)
        if d.penalty is not None:
            p = d.penalty
            pen_dim = dim if p.flow == "f" else carrier_dimension(carrier_name(p.flow.partition(".")[0]))
            entry["penalty"] = {
                "flow": p.flow,
                "points": [[_fmt(x, pen_dim), y] for x, y in p.points],
                "on_cost": p.on_cost,
                "prep_cost": p.prep_cost,
            }
        if d.profile is not None:
            entry["profile"] = d.profile
        if d.params:
            table = DEVICE_PARAMS[d.type]
            entry["params"] = {
                k: (v if table[k].dimension.startswith("choice:") else _fmt(v, table[k].dimension))
                for k, v in d.params.items()
            }
        if d.initial_on is not None:
            entry["initial_on"] = bool(d.initial_on)
        if d.initial_flow is not None:
            entry["initial_flow"] = _fmt(d.initial_flow, dim)
        if d.initial_storage is not None:
            entry["initial_storage"] = _fmt(d.initial_storage, "energy" if d.type == "battery" else "volume")
        devices.append(entry)
    doc["devices"] = devices
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=100)


# ------------------------------------------------------------------ time series


class TimeSeriesError(ValueError):
    pass


def load_timeseries(path: str | Path) -> dict[str, Profile]:
    """Profiles from a CSV with a ``step`` column and ``<id>.forecast`` / ``<id>.nowcast`` columns."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TimeSeriesError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    dupes = sorted({h for h in header if header.count(h) > 1})
    if dupes:
        raise TimeSeriesError(f"{path}: duplicate columns {dupes}")
    if not header or header[0] != "step":
        raise TimeSeriesError(f"{path}: first column must be 'step'")
    columns: dict[str, list[float]] = {h: [] for h in header[1:]}
    for r, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise TimeSeriesError(f"{path}: row {r} has {len(row)} fields, header has {len(header)}")
        for name, cell in zip(header[1:], row[1:]):
            try:
                value = float(cell)
            except ValueError:
                raise TimeSeriesError(f"{path}: row {r}, column {name!r}: {cell!r} is not a number") from None
            if not math.isfinite(value):
                raise TimeSeriesError(f"{path}: row {r}, column {name!r}: value must be finite")
            if value < 0:
                raise TimeSeriesError(f"{path}: row {r}, column {name!r}: negative value {value}")
            columns[name].append(value)
    ids: dict[str, dict[str, list[float]]] = {}
    for name, values in columns.items():
        pid, _, variant = name.rpartition(".")
        if variant not in ("forecast", "nowcast") or not pid:
            raise TimeSeriesError(f"{path}: column {name!r} must be named <id>.forecast or <id>.nowcast")
        ids.setdefault(pid, {})[variant] = values
    out = {}
    for pid, variants in sorted(ids.items()):
        if "forecast" not in variants:
            raise TimeSeriesError(f"{path}: profile {pid!r} has no forecast column")
        out[pid] = Profile(pid, np.array(variants["forecast"]),
                           np.array(variants["nowcast"]) if "nowcast" in variants else None)
    return out


def write_timeseries(profiles: Mapping[str, Profile], path: str | Path):
    n = max((len(p) for p in profiles.values()), default=0)
    header = ["step"]
    cols = []
    for pid in sorted(profiles):
        p = profiles[pid]
        header.append(f"{pid}.forecast")
        cols.append(p.forecast)
        if p.nowcast is not None:
            header.append(f"{pid}.nowcast")
            cols.append(p.nowcast)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(n):
            w.writerow([i] + [repr(float(c[i])) for c in cols])


def apply_forecast_noise(profiles: Mapping[str, Profile], config: SimulationConfig) -> dict[str, Profile]:
    """Replace forecasts by nowcast plus seeded noise when the config asks for it."""
    if not config.forecast_noise:
        return dict(profiles)
    out = {}
    for i, pid in enumerate(sorted(profiles)):
        p = profiles[pid]
        if p.nowcast is None:
            out[pid] = p
            continue
        noisy = generate_forecast_from_nowcast(p.nowcast, config.forecast_noise, config.seed + i)
        out[pid] = Profile(pid, noisy, p.nowcast)
    return out


def load_case(path: str | Path) -> Case:
    """Case file plus its profiles (path relative to the case file), validated together."""
    path = Path(path)
    model, config = parse_config_text(path.read_text(), str(path))
    profiles: dict[str, Profile] = {}
    pfile = None
    if config.profile_files:
        pfile = config.profile_files[0]
        profiles = load_timeseries(path.parent / pfile)
    diagnostics = validate_model(model, profiles)
    if diagnostics:
        raise ValidationError(diagnostics)
    return Case(model, config, apply_forecast_noise(profiles, config), path, pfile)

"""Committed trajectories and the indicators derived from them.

Everything here works on plain DataFrames so that a result read back from disk
gives the same numbers as the in-memory one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar, Sequence

import numpy as np
import pandas as pd

from .model import (
    EL,
    GAS,
    HYDROGEN,
    OIL,
    WATER,
    DeviceSpec,
    EnergySystemModel,
    carrier_name,
    device_carriers,
    is_gas_combusting,
    serial_carriers,
)

GT_KPIS = ("emission_total_kg", "gt_running_hours", "gt_starts", "gt_stops")


class SpanMismatchError(ValueError):
    """Results cover different numbers of steps or step lengths."""


@dataclass
class SimulationResult:
    TABLES: ClassVar[tuple[str, ...]] = (
        "flows", "binaries", "storage", "edges", "nodes", "slack", "profiles_used",
    )

    flows: pd.DataFrame
    binaries: pd.DataFrame
    storage: pd.DataFrame
    edges: pd.DataFrame
    nodes: pd.DataFrame
    slack: pd.DataFrame
    profiles_used: pd.DataFrame
    windows: pd.DataFrame
    timestep: float  # minutes
    model: EnergySystemModel | None = field(default=None, repr=False)

    @classmethod
    def from_tables(cls, tables: dict[str, list[dict]], windows: list[dict], timestep: float,
                    model: EnergySystemModel | None = None) -> "SimulationResult":
        frames = {}
        n = len(tables["flows"])
        for name in cls.TABLES:
            df = pd.DataFrame(tables[name], index=pd.RangeIndex(n, name="step"))
            frames[name] = df.reindex(columns=sorted(df.columns)).astype(float)
        return cls(**frames, windows=pd.DataFrame(windows), timestep=timestep, model=model)

    @property
    def n_steps(self) -> int:
        return len(self.flows)

    @property
    def dt_hours(self) -> float:
        return self.timestep / 60.0

    def col(self, table: str, name: str) -> pd.Series:
        df = getattr(self, table)
        if name in df.columns:
            return df[name]
        return pd.Series(0.0, index=df.index, name=name)

    def fin(self, dev: str, carrier: str) -> pd.Series:
        return self.col("flows", f"{dev}:{carrier}:in")

    def fout(self, dev: str, carrier: str) -> pd.Series:
        return self.col("flows", f"{dev}:{carrier}:out")

    def on(self, spec: DeviceSpec) -> pd.Series:
        if not spec.start_stop:
            return pd.Series(1.0, index=self.flows.index)
        return self.col("binaries", f"{spec.id}:on")


def _model(result: SimulationResult, model: EnergySystemModel | None) -> EnergySystemModel:
    model = model or result.model
    if model is None:
        raise ValueError("this indicator needs the energy system model")
    return model


def alias_series(result: SimulationResult, spec: DeviceSpec) -> pd.Series:
    """Main flow ``f`` of a device, rebuilt from the committed in/out flows."""
    t, r, d = spec.type, result, spec.id
    if t == "well":
        return r.fout(d, GAS) - r.fin(d, GAS) + r.fout(d, OIL) + r.fout(d, WATER)
    if t == "separator":
        return r.fin(d, OIL) + r.fin(d, GAS) + r.fin(d, WATER)
    if t == "compressor":
        return r.fin(d, GAS)
    if t == "pump":
        return r.fin(d, carrier_name(str(spec.param("carrier"))))
    if t in ("gas_turbine", "battery", "fuel_cell"):
        return r.fout(d, EL)
    if t in ("heater", "electrolyser"):
        return r.fin(d, EL)
    if t == "hydrogen_storage":
        return r.fout(d, HYDROGEN)
    ins, outs = device_carriers(spec)
    return r.fout(d, outs[0]) if t == "source" else r.fin(d, ins[0])


def emission_series(result: SimulationResult, model: EnergySystemModel | None = None) -> pd.Series:
    """CO2 emission rate (kg/s) per committed step."""
    model = _model(result, model)
    total = pd.Series(0.0, index=result.flows.index, name="emission_kg_per_s")
    burners = [d for d in model.devices if is_gas_combusting(d)]
    if not burners:
        return total
    c_co2 = model.carrier(GAS).co2_content or 0.0
    for d in burners:
        total = total + c_co2 * (result.fin(d.id, GAS) - result.fout(d.id, GAS))
    return total.rename("emission_kg_per_s")


def gas_turbine_usage(result: SimulationResult, model: EnergySystemModel | None = None) -> pd.DataFrame:
    """Running hours, preparation hours, starts and stops per gas turbine."""
    model = _model(result, model)
    rows = {}
    for d in model.devices:
        if d.type != "gas_turbine":
            continue
        on = result.on(d)
        prep = result.col("binaries", f"{d.id}:prep")
        rows[d.id] = {
            "running_hours": float(on.sum() * result.dt_hours),
            "prep_hours": float(prep.sum() * result.dt_hours),
            "starts": int(round(result.col("binaries", f"{d.id}:start").sum())),
            "stops": int(round(result.col("binaries", f"{d.id}:stop").sum())),
        }
    return pd.DataFrame.from_dict(
        rows, orient="index", columns=["running_hours", "prep_hours", "starts", "stops"]
    )


def _profile(result: SimulationResult, spec: DeviceSpec) -> pd.Series:
    if spec.profile is None:
        return pd.Series(1.0, index=result.flows.index)
    return result.col("profiles_used", spec.profile)


def reserve_series(result: SimulationResult, model: EnergySystemModel | None = None) -> pd.DataFrame:
    """Online reserve per step, one column per contributing device plus ``total``."""
    model = _model(result, model)
    parts = {}
    for d in model.devices:
        ins, outs = device_carriers(d)
        term = pd.Series(0.0, index=result.flows.index)
        touched = False
        if EL in outs:
            if d.type == "battery":
                avail = result.col("storage", f"{d.id}:p_max")
            else:
                avail = d.f_max * _profile(result, d) * result.on(d)
            term = term + avail * d.reserve_factor - result.fout(d.id, EL)
            touched = True
        if EL in ins and d.load_reserve_factor:
            term = term + result.fin(d.id, EL) * d.load_reserve_factor
            touched = True
        if touched:
            parts[d.id] = term
    out = pd.DataFrame(parts, index=result.flows.index)
    out["total"] = out.sum(axis=1) if parts else 0.0
    return out


def storage_series(result: SimulationResult, model: EnergySystemModel | None = None
                   ) -> dict[str, pd.DataFrame]:
    model = _model(result, model)
    out = {}
    for d in model.devices:
        if d.type == "battery":
            c = EL
        elif d.type == "hydrogen_storage":
            c = HYDROGEN
        else:
            continue
        out[d.id] = pd.DataFrame(
            {
                "inflow": result.fin(d.id, c),
                "outflow": result.fout(d.id, c),
                "level": result.col("storage", f"{d.id}:E"),
            }
        )
    return out


def storage_residuals(result: SimulationResult, model: EnergySystemModel | None = None,
                      initial: dict[str, float] | None = None) -> pd.DataFrame:
    """Per-step storage balance residuals recomputed from committed flows and levels."""
    from .assembly import initial_boundary

    model = _model(result, model)
    if initial is None:
        initial = {k: b.storage_prev for k, b in initial_boundary(model).items()}
    out = {}
    for dev_id, df in storage_series(result, model).items():
        spec = model.device(dev_id)
        prev = df["level"].shift(1)
        if len(prev):
            prev.iloc[0] = initial[dev_id]
        if spec.type == "battery":
            eta = float(spec.param("eta"))
            delta = (eta * df["inflow"] - df["outflow"] / eta) * result.dt_hours
        else:
            delta = (df["inflow"] - df["outflow"]) * result.timestep * 60.0
        out[dev_id] = df["level"] - prev - delta
    return pd.DataFrame(out, index=result.flows.index)


def node_balance_residuals(result: SimulationResult, model: EnergySystemModel | None = None
                           ) -> pd.DataFrame:
    """Terminal balance residuals per (node, carrier), independent of the solver.

    Where in- and out-terminals are merged the two balances are added, which
    eliminates the merge flow.
    """
    model = _model(result, model)
    idx = result.flows.index
    out = {}
    for node in model.nodes:
        carriers = set()
        for d in model.devices_at(node.id):
            ins, outs = device_carriers(d)
            carriers.update(ins, outs)
        for e in model.edges:
            if node.id in (e.from_node, e.to_node):
                carriers.add(e.carrier)
        for c in sorted(carriers):
            dev_in = pd.Series(0.0, index=idx)
            dev_out = pd.Series(0.0, index=idx)
            for d in model.devices_at(node.id):
                dev_in = dev_in + result.fin(d.id, c)
                dev_out = dev_out + result.fout(d.id, c)
            dev_out = dev_out + result.col("slack", f"{node.id}:{c}:supply")
            dev_in = dev_in + result.col("slack", f"{node.id}:{c}:demand")
            arrive = pd.Series(0.0, index=idx)
            depart = pd.Series(0.0, index=idx)
            for e in model.edges:
                if e.carrier != c:
                    continue
                q = result.col("edges", f"{e.id}:q")
                if e.to_node == node.id:
                    arrive = arrive + q - result.col("edges", f"{e.id}:loss_plus")
                if e.from_node == node.id:
                    depart = depart + q + result.col("edges", f"{e.id}:loss_minus")
            r_in, r_out = arrive - dev_in, depart - dev_out
            if any(c in serial_carriers(d) for d in model.devices_at(node.id)):
                out[f"{node.id}:{c}:in"] = r_in
                out[f"{node.id}:{c}:out"] = r_out
            else:
                out[f"{node.id}:{c}"] = r_in - r_out
    return pd.DataFrame(out, index=idx)


def operating_cost(result: SimulationResult, model: EnergySystemModel | None = None) -> float:
    """Penalty-curve and start/stop costs of the committed steps."""
    from .assembly import evaluate_penalty

    model = _model(result, model)
    total = 0.0
    for d in model.devices:
        if d.penalty is not None:
            if d.penalty.flow == "f":
                flow = alias_series(result, d)
            else:
                carrier, _, side = d.penalty.flow.partition(".")
                c = carrier_name(carrier)
                flow = result.fin(d.id, c) if side == "in" else result.fout(d.id, c)
            on = result.on(d)
            prep = result.col("binaries", f"{d.id}:prep")
            total += sum(
                evaluate_penalty(d.penalty, f, o, p, tol=1e-6) for f, o, p in zip(flow, on, prep)
            )
        if d.start_stop:
            total += d.start_cost * result.col("binaries", f"{d.id}:start").sum()
            total += d.stop_cost * result.col("binaries", f"{d.id}:stop").sum()
    return float(total)


def kpi_summary(result: SimulationResult, model: EnergySystemModel | None = None) -> dict:
    model = _model(result, model)
    emission = emission_series(result, model)
    usage = gas_turbine_usage(result, model)
    reserve = reserve_series(result, model)
    dt_s = result.timestep * 60.0
    slack = float(result.slack.to_numpy().sum()) if result.slack.size else 0.0
    return {
        "n_steps": result.n_steps,
        "hours": result.n_steps * result.dt_hours,
        "emission_total_kg": float(emission.sum() * dt_s),
        "emission_mean_kg_per_s": float(emission.mean()) if len(emission) else 0.0,
        "gt_running_hours": float(usage["running_hours"].sum()),
        "gt_prep_hours": float(usage["prep_hours"].sum()),
        "gt_starts": int(usage["starts"].sum()),
        "gt_stops": int(usage["stops"].sum()),
        "reserve_min_observed": float(reserve["total"].min()) if len(reserve) else None,
        "operating_cost": operating_cost(result, model),
        "elastic_slack_total": slack,
        "gas_turbines": {
            dev: {k: (int(v) if k in ("starts", "stops") else float(v)) for k, v in row.items()}
            for dev, row in usage.to_dict(orient="index").items()
        },
    }


def compare_cases(results: Sequence[SimulationResult], names: Sequence[str] | None = None,
                  models: Sequence[EnergySystemModel] | None = None) -> pd.DataFrame:
    """KPIs per case and their ratios to the first case."""
    if len(results) < 2:
        raise ValueError("need at least two results to compare")
    names = list(names) if names is not None else [f"case{i}" for i in range(len(results))]
    first = results[0]
    for r, n in zip(results, names):
        if r.n_steps != first.n_steps or r.timestep != first.timestep:
            raise SpanMismatchError(
                f"case {n} covers {r.n_steps} steps of {r.timestep} min, "
                f"base covers {first.n_steps} steps of {first.timestep} min"
            )
    models = models or [None] * len(results)
    rows = []
    for r, m in zip(results, models):
        s = kpi_summary(r, m)
        rows.append({k: s[k] for k in GT_KPIS})
    table = pd.DataFrame(rows, index=pd.Index(names, name="case"))
    base = table.iloc[0]
    for k in GT_KPIS:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = table[k] / base[k] if base[k] != 0 else table[k].map(lambda v: 1.0 if v == 0 else np.inf)
        table[f"{k}_ratio"] = ratio.astype(float)
    return table

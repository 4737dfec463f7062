"""Small model builders and a solve helper shared by the test modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from offshore_ems.assembly import assemble
from offshore_ems.model import (
    Carrier,
    DeviceSpec,
    EnergySystemModel,
    Node,
    PenaltyCurve,
    Profile,
    SimulationConfig,
)
from offshore_ems.problem import HighsBackend

GAS_CARRIER = Carrier("gas", calorific_value=40.0, co2_content=2.5, gravity=0.6, compressibility=0.9,
                      temperature=300.0)
H2_CARRIER = Carrier("hydrogen", calorific_value=120.0)


def gas_turbine(dev_id: str, node: str = "n", start_stop: bool = True, ts: int = 2, **kw) -> DeviceSpec:
    params = {"fuel_A": kw.pop("A", 2.0), "fuel_B": kw.pop("B", 0.3), "eta_heat": kw.pop("eta_heat", 0.5)}
    kw.setdefault("penalty", PenaltyCurve(((0.0, 0.0), (10.0, 25.0)), flow="gas.in"))
    return DeviceSpec(dev_id, node, "gas_turbine", kw.pop("f_max", 21.8), f_min=kw.pop("f_min", 0.0),
                      start_stop=start_stop, startup_delay=ts if start_stop else 0, params=params, **kw)


def sink(dev_id: str, carrier: str, f_max: float, f_min: float | None = None, node: str = "n", **kw):
    return DeviceSpec(dev_id, node, "sink", f_max, f_min=f_max if f_min is None else f_min,
                      params={"carrier": carrier}, **kw)


def source(dev_id: str, carrier: str, f_max: float, node: str = "n", **kw):
    return DeviceSpec(dev_id, node, "source", f_max, params={"carrier": carrier}, **kw)


def single_node(*devices: DeviceSpec, carriers=None, node: Node | None = None) -> EnergySystemModel:
    carriers = carriers if carriers is not None else {"gas": GAS_CARRIER, "hydrogen": H2_CARRIER}
    return EnergySystemModel(carriers, (node or Node("n"),), (), tuple(devices))


def config(horizon: int = 3, **kw) -> SimulationConfig:
    kw.setdefault("reopt_interval", horizon)
    return SimulationConfig(horizon=horizon, **kw)


@dataclass
class Solved:
    problem: object
    solution: object

    def __getitem__(self, name: str) -> float:
        return self.solution.value(name)

    @property
    def objective(self) -> float:
        return self.solution.objective

    @property
    def status(self) -> str:
        return self.solution.status


def fix(problem, name: str, value: float):
    i = problem.index(name)
    problem.lb[i] = problem.ub[i] = float(value)


def solve(model, cfg, profiles=None, boundary=None, t0: int = 0, fixed: dict | None = None) -> Solved:
    problem = assemble(model, cfg, profiles or {}, boundary, t0)
    for name, value in (fixed or {}).items():
        fix(problem, name, value)
    return Solved(problem, HighsBackend().solve(problem))


def constant_profile(pid: str, value: float, n: int = 50) -> Profile:
    return Profile(pid, np.full(n, value))


@pytest.fixture
def fixtures_dir():
    from offshore_ems.fixtures import HERE

    return HERE

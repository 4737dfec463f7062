"""Regenerate the bundled case files and profiles in src/offshore_ems/fixtures.

Run from the repository root:  python3 scripts/make_fixtures.py
"""

from pathlib import Path

from offshore_ems.config import write_timeseries
from offshore_ems.fixtures import synthetic_wind, threshold_wind

OUT = Path(__file__).resolve().parents[1] / "src" / "offshore_ems" / "fixtures"

SIMULATION = """\
simulation:
  timestep: 5 min
  horizon: 2 h
  reopt_interval: 30 min
  nowcast_window: 10 min
  span: {span}
  reserve_min: 5 MW
  seed: 1
"""

CARRIERS = """\
carriers:
  gas: {calorific_value: 40 MJ/Sm3, co2_content: 2.34 kg/Sm3, density: 0.84 kg/Sm3}
  hydrogen: {calorific_value: 10.8 MJ/Sm3}
"""

NODES = """\
nodes:
  - {id: n_well}
  - {id: n_sep}
  - id: n_comp
    pressure: {gas: {in: 4 MPa, out: 8 MPa}}
    max_deviation: {gas: 0}
  - id: n_oilpump
    pressure: {oil: {in: 0.3 MPa, out: 3 MPa}}
  - id: n_waterpump
    pressure: {water: {in: 0.3 MPa, out: 10 MPa}}
  - {id: n_export}
  - {id: n_inject}
  - {id: n_power}
"""

EDGES = """\
edges:
  - {id: w_oil, carrier: oil, from: n_well, to: n_sep}
  - {id: w_gas, carrier: gas, from: n_well, to: n_sep}
  - {id: w_water, carrier: water, from: n_well, to: n_sep}
  - {id: s_gas, carrier: gas, from: n_sep, to: n_comp}
  - {id: s_oil, carrier: oil, from: n_sep, to: n_oilpump}
  - {id: s_water, carrier: water, from: n_sep, to: n_waterpump}
  - {id: c_export, carrier: gas, from: n_comp, to: n_export}
  - {id: c_fuel, carrier: gas, from: n_comp, to: n_power}
  - {id: p_oil, carrier: oil, from: n_oilpump, to: n_export}
  - {id: p_water, carrier: water, from: n_waterpump, to: n_inject}
  - {id: el_sep, carrier: electricity, from: n_power, to: n_sep}
  - {id: el_comp, carrier: electricity, from: n_power, to: n_comp}
  - {id: el_oil, carrier: electricity, from: n_power, to: n_oilpump}
  - {id: el_water, carrier: electricity, from: n_power, to: n_waterpump}
  - {id: heat_sep, carrier: heat, from: n_power, to: n_sep}
"""

GAS_TURBINE = """\
  - id: {id}
    node: n_power
    type: gas_turbine
    f_max: 21.8 MW
    f_min: 3.5 MW
    start_stop: true
    startup_delay: 30 min
    start_cost: {start_cost}
    initial_on: {initial_on}
    penalty:
      flow: gas.in
      points: [[0 Sm3/s, 0], [10 Sm3/s, 23.4]]
    params: {{fuel_A: 2.8, fuel_B: 0.2, eta_heat: 0.6}}
"""

PROCESS_DEVICES = """\
devices:
  - id: well
    node: n_well
    type: well
    f_max: 50.25 Sm3/s
    f_min: 50.25 Sm3/s
    params: {gor: 500, water_cut: 0.6, injection_ratio: 0, injection_pressure: 20 MPa,
             separator_pressure: 4 MPa}
  - id: separator
    node: n_sep
    type: separator
    f_max: 60 Sm3/s
    params: {heat_demand_factor: 0.02, el_demand_factor: 0.02}
  - id: compressor
    node: n_comp
    type: compressor
    f_max: 60 Sm3/s
    params: {variant: electric, eta: 0.75, heat_capacity_ratio: 1.3, compressibility: 0.9,
             gas_constant: 500 J/(kg K), inlet_temperature: 300 K, density: 0.84 kg/Sm3}
  - {id: oil_pump, node: n_oilpump, type: pump, f_max: 1 m3/s, params: {carrier: oil, eta: 0.75}}
  - {id: water_pump, node: n_waterpump, type: pump, f_max: 1 m3/s, params: {carrier: water, eta: 0.75}}
  - {id: gas_export, node: n_export, type: sink, f_max: 100 Sm3/s, params: {carrier: gas}}
  - {id: oil_export, node: n_export, type: sink, f_max: 1 m3/s, params: {carrier: oil}}
  - {id: water_injection, node: n_inject, type: sink, f_max: 1 m3/s, params: {carrier: water}}
  - {id: el_load, node: n_power, type: sink, f_max: 34 MW, f_min: 34 MW, params: {carrier: electricity}}
  - {id: heat_load, node: n_power, type: sink, f_max: 8 MW, f_min: 8 MW, params: {carrier: heat}}
  - {id: heat_dump, node: n_power, type: sink, f_max: 200 MW, params: {carrier: heat}}
  - {id: heater, node: n_power, type: heater, f_max: 20 MW, params: {eta: 1.0}}
"""

WIND = """\
  - {{id: wind, node: n_power, type: source, f_max: {capacity}, profile: wind, params: {{carrier: electricity}}}}
"""

BATTERY = """\
  - id: battery
    node: n_power
    type: battery
    f_max: 4 MW
    f_min: -4 MW
    storage_cost: 5
    initial_storage: 2 MWh
    params: {eta: 0.95, E_max: 4 MWh, reserve_time: 15 min}
"""

HYDROGEN = """\
  - {id: electrolyser, node: n_power, type: electrolyser, f_max: 10 MW, params: {eta: 0.7, eta_heat: 0.2}}
  - id: h2_storage
    node: n_power
    type: hydrogen_storage
    f_max: 2 Sm3/s
    storage_cost: 0.001
    params: {E_max: 100000 Sm3}
  - {id: fuel_cell, node: n_power, type: fuel_cell, f_max: 10 MW, params: {eta: 0.5, eta_heat: 0.3}}
"""


def gas_turbines(initial=(True, True, True), start_cost=5):
    return "".join(
        GAS_TURBINE.format(id=f"GT{i + 1}", start_cost=start_cost, initial_on=str(on).lower())
        for i, on in enumerate(initial)
    )


def leogo(extra: str = "", profiles: bool = False, span: str = "168 h") -> str:
    head = "# Representative offshore oil and gas platform, about 41.7 MW electric demand.\n"
    text = head + SIMULATION.format(span=span)
    if profiles:
        text += "profiles: {file: wind_week.csv}\n"
    return text + CARRIERS + NODES + EDGES + PROCESS_DEVICES + gas_turbines() + extra


def threshold_case(battery: bool) -> str:
    text = (
        "# Electricity and fuel gas only: 41 MW constant demand, two gas turbines online, a third one\n"
        "# available, 24 MW of wind alternating between 2.5 MW and 2.3 MW.\n"
        + SIMULATION.format(span="24 h")
        + "profiles: {file: wind_threshold.csv}\n"
        + CARRIERS
        + "nodes:\n  - {id: n_power}\nedges: []\ndevices:\n"
        + "  - {id: el_load, node: n_power, type: sink, f_max: 41 MW, f_min: 41 MW, params: {carrier: electricity}}\n"
        + "  - {id: fuel_gas, node: n_power, type: source, f_max: 20 Sm3/s, params: {carrier: gas}}\n"
        + "  - {id: heat_dump, node: n_power, type: sink, f_max: 200 MW, params: {carrier: heat}}\n"
        + WIND.format(capacity="24 MW")
        + gas_turbines((True, True, False), start_cost=1)
    )
    return text + BATTERY if battery else text


def main():
    files = {
        "leogo_base.yaml": leogo(span="168 h"),
        "leogo_a.yaml": leogo(WIND.format(capacity="24 MW"), profiles=True),
        "leogo_b.yaml": leogo(WIND.format(capacity="24 MW") + BATTERY, profiles=True),
        "leogo_c.yaml": leogo(WIND.format(capacity="96 MW") + HYDROGEN, profiles=True),
        "reserve_threshold.yaml": threshold_case(battery=False),
        "reserve_threshold_battery.yaml": threshold_case(battery=True),
    }
    for name, text in files.items():
        (OUT / name).write_text(text)
    write_timeseries({"wind": synthetic_wind()}, OUT / "wind_week.csv")
    wind = threshold_wind()
    write_timeseries({"wind": wind}, OUT / "wind_threshold.csv")


if __name__ == "__main__":
    main()

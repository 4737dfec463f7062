"""Quantity strings with explicit unit suffixes, e.g. ``"21.8 MW"`` or ``"30 min"``.

Every dimensional config value is converted to the internal unit of its
dimension on load. Bare numbers are only accepted for dimensionless fields.
"""

from __future__ import annotations

import re

# dimension -> (internal unit, {accepted unit: factor to internal})
DIMENSIONS: dict[str, tuple[str, dict[str, float]]] = {
    "power": ("MW", {"W": 1e-6, "kW": 1e-3, "MW": 1.0, "GW": 1e3, "MVA": 1.0}),
    "energy": ("MWh", {"kWh": 1e-3, "MWh": 1.0, "GWh": 1e3}),
    "flow": (
        "Sm3/s",
        {"Sm3/s": 1.0, "m3/s": 1.0, "Sm3/h": 1 / 3600, "m3/h": 1 / 3600, "Sm3/day": 1 / 86400},
    ),
    "volume": ("Sm3", {"Sm3": 1.0, "m3": 1.0}),
    "pressure": ("MPa", {"Pa": 1e-6, "kPa": 1e-3, "bar": 0.1, "MPa": 1.0}),
    "time": ("min", {"s": 1 / 60, "min": 1.0, "h": 60.0}),
    "hours": ("h", {"s": 1 / 3600, "min": 1 / 60, "h": 1.0}),
    "length_mm": ("mm", {"mm": 1.0, "cm": 10.0, "m": 1e3}),
    "length_km": ("km", {"m": 1e-3, "km": 1.0}),
    "elevation": ("m", {"m": 1.0, "km": 1e3}),
    "temperature": ("K", {"K": 1.0}),
    "calorific": ("MJ/Sm3", {"MJ/Sm3": 1.0, "kJ/Sm3": 1e-3}),
    "mass_per_volume": ("kg/Sm3", {"kg/Sm3": 1.0, "kg/m3": 1.0}),
    "emission_rate": ("kg/s", {"kg/s": 1.0, "kg/h": 1 / 3600, "t/h": 1000 / 3600}),
    "ramp": ("1/min", {"1/min": 1.0, "1/h": 1 / 60, "1/s": 60.0}),
    "gas_constant": ("J/(kg K)", {"J/(kg K)": 1.0, "J/kgK": 1.0}),
    "dimensionless": ("", {"": 1.0}),
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")


class UnitError(ValueError):
    pass


def parse_quantity(value, dimension: str, where: str = "") -> float:
    """Convert ``value`` to the internal unit of ``dimension``."""
    internal, table = DIMENSIONS[dimension]
    if isinstance(value, bool):
        raise UnitError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        if dimension == "dimensionless":
            return float(value)
        raise UnitError(f"{where}: missing unit for {value!r} (expected e.g. '{value} {internal}')")
    if not isinstance(value, str):
        raise UnitError(f"{where}: expected a quantity string, got {value!r}")
    match = _QUANTITY.match(value)
    if match is None:
        raise UnitError(f"{where}: cannot parse quantity {value!r}")
    number, unit = float(match.group(1)), match.group(2)
    if unit not in table:
        raise UnitError(
            f"{where}: unit {unit!r} not valid for {dimension} (accepted: {sorted(table)})"
        )
    return number * table[unit]


def format_quantity(value: float, dimension: str) -> str | float:
    internal, _ = DIMENSIONS[dimension]
    if dimension == "dimensionless":
        return float(value)
    return f"{value!r} {internal}"

"""Closed-form device and pipeline relations and their linearisations.

Pressures in MPa, flows in Sm3/s (or m3/s for liquids), power in MW.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import ConfigurationError

GRAVITY = 9.81  # m/s2
WEYMOUTH_CONSTANT = 4.3328e-8  # m3/(s MPa), with D in mm and L in km


class InfeasibleNominalError(ConfigurationError):
    """Nominal operating point of a linearisation gives no forward flow."""


def well_fractions(gor: float, water_cut: float) -> tuple[float, float, float]:
    """(water, oil, net gas) shares of the total wellstream flow."""
    if not 0 <= water_cut < 1:
        raise ValueError(f"water cut must lie in [0, 1), got {water_cut}")
    denom = 1.0 + gor * (1.0 - water_cut)
    return water_cut / denom, (1.0 - water_cut) / denom, gor * (1.0 - water_cut) / denom


def compressor_coefficients(
    heat_capacity_ratio: float,
    compressibility: float,
    gas_constant: float,
    inlet_temperature: float,
    density: float,
    eta: float,
) -> tuple[float, float]:
    """Exponent ``a`` and coefficient ``c`` (MJ/Sm3) of the adiabatic power formula."""
    k = heat_capacity_ratio
    if k <= 1:
        raise ConfigurationError("heat capacity ratio must exceed 1")
    a = (k - 1.0) / k
    c = density / eta / (k - 1.0) * compressibility * gas_constant * inlet_temperature * 1e-6
    return a, c


def _check_pressures(*pressures: float):
    if any(p <= 0 for p in pressures):
        raise ValueError(f"pressures must be positive, got {pressures}")


def compressor_power_nonlinear(q: float, p_in: float, p_out: float, a: float, c: float) -> float:
    _check_pressures(p_in, p_out)
    return c * ((p_out / p_in) ** a - 1.0) * q


@dataclass(frozen=True)
class CompressorLinearisation:
    """P = q_coef*q + p_out_coef*p_out + p_in_coef*p_in (no constant term)."""

    q_coef: float
    p_in_coef: float
    p_out_coef: float

    def __call__(self, q: float, p_in: float, p_out: float) -> float:
        return self.q_coef * q + self.p_in_coef * p_in + self.p_out_coef * p_out


def linearise_compressor(
    q_nom: float, p_in_nom: float, p_out_nom: float, a: float, c: float
) -> CompressorLinearisation:
    if p_in_nom <= 0 or p_out_nom <= 0:
        raise ConfigurationError(
            f"compressor nominal pressures must be positive, got {p_in_nom}, {p_out_nom}"
        )
    ratio_a = (p_out_nom / p_in_nom) ** a
    slope = c * a * ratio_a * q_nom
    return CompressorLinearisation(
        q_coef=c * (ratio_a - 1.0),
        p_in_coef=-slope / p_in_nom,
        p_out_coef=slope / p_out_nom,
    )


def compressor_power_linearized(
    q: float,
    p_in: float,
    p_out: float,
    q_nom: float,
    p_in_nom: float,
    p_out_nom: float,
    a: float,
    c: float,
) -> float:
    return linearise_compressor(q_nom, p_in_nom, p_out_nom, a, c)(q, p_in, p_out)


def pump_power(q: float, eta: float, p_in_nom: float, p_out_nom: float) -> float:
    if eta <= 0:
        raise ValueError(f"pump efficiency must be > 0, got {eta}")
    return (p_out_nom - p_in_nom) * q / eta


def weymouth_elevation(gravity: float, temperature: float, compressibility: float,
                       dz: float, length: float) -> tuple[float, float]:
    """Elevation exponent ``s`` and equivalent length ``L_e`` (km)."""
    s = 0.0684 * gravity * dz / (temperature * compressibility)
    if abs(s) < 1e-12:
        return s, length
    return s, length * math.expm1(s) / s


def weymouth_k(
    diameter: float,
    equivalent_length: float,
    gravity: float,
    temperature: float,
    compressibility: float,
    base_temperature: float,
    base_pressure: float,
) -> float:
    return (
        WEYMOUTH_CONSTANT
        * base_temperature
        / base_pressure
        * (gravity * temperature * equivalent_length * compressibility) ** -0.5
        * diameter ** (8.0 / 3.0)
    )


def weymouth_flow(p1: float, p2: float, k: float, s: float = 0.0) -> float:
    return k * math.sqrt(p1**2 - math.exp(s) * p2**2)


@dataclass(frozen=True)
class WeymouthLinearisation:
    """q = p1_coef*p1 + p2_coef*p2."""

    p1_coef: float
    p2_coef: float

    def __call__(self, p1: float, p2: float) -> float:
        return self.p1_coef * p1 + self.p2_coef * p2


def linearise_weymouth(p1_nom: float, p2_nom: float, k: float, s: float = 0.0) -> WeymouthLinearisation:
    es = math.exp(s)
    arg = p1_nom**2 - es * p2_nom**2
    if arg <= 0:
        raise InfeasibleNominalError(
            f"Weymouth nominal point gives no forward flow (p1^2 - e^s p2^2 = {arg:g})"
        )
    scale = k / math.sqrt(arg)
    return WeymouthLinearisation(p1_coef=scale * p1_nom, p2_coef=-scale * es * p2_nom)


def darcy_k(diameter_mm: float, length_km: float, density: float, friction: float) -> float:
    """Flow coefficient with q in m3/s and pressure drop in MPa."""
    d = diameter_mm * 1e-3
    length = length_km * 1e3
    k_si = math.sqrt(math.pi**2 * d**5 / (8.0 * friction * density * length))
    return k_si * 1e3  # sqrt(Pa) -> sqrt(MPa)


def darcy_pressure_drop(q: float, diameter_mm: float, length_km: float, density: float,
                        friction: float, dz: float = 0.0) -> float:
    """p2 - p1 (MPa) for flow q (m3/s) from the nonlinear relation."""
    d = diameter_mm * 1e-3
    length = length_km * 1e3
    dp_pa = -density * GRAVITY * dz - 8.0 * friction * density * length * q**2 / (math.pi**2 * d**5)
    return dp_pa * 1e-6


@dataclass(frozen=True)
class DarcyLinearisation:
    """p2 - p1 = -(q - q_nom) * slope + (p2_nom - p1_nom)."""

    k: float
    x: float
    q_nom: float
    slope: float
    dp_nom: float

    def pressure_change(self, q: float) -> float:
        return -(q - self.q_nom) * self.slope + self.dp_nom

    def flow(self, p1: float, p2: float) -> float:
        return self.q_nom - ((p2 - p1) - self.dp_nom) / self.slope


def linearise_darcy(p1_nom: float, p2_nom: float, k: float, density: float, dz: float = 0.0
                    ) -> DarcyLinearisation:
    arg = (p1_nom - p2_nom) - density * GRAVITY * dz * 1e-6
    if arg <= 0:
        raise InfeasibleNominalError(
            f"Darcy-Weisbach nominal point gives no forward flow (driving pressure {arg:g} MPa)"
        )
    x = math.sqrt(arg)
    return DarcyLinearisation(k=k, x=x, q_nom=k * x, slope=2.0 * x / k, dp_nom=p2_nom - p1_nom)

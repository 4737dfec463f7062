"""Static PNG charts of emission, gas turbine usage, reserve and storage series."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .kpi import (  # noqa: E402
    SimulationResult,
    compare_cases,
    emission_series,
    reserve_series,
    storage_series,
)
from .model import EnergySystemModel  # noqa: E402


def _hours(result: SimulationResult):
    return result.flows.index * result.dt_hours


def plot_bundle(result: SimulationResult, model: EnergySystemModel, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    hours = _hours(result)

    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(hours, emission_series(result, model).to_numpy())
    ax.set_xlabel("time (h)")
    ax.set_ylabel("CO2 emission rate (kg/s)")
    fig.tight_layout()
    written.append(out / "emissions.png")
    fig.savefig(written[-1], dpi=100)
    plt.close(fig)

    reserve = reserve_series(result, model)
    fig, ax = plt.subplots(figsize=(8, 3))
    parts = reserve.drop(columns="total")
    if len(parts.columns):
        ax.stackplot(hours, parts.clip(lower=0).to_numpy().T, labels=list(parts.columns))
        ax.legend(loc="upper right", fontsize="small")
    ax.plot(hours, reserve["total"].to_numpy(), color="k", lw=1)
    ax.set_xlabel("time (h)")
    ax.set_ylabel("online reserve (MW)")
    fig.tight_layout()
    written.append(out / "reserve.png")
    fig.savefig(written[-1], dpi=100)
    plt.close(fig)

    for dev_id, df in storage_series(result, model).items():
        fig, ax = plt.subplots(figsize=(8, 3))
        ax.plot(hours, df["inflow"].to_numpy(), label="in")
        ax.plot(hours, -df["outflow"].to_numpy(), label="out")
        ax.set_ylabel("flow")
        ax.legend(loc="upper left")
        level = ax.twinx()
        level.plot(hours, df["level"].to_numpy(), color="k", lw=1)
        level.set_ylabel("filling level")
        ax.set_xlabel("time (h)")
        fig.tight_layout()
        written.append(out / f"storage_{dev_id}.png")
        fig.savefig(written[-1], dpi=100)
        plt.close(fig)
    return written


def plot_comparison(results: Sequence[SimulationResult], names: Sequence[str],
                    models: Sequence[EnergySystemModel], out_dir: str | Path) -> Path:
    table = compare_cases(results, names, models)
    fig, axes = plt.subplots(1, 4, figsize=(12, 3))
    labels = {
        "emission_total_kg": "CO2 emitted (t)",
        "gt_running_hours": "GT running hours",
        "gt_starts": "GT starts",
        "gt_stops": "GT stops",
    }
    for ax, (key, label) in zip(axes, labels.items()):
        values = table[key] / (1000.0 if key == "emission_total_kg" else 1.0)
        ax.bar(list(table.index), values.to_numpy())
        ax.set_title(label, fontsize="small")
    fig.tight_layout()
    path = Path(out_dir) / "comparison.png"
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path

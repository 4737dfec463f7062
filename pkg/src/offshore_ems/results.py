"""Result bundles: a directory of CSV series plus JSON summaries."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import pandas as pd

from .kpi import SimulationResult, kpi_summary
from .model import EnergySystemModel, Profile, SimulationConfig

BUNDLE_VERSION = 1
METADATA = "metadata.json"
KPIS = "kpis.json"
WINDOWS = "windows.csv"
CONFIG = "config.yaml"
PROFILES = "profiles.csv"


class BundleExistsError(FileExistsError):
    pass


def config_hash(text: str | bytes) -> str:
    if isinstance(text, str):
        text = text.encode()
    return hashlib.sha256(text).hexdigest()


def _package_version() -> str:
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def write_results(
    result: SimulationResult,
    directory: str | Path,
    model: EnergySystemModel,
    config: SimulationConfig,
    profiles: dict[str, Profile] | None = None,
    source_text: str | None = None,
    force: bool = False,
) -> Path:
    """Write a self-contained bundle; refuses a non-empty directory unless ``force``."""
    from .config import dump_config, write_timeseries

    out = Path(directory)
    if out.exists() and any(out.iterdir()) and not force:
        raise BundleExistsError(f"{out} exists and is not empty (use --force to overwrite)")
    out.mkdir(parents=True, exist_ok=True)
    config_text = dump_config(model, config, PROFILES if profiles else None)
    (out / CONFIG).write_text(config_text)
    if profiles:
        write_timeseries(profiles, out / PROFILES)
    for name in SimulationResult.TABLES:
        getattr(result, name).to_csv(out / f"{name}.csv", lineterminator="\n")
    result.windows.to_csv(out / WINDOWS, index=False, lineterminator="\n")
    kpis = kpi_summary(result, model)
    (out / KPIS).write_text(json.dumps(kpis, indent=2, sort_keys=True) + "\n")
    meta = {
        "bundle_version": BUNDLE_VERSION,
        "package_version": _package_version(),
        "config_sha256": config_hash(source_text if source_text is not None else config_text),
        "seed": config.seed,
        "n_steps": result.n_steps,
        "timestep_min": result.timestep,
    }
    (out / METADATA).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out


def read_results(directory: str | Path) -> tuple[SimulationResult, EnergySystemModel, dict, dict]:
    """(result, model, kpis, metadata) of a bundle written by :func:`write_results`."""
    from .config import parse_config_text

    d = Path(directory)
    meta = json.loads((d / METADATA).read_text())
    kpis = json.loads((d / KPIS).read_text())
    model, _ = parse_config_text((d / CONFIG).read_text(), str(d / CONFIG))
    frames = {}
    for name in SimulationResult.TABLES:
        df = pd.read_csv(d / f"{name}.csv", index_col="step", float_precision="round_trip")
        frames[name] = df.astype(float)
    try:
        windows = pd.read_csv(d / WINDOWS, float_precision="round_trip")
    except pd.errors.EmptyDataError:
        windows = pd.DataFrame()
    result = SimulationResult(**frames, windows=windows, timestep=float(meta["timestep_min"]), model=model)
    return result, model, kpis, meta

"""Bundled example cases and the generators of their synthetic profiles.

``leogo_base.yaml`` and its variations ``leogo_a`` (wind), ``leogo_b`` (wind and
battery) and ``leogo_c`` (large wind and hydrogen) describe a representative
oil and gas platform; ``reserve_threshold.yaml`` is a small electricity-only
case with blocky wind used to probe the reserve rule.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..model import Profile, generate_forecast_from_nowcast

HERE = Path(__file__).parent

CASES = ("leogo_base", "leogo_a", "leogo_b", "leogo_c")


def fixture_path(name: str) -> Path:
    path = HERE / name
    if not path.suffix:
        path = path.with_suffix(".yaml")
    if not path.exists():
        raise FileNotFoundError(f"no bundled fixture {name!r} in {HERE}")
    return path


def synthetic_wind(n_steps: int = 2016 + 24, seed: int = 2016, sigma: float = 0.05) -> Profile:
    """Capacity-factor profile: a smoothed, bounded random walk plus a noisy forecast."""
    rng = np.random.default_rng(seed)
    x = np.empty(n_steps)
    level = 0.45
    for i in range(n_steps):
        level += rng.normal(0.0, 0.035) + 0.004 * (0.45 - level)
        level = min(max(level, 0.0), 1.0)
        x[i] = level
    kernel = np.ones(6) / 6
    nowcast = np.clip(np.convolve(x, kernel, mode="same"), 0.0, 1.0).round(6)
    forecast = generate_forecast_from_nowcast(nowcast, sigma, seed + 1).clip(max=1.0).round(6)
    return Profile("wind", forecast, nowcast)


def threshold_wind(capacity: float = 24.0) -> Profile:
    """One day of wind alternating between 2.5 MW and 2.3 MW in blocks of 24 to 48 steps."""
    blocks = [(2.5, 36), (2.3, 30), (2.5, 48), (2.3, 24), (2.5, 40), (2.3, 36), (2.5, 32), (2.3, 42), (2.5, 24)]
    values = np.concatenate([np.full(n, mw) for mw, n in blocks])
    pr = (values / capacity).round(12)
    return Profile("wind", pr, pr.copy())

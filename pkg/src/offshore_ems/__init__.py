"""Rolling-horizon MILP operational planning for offshore multi-carrier energy systems."""

from .assembly import assemble
from .config import load_case, load_config, load_timeseries
from .kpi import SimulationResult, compare_cases, kpi_summary
from .model import (
    Carrier,
    ConfigurationError,
    DeviceSpec,
    Edge,
    EnergySystemModel,
    Node,
    PenaltyCurve,
    Profile,
    SimulationConfig,
)
from .problem import HighsBackend, PlanningProblem, SolverError
from .results import read_results, write_results
from .simulation import run_simulation

__version__ = "0.1.0"

__all__ = [
    "Carrier",
    "ConfigurationError",
    "DeviceSpec",
    "Edge",
    "EnergySystemModel",
    "HighsBackend",
    "Node",
    "PenaltyCurve",
    "PlanningProblem",
    "Profile",
    "SimulationConfig",
    "SimulationResult",
    "SolverError",
    "assemble",
    "compare_cases",
    "kpi_summary",
    "load_case",
    "load_config",
    "load_timeseries",
    "read_results",
    "run_simulation",
    "write_results",
]

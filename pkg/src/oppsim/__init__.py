"""oppsim: deterministic benchmark simulator for opportunistic (DTN) routing."""

from .engine import RunResult, run, run_experiment, run_trace
from .scenario import ScenarioConfig, default_scenario, load_config

__all__ = [
    "RunResult",
    "ScenarioConfig",
    "default_scenario",
    "load_config",
    "run",
    "run_experiment",
    "run_trace",
]

__version__ = "0.1.0"

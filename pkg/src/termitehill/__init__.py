"""Termite-hill routing for wireless sensor networks, comparison baselines,
and a grid world of wood-gathering termites."""

from .errors import ConfigError, SchedulingError, UnknownNodeError
from .experiment import RunResult, Simulation, run_experiment, run_once
from .scenario import Scenario, load_scenario

__all__ = [
    "ConfigError", "SchedulingError", "UnknownNodeError",
    "RunResult", "Simulation", "run_experiment", "run_once",
    "Scenario", "load_scenario",
]
__version__ = "0.1.0"

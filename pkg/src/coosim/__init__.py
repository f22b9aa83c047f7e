"""coosim: closed-loop cell switching simulator for heterogeneous networks.

A deterministic system-level model of a two-layer mobile network whose
capacity cells are switched on and off by a fast local control loop, with
the loop's thresholds steered by a slow outage-regulating loop. Includes
full message accounting on the controller interfaces.
"""

from .apps import CoosPolicy, RappParams
from .engine import RunResult, SimConfig, Seeds, run, sweep_outage_goals
from .radio import PropagationConfig
from .scenario import (Scenario, ScenarioError, desk_params, dt_like_params,
                       generate_synthetic, load_scenario, save_scenario)
from .traffic import ArrivalConfig

__version__ = "0.1.0"

__all__ = [
    "ArrivalConfig",
    "CoosPolicy",
    "PropagationConfig",
    "RappParams",
    "RunResult",
    "Scenario",
    "ScenarioError",
    "Seeds",
    "SimConfig",
    "desk_params",
    "dt_like_params",
    "generate_synthetic",
    "load_scenario",
    "run",
    "save_scenario",
    "sweep_outage_goals",
    "__version__",
]

"""Closed-loop simulation: kinematics, scenarios and the scenario runner."""

from .physics import SimConfig, check_collision, step_physics
from .scenarios import ScenarioConfig, ScenarioError, make_scenario, scenario_from_dict, scenario_to_dict
from .runner import RunMetrics, Trace, compute_metrics, run_scenario

__all__ = [
    "SimConfig", "check_collision", "step_physics",
    "ScenarioConfig", "ScenarioError", "make_scenario", "scenario_from_dict", "scenario_to_dict",
    "RunMetrics", "Trace", "compute_metrics", "run_scenario",
]

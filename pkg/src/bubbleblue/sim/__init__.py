from .engine import Convergence, ConvergenceError, Metrics, RunResult, Simulator, converge, ground_truth_snapshot, run
from .scenario import (
    Action,
    LinkModel,
    Scenario,
    ScenarioError,
    inject_loss,
    load_scenario,
    parse_scenario,
    parse_time,
    partition,
)

__all__ = [
    "Action", "Convergence", "ConvergenceError", "LinkModel", "Metrics", "RunResult", "Scenario",
    "ScenarioError", "Simulator", "converge", "ground_truth_snapshot", "inject_loss", "load_scenario",
    "parse_scenario", "parse_time", "partition", "run",
]

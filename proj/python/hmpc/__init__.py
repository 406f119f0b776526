"""Hierarchical PM planning and L-MPC production scheduling."""

from ._hmpc import (
    PlantModel,
    Scenario,
    ScenarioError,
    SimResult,
    SimulationError,
    battery_line_scenario,
    compare_reports,
    load_scenario,
    parse_scenario,
    plan_day,
    run_closed_loop,
    save_scenario,
    solve_qp,
    synth_prices,
)

__all__ = [
    "PlantModel",
    "Scenario",
    "ScenarioError",
    "SimResult",
    "SimulationError",
    "battery_line_scenario",
    "compare_reports",
    "load_scenario",
    "parse_scenario",
    "plan_day",
    "run_closed_loop",
    "save_scenario",
    "solve_qp",
    "synth_prices",
]

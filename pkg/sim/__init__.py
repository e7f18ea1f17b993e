"""Deterministic multi-bot federation simulator."""

from pathlib import Path

from sim.invariants import InvariantReport, InvariantResult, check_invariants, summarize
from sim.runner import RandomScheduler, ReplayScheduler, Simulation, enumerate_small_schedules, run_scenario
from sim.scenario import BotSpec, Intractable, Mode, Scenario, ScenarioError, WorkItem
from sim.trace import EventTrace

SCENARIO_DIR = Path(__file__).parent / "scenarios"

__all__ = [
    "SCENARIO_DIR",
    "BotSpec",
    "EventTrace",
    "Intractable",
    "InvariantReport",
    "InvariantResult",
    "Mode",
    "RandomScheduler",
    "ReplayScheduler",
    "Scenario",
    "ScenarioError",
    "Simulation",
    "WorkItem",
    "check_invariants",
    "enumerate_small_schedules",
    "run_scenario",
    "summarize",
]

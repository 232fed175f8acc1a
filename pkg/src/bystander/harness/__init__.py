"""Scenario ingestion, batch simulation, evaluation metrics and the CLI."""

from .metrics import (
    EmptyBatchError,
    SweepRow,
    SweepTrial,
    false_filtering_rate,
    false_protection_rate,
    threshold_sweep,
    true_protection_rate,
)
from .reports import ReportError, load_report, write_report
from .runner import run_scenario, simulate
from .scenario import Scenario, ScenarioError, SessionTruth, load_scenario, realize

__all__ = [
    "EmptyBatchError",
    "ReportError",
    "Scenario",
    "ScenarioError",
    "SessionTruth",
    "SweepRow",
    "SweepTrial",
    "false_filtering_rate",
    "false_protection_rate",
    "load_report",
    "load_scenario",
    "realize",
    "run_scenario",
    "simulate",
    "threshold_sweep",
    "true_protection_rate",
    "write_report",
]

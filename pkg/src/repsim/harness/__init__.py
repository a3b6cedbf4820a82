"""Scenario runner, auditor, event-log persistence and replay."""

from repsim.harness.audit import audit
from repsim.harness.logio import check_log, parse_log, read_log
from repsim.harness.report import build_report, replay
from repsim.harness.runner import RunResult, World, execute, run
from repsim.harness.scenario import MISBEHAVIORS, BusinessSpec, Scenario, load_scenario

__all__ = [
    "MISBEHAVIORS", "BusinessSpec", "RunResult", "Scenario", "World", "audit", "build_report",
    "check_log", "execute", "load_scenario", "parse_log", "read_log", "replay", "run",
]

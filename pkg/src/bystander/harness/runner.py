"""Run every session of a scenario and write images plus a report."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from ..facegeom import write_ppm
from ..protocol import SessionReport, run_session
from .reports import write_report
from .scenario import Scenario, SessionTruth, realize

log = logging.getLogger(__name__)

REPORT_NAME = "report.json"


def run_one(scenario: Scenario, index: int) -> tuple[SessionReport, SessionTruth]:
    setup, net, truth = realize(scenario, index)
    return run_session(setup, net), truth


def run_scenario(scenario: Scenario, workers: int = 1) -> list[tuple[SessionReport, SessionTruth]]:
    """All sessions, in index order; sessions share nothing so ``workers > 1`` is safe."""
    indices = range(scenario.sessions)
    if workers <= 1:
        return [run_one(scenario, i) for i in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: run_one(scenario, i), indices))


def simulate(scenario: Scenario, out_dir, workers: int = 1) -> Path:
    """Write ``<session>.ppm`` per session and ``report.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sessions = run_scenario(scenario, workers)
    for report, _ in sessions:
        name = f"{report.session_id}.ppm"
        write_ppm(report.output, out / name)
        report.image_path = name
    path = out / REPORT_NAME
    write_report(path, scenario.name, sessions)
    log.info("wrote %d session(s) to %s", len(sessions), out)
    return path

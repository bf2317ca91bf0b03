"""
Full intrusion scenario
=======================

Runs the bundled end-to-end intrusion script: an emulated motion node
trips, the controller captures and recognizes a face, emails the owner,
sends an SMS and places a call through the mock modem, streams video,
and stands down when the owner texts back "Found OK".
"""

import sys
import tempfile
from pathlib import Path

from homesentry.scenario import run_scenario_file

scenario = Path(__file__).resolve().parent.parent / "scenarios" / "pir-intrusion.json"
workdir = tempfile.mkdtemp(prefix="intrusion-demo-")

print(f"running {scenario.name} (workdir {workdir}) ...")
report = run_scenario_file(scenario, workdir)

print(f"\nactions applied: {report.actions_applied}")
for result in report.results:
    marker = "ok  " if result.passed else "FAIL"
    print(f"  [{marker}] {result.assertion.kind:<24} {result.detail} "
          f"({result.elapsed_ms:.0f} ms)")

print("\nscenario passed" if report.passed else "\nscenario FAILED")
sys.exit(0 if report.passed else 1)

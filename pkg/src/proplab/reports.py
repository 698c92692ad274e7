"""Machine-readable experiment reports: schema-versioned JSON plus flat CSV."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

__all__ = ["Report", "write_report", "load_schema", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1


@dataclass
class Report:
    command: str
    config: dict
    seed: int
    results: dict = field(default_factory=dict)
    criteria: list = field(default_factory=list)
    csv_rows: list = field(default_factory=list)
    csv_fields: list = field(default_factory=list)
    wall_time_s: float = 0.0

    def add_criterion(self, name: str, passed: bool, value=None, tolerance=None):
        self.criteria.append(
            {
                "name": name,
                "passed": bool(passed),
                "value": None if value is None else float(value),
                "tolerance": None if tolerance is None else float(tolerance),
            }
        )

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.criteria)

    def as_dict(self) -> dict:
        from . import __version__

        return {
            "schema_version": SCHEMA_VERSION,
            "tool": "proplab",
            "tool_version": __version__,
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "wall_time_s": self.wall_time_s,
            "passed": self.passed,
            "results": self.results,
            "criteria": self.criteria,
        }


def _stringify(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def write_report(report: Report, output_dir) -> tuple:
    """Write report.json and report.csv; returns both paths.

    CSV floats use shortest round-trip repr, so reruns with identical inputs
    are byte-identical.  Wall time lives only in the JSON document.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "report.json"
    csv_path = out / "report.csv"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    fields = report.csv_fields or (list(report.csv_rows[0]) if report.csv_rows else ["name"])
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        writer.writerow(fields)
        for row in report.csv_rows:
            writer.writerow([_stringify(row.get(f, "")) for f in fields])
    return json_path, csv_path


def load_schema() -> dict:
    with resources.files("proplab.schema").joinpath("report.schema.json").open("rb") as fh:
        return json.load(fh)


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0

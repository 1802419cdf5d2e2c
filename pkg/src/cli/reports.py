"""Machine-readable reports.

JSON reports carry ``schema_version`` and write every float with 17
significant digits, so the same run always produces the same bytes. CSV
reports use the long format ``run_id,quantity,coordinate,value``; vector and
table entries get their index as coordinate ("3", "1:0"), scalars an empty
one. Only numeric quantities appear in CSV.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from enum import Enum, StrEnum
from pathlib import Path

import numpy as np

from cli.config import OutputFormat
from models import Command

SCHEMA_VERSION = 1
CSV_COLUMNS = ("run_id", "quantity", "coordinate", "value")


class Status(StrEnum):
    PASS = "pass"
    FAIL = "fail"
    MEASURED = "measured"


@dataclass
class RunResult:
    run_id: str
    quantities: dict = field(default_factory=dict)


@dataclass
class Report:
    command: Command
    status: Status
    runs: list[RunResult]
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "command": self.command.value,
            "status": self.status.value,
            "config": self.config,
            "runs": [{"run_id": r.run_id, **r.quantities} for r in self.runs],
        }


def format_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def encode_json(obj, indent: int = 0) -> str:
    """Deterministic JSON text; lists of scalars stay on one line."""
    pad = "  " * (indent + 1)
    match obj:
        case None:
            return "null"
        case bool() | np.bool_():
            return "true" if obj else "false"
        case Enum():
            return json.dumps(str(obj.value))
        case str():
            return json.dumps(str(obj))
        case int() | np.integer():
            return str(int(obj))
        case float() | np.floating():
            return format_float(float(obj))
        case np.ndarray():
            return encode_json(obj.tolist(), indent)
        case dict():
            if not obj:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {encode_json(v, indent + 1)}" for k, v in obj.items()]
            return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
        case list() | tuple():
            parts = [encode_json(v, indent + 1) for v in obj]
            if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
                return "[" + ", ".join(parts) + "]"
            return "[\n" + ",\n".join(pad + p for p in parts) + "\n" + "  " * indent + "]"
    raise TypeError(f"cannot encode {type(obj).__name__} in a report")


def report_to_json(report: Report) -> str:
    return encode_json(report.to_dict()) + "\n"


def _csv_rows(run_id: str, name: str, value):
    if isinstance(value, (bool, np.bool_, str, Enum)) or value is None:
        return
    if isinstance(value, (int, float, np.integer, np.floating)):
        yield (run_id, name, "", format_float(float(value)))
        return
    arr = np.asarray(value, dtype=float)
    for idx in np.ndindex(arr.shape):
        yield (run_id, name, ":".join(str(i) for i in idx), format_float(float(arr[idx])))


def report_to_csv(report: Report) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for run in report.runs:
        for name, value in run.quantities.items():
            if isinstance(value, dict):
                for sub, inner in value.items():
                    writer.writerows(_csv_rows(run.run_id, f"{name}.{sub}", inner))
            else:
                writer.writerows(_csv_rows(run.run_id, name, value))
    return buffer.getvalue()


def render(report: Report, output_format: OutputFormat) -> str:
    if output_format is OutputFormat.CSV:
        return report_to_csv(report)
    return report_to_json(report)


def write_output(text: str, path: str | None) -> None:
    """Write once at the end of a command; stdout when no path is given."""
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text)

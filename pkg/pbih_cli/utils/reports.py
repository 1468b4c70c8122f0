"""CSV and JSON report files."""

import csv
import json
import math
from collections.abc import Mapping, Sequence
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

from pbih_cli.config import REPORT_FORMATS, SIGNIFICANT_DIGITS
from pbih_cli.utils.logger import get_logger

logger = get_logger(__name__)


def format_real(value: float) -> str:
    """Shortest text that round-trips at the report precision."""
    return f"{float(value):.{SIGNIFICANT_DIGITS}g}"


def to_jsonable(value: Any) -> Any:
    """Plain JSON types for numpy values, enums, paths and non-finite floats."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_csv(path: Path, columns: Sequence[str], rows: Sequence[Mapping[str, Any]]) -> None:
    """One header row, then one row per record in order; reals as %.17g."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                [
                    format_real(row[c]) if isinstance(row[c], (float, np.floating)) else row[c]
                    for c in columns
                ]
            )
    logger.debug("Wrote %d CSV rows to %s", len(rows), path)


def write_json(path: Path, data: Mapping[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(data), f, indent=2)
        f.write("\n")
    logger.debug("Report saved to %s", path)


def save_report(report: Mapping[str, Any], path: Path, fmt: str) -> Path:
    """Write ``report`` (with ``columns`` and ``records``) as CSV or JSON."""
    if fmt not in REPORT_FORMATS:
        choices = ", ".join(REPORT_FORMATS)
        raise ValueError(f"Invalid report format: {fmt!r}; choose from: {choices}")
    if fmt == "csv":
        write_csv(path, report["columns"], report["records"])
    else:
        write_json(path, report)
    logger.info("Wrote %s report to %s", fmt, path)
    return path


def load_report(path: Path) -> dict[str, Any]:
    """Read a JSON report back. Raises ValueError on unreadable files."""
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (json.JSONDecodeError, OSError) as e:
        raise ValueError(f"Could not load report {path}: {e}") from e
    if not isinstance(data, dict) or not isinstance(data.get("records"), list):
        raise ValueError(f"{path} is not a pbih report")
    return data


def load_csv_records(path: Path) -> list[dict[str, float]]:
    """Read the numeric rows of a CSV report."""
    with open(path, encoding="utf-8", newline="") as f:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(f)]

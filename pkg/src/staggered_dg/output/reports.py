"""Deterministic CSV and YAML writers for run reports."""

import csv
import math
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from staggered_dg.models.reports import ERROR_COLUMNS, ErrorReport, StabilityReport

ERROR_HEADER = (
    ["h"]
    + [f"{prefix}_{column}" for column in ERROR_COLUMNS for prefix in ("err", "ord")]
    + ["div_uB_max", "iface_jump_max", "div_uD_residual"]
)
STABILITY_HEADER = [
    "step", "t", "c_norm", "z_norm", "influx", "outflux", "mass", "ledger", "energy_residual",
]


def number(value: float | None) -> str:
    """Fixed-width scientific notation; missing or NaN values print as NA."""
    if value is None or math.isnan(value):
        return "NA"
    return f"{value:.6e}"


def error_report_rows(report: ErrorReport) -> list[list[str]]:
    """Rows of the ErrorReport CSV, header first."""
    orders = {column: report.orders(column) for column in ERROR_COLUMNS}
    rows = [list(ERROR_HEADER)]
    for i, row in enumerate(report.rows):
        line = [number(row.h)]
        for column in ERROR_COLUMNS:
            line += [number(row.errors.get(column)), number(orders[column][i])]
        cons = row.conservation
        if cons is None:
            line += ["NA", "NA", "NA"]
        else:
            line += [number(cons.div_brinkman_max), number(cons.interface_jump_max),
                     number(cons.div_darcy_max)]
        rows.append(line)
    return rows


def _write_rows(rows: list[list[str]], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        csv.writer(handle, lineterminator="\n").writerows(rows)
    return path


def write_error_report(report: ErrorReport, path: Path | str) -> Path:
    return _write_rows(error_report_rows(report), path)


def write_stability_report(report: StabilityReport, path: Path | str) -> Path:
    """One row per time step."""
    rows = [list(STABILITY_HEADER)]
    for r in report.records:
        rows.append([str(r.step), number(r.t), number(r.c_norm), number(r.z_norm),
                     number(r.influx), number(r.outflux), number(r.mass), number(r.ledger),
                     number(r.energy_residual)])
    return _write_rows(rows, path)


def stability_summary(report: StabilityReport) -> dict[str, Any]:
    return {
        "lhs": float(report.lhs),
        "rhs": float(report.rhs),
        "ratio": float(report.ratio),
        "steps": len(report.records),
        "max_ledger": float(report.max_ledger()),
        "max_energy_residual": float(report.max_energy_residual()),
    }


def plain(value: Any) -> Any:
    """Numpy scalars and arrays as built-in Python values, recursively."""
    if isinstance(value, dict):
        return {key: plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_summary(data: dict[str, Any], path: Path | str) -> Path:
    """YAML summary with sorted keys; numpy values are converted first."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(plain(data), sort_keys=True, default_flow_style=False))
    return path

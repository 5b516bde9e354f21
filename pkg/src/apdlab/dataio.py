"""Deterministic CSV and JSON serialization for sweep data and results.

All text output uses '.' as the decimal separator, '\\n' line endings,
and shortest-roundtrip float formatting regardless of locale, so a rerun
with identical inputs produces byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .calibrate import FitResult, SweepRecord
from .dead_time_sim import PulseTrainConfig, SimResult
from .errors import ConfigurationError
from .tmd import TransferMatrix

# Column order for one simulation result; sweep tables prepend the sweep
# axis as x/y/y_err so the file feeds straight into the fit commands.
SIM_COLUMNS = (
    "f_rep_hz",
    "mu_per_pulse",
    "dead_time_s",
    "dark_rate_hz",
    "duration_s",
    "seed",
    "clicks",
    "rate_hz",
    "stderr_hz",
)


def format_value(value) -> str:
    """Shortest exact decimal form; integers stay integers."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def csv_text(columns, rows) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def sim_result_row(config: PulseTrainConfig, result: SimResult) -> list:
    return [
        config.f_rep,
        config.mu_per_pulse,
        config.dead_time,
        config.dark_rate,
        config.duration,
        config.seed,
        result.clicks,
        result.count_rate,
        result.stderr_rate,
    ]


def records_from_csv(text: str) -> list[SweepRecord]:
    """Parse sweep records from CSV with columns x, y [, y_err, n_samples]."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise ConfigurationError("empty CSV input")
    fields = [name.strip() for name in reader.fieldnames]
    if "x" not in fields or "y" not in fields:
        raise ConfigurationError(f"CSV must have 'x' and 'y' columns, found {fields}")
    records = []
    for line_no, row in enumerate(reader, start=2):
        try:
            x = float(row["x"])
            y = float(row["y"])
            y_err = float(row["y_err"]) if row.get("y_err") not in (None, "") else None
            n_samples = (
                int(float(row["n_samples"])) if row.get("n_samples") not in (None, "") else None
            )
            records.append(SweepRecord(x=x, y=y, y_err=y_err, n_samples=n_samples))
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigurationError(f"bad CSV row at line {line_no}: {exc}") from exc
    if not records:
        raise ConfigurationError("CSV contains no data rows")
    return records


def records_to_csv(records) -> str:
    rows = []
    for r in records:
        rows.append([
            r.x,
            r.y,
            "" if r.y_err is None else r.y_err,
            "" if r.n_samples is None else r.n_samples,
        ])
    lines = ["x,y,y_err,n_samples"]
    for row in rows:
        lines.append(",".join("" if v == "" else format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def matrix_to_csv(matrix: TransferMatrix) -> str:
    """Row-major CSV with a leading dimension header."""
    rows, cols = matrix.entries.shape
    lines = [f"# kind={matrix.kind} rows={rows} cols={cols}"]
    for row in matrix.entries:
        lines.append(",".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def matrix_from_csv(text: str) -> TransferMatrix:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ConfigurationError("matrix CSV must start with a '# kind=... rows=... cols=...' header")
    header = dict(part.split("=") for part in lines[0].lstrip("# ").split())
    entries = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    if entries.shape != (int(header["rows"]), int(header["cols"])):
        raise ConfigurationError("matrix CSV dimensions do not match its header")
    return TransferMatrix(entries, kind=header.get("kind", "convolution"))


def fit_report_dict(fit: FitResult) -> dict:
    return {
        "params": dict(fit.params),
        "param_errs": dict(fit.param_errs),
        "residual_norm": fit.residual_norm,
        "converged": fit.converged,
        "n_iterations": fit.n_iterations,
        "window": fit.window,
        "message": fit.message,
    }


def json_text(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"

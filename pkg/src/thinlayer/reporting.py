"""Delimited and JSON persistence for runs and sweeps.

CSV numbers are written with 17 significant digits, which round-trips IEEE
doubles exactly; reading a report back therefore reproduces the run series
bit for bit, and rerunning an identical configuration must reproduce the
files byte for byte.  The JSON summary carries a metadata header (config
echo, package version, wall-clock stamp) and a flat map of per-check
booleans; the wall-clock lives only there, never in the CSVs.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
from importlib import metadata as _im
from pathlib import Path

import numpy as np

from .scenarios import ScenarioConfig
from .sweep import REPORT_COLUMNS, RunResult, SweepResult

FLOAT_FMT = "{:.17g}"


def _version() -> str:
    try:
        return _im.version("thinlayer")
    except _im.PackageNotFoundError:
        return "0+unknown"


# ---------------------------------------------------------------------------
# CSV


def write_series_csv(path, columns: dict, order=None) -> Path:
    """Column dict -> CSV; empty columns produce a header-only file."""
    path = Path(path)
    order = list(order if order is not None else columns.keys())
    lengths = {len(np.atleast_1d(np.asarray(columns[k]))) for k in order}
    if len(lengths) > 1:
        raise ValueError(f"ragged columns: lengths {sorted(lengths)}")
    n = lengths.pop() if lengths else 0
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(order)
        for i in range(n):
            wr.writerow([FLOAT_FMT.format(float(np.asarray(columns[k])[i]))
                         for k in order])
    return path


def read_series_csv(path) -> dict:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        cols = {k: [] for k in header}
        for row in rd:
            for k, v in zip(header, row):
                cols[k].append(float(v))
    return {k: np.asarray(v, dtype=float) for k, v in cols.items()}


def run_basename(run: RunResult) -> str:
    return f"{run.regime}_eps{run.eps:g}"


def write_run_reports(run: RunResult, outdir) -> dict:
    """The entropy report (fixed schema) and the extras file for one run."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    base = run_basename(run)
    report = write_series_csv(outdir / f"report_{base}.csv", run.series,
                              order=REPORT_COLUMNS)
    extras = dict(run.extras)
    extras["t"] = run.series["t"]
    order = ["t"] + [k for k in run.extras]
    extras_path = write_series_csv(outdir / f"extras_{base}.csv", extras,
                                   order=order)
    return {"report": report, "extras": extras_path}


# ---------------------------------------------------------------------------
# JSON


def _json_default(obj):
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def check_booleans(sweep: SweepResult) -> dict:
    """Flat name -> bool map over every run check and sweep verdict."""
    out = {}
    for run in sweep.runs:
        base = run_basename(run)
        for name, chk in run.checks.items():
            out[f"{base}:{name}"] = bool(chk.get("ok", True))
    for regime, v in sweep.verdicts.items():
        out[f"{regime}:entropy_decreasing"] = bool(v["entropy_decreasing"])
        out[f"{regime}:entropy_ratio"] = bool(v["entropy_ratio_ok"])
        out[f"{regime}:w12_decreasing"] = bool(v["w12_decreasing"])
    return out


def summary_dict(sweep: SweepResult, extra_checks: dict | None = None,
                 files: dict | None = None) -> dict:
    checks = check_booleans(sweep)
    if extra_checks:
        checks.update({k: bool(v) for k, v in extra_checks.items()})
    return {
        "meta": {
            "version": _version(),
            "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "config": dataclasses.asdict(sweep.config),
        },
        "runs": [{"regime": r.regime, "eps": r.eps, "scalars": r.scalars,
                  "checks": r.checks} for r in sweep.runs],
        "verdicts": sweep.verdicts,
        "checks": checks,
        "files": files or {},
        "ok": bool(sweep.ok and all(checks.values())),
    }


def write_summary(path, summary: dict) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, default=_json_default)
        fh.write("\n")
    return path


def export_sweep(sweep: SweepResult, outdir,
                 extra_checks: dict | None = None) -> dict:
    """All per-run CSVs plus summary.json; returns the path map."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = {}
    for run in sweep.runs:
        paths = write_run_reports(run, outdir)
        files[run_basename(run)] = {k: str(v) for k, v in paths.items()}
    summary = summary_dict(sweep, extra_checks=extra_checks, files=files)
    files["summary"] = str(write_summary(outdir / "summary.json", summary))
    return files


# ---------------------------------------------------------------------------
# configuration files


def config_to_file(cfg: ScenarioConfig, path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(dataclasses.asdict(cfg), fh, indent=2, default=_json_default)
        fh.write("\n")
    return path


def config_from_file(path) -> ScenarioConfig:
    with open(path) as fh:
        raw = json.load(fh)
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "eps_list" in raw:
        raw["eps_list"] = tuple(raw["eps_list"])
    return ScenarioConfig(**raw)

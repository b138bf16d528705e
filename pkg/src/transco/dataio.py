"""Reading datasets and experiment configs; writing result tables."""
import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass

import numpy as np
import yaml

from .errors import ConfigError, DimensionError, InvalidParameterError
from .ipod import DEFAULT_GRID_SIZE, Dataset
from .simgen import SimulationConfig, reference_config

FLOAT_FMT = ".17g"
METHODS = ("IPOD", "TransCO", "PTL", "OLS")
METRICS = ("mse", "log_mse", "f1", "huber", "r2")


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


def _to_float(cell):
    try:
        v = float(cell)
    except (TypeError, ValueError):
        return None
    return v if math.isfinite(v) else None


def load_dataset_csv(path, response, standardize=False):
    """Numeric CSV with a header row -> Dataset.

    Rows with any blank or non-numeric cell are dropped. With ``standardize``
    every feature column becomes mean 0, standard deviation 1 (ddof=0); the
    response is left alone.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InvalidParameterError(f"{path}: {exc.strerror or exc}") from exc
    if not rows:
        raise InvalidParameterError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if response not in header:
        raise InvalidParameterError(f"{path}: no column named {response!r} (have {header})")
    width = len(header)
    kept = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise DimensionError(f"{path}:{lineno}: {len(row)} fields, header has {width}")
        vals = [_to_float(c) for c in row]
        if any(v is None for v in vals):
            continue
        kept.append(vals)
    if not kept:
        raise InvalidParameterError(f"{path}: no usable rows")
    table = np.array(kept, dtype=float)
    j = header.index(response)
    Y = table[:, j]
    X = np.delete(table, j, axis=1)
    columns = [h for i, h in enumerate(header) if i != j]
    if standardize:
        sd = X.std(axis=0)
        if np.any(sd == 0):
            bad = [columns[i] for i in np.flatnonzero(sd == 0)]
            raise InvalidParameterError(f"{path}: cannot standardize constant columns {bad}")
        X = (X - X.mean(axis=0)) / sd
    return Dataset(X, Y, columns=columns, response=response)


def write_dataset_csv(path, data, response="y"):
    columns = data.columns or [f"x{j + 1}" for j in range(data.p)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(columns) + [response])
        for x, y in zip(data.X, data.Y):
            w.writerow([format(v, FLOAT_FMT) for v in x] + [format(y, FLOAT_FMT)])


# ---------------------------------------------------------------------------
# experiment configs
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """A simulation design plus the run settings of the harness."""

    simulation: SimulationConfig
    trials: int = 50
    grid_size: int = DEFAULT_GRID_SIZE
    tol: float = 1e-6
    max_iter: int = 2000

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.grid_size < 2:
            raise ConfigError(f"grid_size must be >= 2, got {self.grid_size}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")


_SIM_KEYS = {f.name for f in dataclasses.fields(SimulationConfig)}
_RUN_KEYS = {"trials", "grid_size", "tol", "max_iter"}
REQUIRED_KEYS = ("example_id", "n", "p", "K", "N", "s", "rho", "h")


def config_from_mapping(raw, source="config"):
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: expected a flat key-value mapping")
    unknown = sorted(set(raw) - _SIM_KEYS - _RUN_KEYS)
    if unknown:
        raise ConfigError(f"{source}: unknown keys {unknown}")
    missing = [k for k in REQUIRED_KEYS if k not in raw]
    if missing:
        raise ConfigError(f"{source}: missing required keys {missing}")
    sim = {k: v for k, v in raw.items() if k in _SIM_KEYS}
    run = {k: v for k, v in raw.items() if k in _RUN_KEYS}
    if isinstance(sim.get("w"), list):
        sim["w"] = tuple(sim["w"])
    try:
        # unspecified design keys take the example's own defaults
        base = reference_config(sim.pop("example_id"))
        return ExperimentConfig(dataclasses.replace(base, **sim), **run)
    except (TypeError, ValueError, ConfigError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_experiment_config(path):
    """Flat JSON or YAML file -> validated ExperimentConfig (strict keys)."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    try:
        if str(path).endswith(".json"):
            raw = json.loads(text)
        else:
            raw = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: cannot parse: {exc}") from exc
    return config_from_mapping(raw, source=str(path))


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


@dataclass
class ResultRecord:
    method: str
    trial: int
    config_digest: str
    mse: float
    log_mse: float = None
    f1: float = None
    huber: float = None
    r2: float = None
    seed: int = 0
    n: int = None
    runtime_ms: int = None   # left unset by the harness so records stay reproducible

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidParameterError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.log_mse is None and self.mse is not None and self.mse > 0:
            self.log_mse = math.log(self.mse)


FIELDS = [f.name for f in dataclasses.fields(ResultRecord)]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, FLOAT_FMT)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def write_results(path, records, fmt="csv"):
    """Write records as CSV or JSON, plus ``<stem>_summary.csv`` alongside."""
    fmt = fmt.lower()
    if fmt not in ("csv", "json"):
        raise InvalidParameterError(f"format must be csv or json, got {fmt!r}")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if fmt == "csv":
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(FIELDS)
                for r in records:
                    w.writerow([_cell(getattr(r, k)) for k in FIELDS])
            else:
                rows = [{k: _json_value(getattr(r, k)) for k in FIELDS} for r in records]
                fh.write(json.dumps(rows, indent=1))
                fh.write("\n")
        write_summary(summary_path(path), records)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc


def summary_path(path):
    stem, _ = os.path.splitext(str(path))
    return stem + "_summary.csv"


def summarize(records):
    """Per-method mean and sample standard deviation (ddof=1) of each metric."""
    out = []
    methods = [m for m in METHODS if any(r.method == m for r in records)]
    for m in methods:
        rows = [r for r in records if r.method == m]
        entry = {"method": m, "count": len(rows)}
        for k in METRICS:
            vals = np.array([getattr(r, k) for r in rows if getattr(r, k) is not None], dtype=float)
            entry[k + "_mean"] = float(vals.mean()) if vals.size else None
            entry[k + "_sd"] = float(vals.std(ddof=1)) if vals.size > 1 else None
        out.append(entry)
    return out


def write_summary(path, records):
    cols = ["method", "count"] + [k + s for k in METRICS for s in ("_mean", "_sd")]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# per-method mean and sample standard deviation (ddof=1)\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for entry in summarize(records):
            w.writerow([_cell(entry[c]) for c in cols])


def read_results_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        records = []
        for row in reader:
            kw = {}
            for k in FIELDS:
                v = row.get(k, "")
                if k == "method" or k == "config_digest":
                    kw[k] = v
                elif v == "":
                    kw[k] = None
                elif k in ("trial", "seed", "n", "runtime_ms"):
                    kw[k] = int(v)
                else:
                    kw[k] = float(v)
            records.append(ResultRecord(**kw))
    return records

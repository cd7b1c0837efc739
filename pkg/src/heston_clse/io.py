"""File formats: observation CSV, JSON documents and plot-data CSVs."""

from __future__ import annotations

import csv
import json
import math
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError
from .simulate import ObservationSeries

__all__ = [
    "format_float",
    "write_series",
    "read_series",
    "to_jsonable",
    "dump_json",
    "load_schema",
    "validate",
    "write_records_csv",
    "write_rmse_csv",
    "write_qq_csv",
    "write_coverage_csv",
]

SERIES_HEADER = ("i", "y", "x")
RECORD_HEADER = ("n", "replicate", "c", "d", "gamma", "delta", "a", "b", "alpha", "beta", "out_of_image")


def format_float(value: float) -> str:
    """17 significant digits; enough for an exact binary64 round trip."""
    if math.isnan(value):
        return "nan"
    return f"{value:.17g}"


def write_series(path, obs: ObservationSeries) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for i, (y, x) in enumerate(zip(obs.y, obs.x)):
            w.writerow((i, format_float(y), format_float(x)))
    return path


def read_series(path) -> ObservationSeries:
    """Read an ``i,y,x`` CSV; rows must be consecutive from ``i = 0``."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SERIES_HEADER:
            raise ValueError(f"{path}: expected header {','.join(SERIES_HEADER)}, got {header}")
        ys, xs = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            if int(row[0]) != len(ys):
                raise ValueError(f"{path}:{lineno}: expected i = {len(ys)}, got {row[0]}")
            ys.append(float(row[1]))
            xs.append(float(row[2]))
    return ObservationSeries(np.array(ys), np.array(xs))


def to_jsonable(obj):
    """Convert numpy scalars/arrays to plain Python; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def dump_json(path, doc) -> Path:
    # floats use Python's shortest round-trip repr, which is exact
    path = Path(path)
    path.write_text(json.dumps(to_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path


def load_schema(name: str) -> dict:
    text = resources.files("heston_clse").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(doc, schema_name: str) -> None:
    """Validate ``doc`` against a bundled schema; raises :class:`ConfigError`."""
    schema = load_schema(schema_name)
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            where = "/".join(str(p) for p in err.absolute_path) or "<root>"
            lines.append(f"{where}: {err.message}")
        raise ConfigError(f"{schema_name} validation failed:\n  " + "\n  ".join(lines))


def _write_rows(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_records_csv(path, records) -> Path:
    rows = (
        (r.n, r.replicate, *r.transformed.tolist(), *r.original.tolist(), int(r.out_of_image))
        for r in records
    )
    return _write_rows(path, RECORD_HEADER, rows)


def write_rmse_csv(path, report) -> Path:
    rows = []
    for rep in report.per_n:
        for layer in (rep.transformed, rep.original):
            for name, bias, rmse in zip(layer.names, layer.bias, layer.rmse):
                rows.append((rep.n, name, float(bias), float(rmse), layer.count))
    return _write_rows(path, ("n", "parameter", "bias", "rmse", "count"), rows)


def write_qq_csv(path, report) -> Path:
    """Normal QQ data of the whitened drift-parameter errors."""
    from scipy import stats

    rows = []
    for rep in report.per_n:
        w = rep.original.whitened
        m = w.shape[0]
        if m == 0:
            continue
        theoretical = stats.norm.ppf((np.arange(1, m + 1) - 0.5) / m)
        for j, name in enumerate(rep.original.names):
            empirical = np.sort(w[:, j])
            rows.extend((rep.n, name, float(t), float(e)) for t, e in zip(theoretical, empirical))
    return _write_rows(path, ("n", "component", "theoretical", "empirical"), rows)


def write_coverage_csv(path, report) -> Path:
    rows = []
    for rep in report.per_n:
        for name, cov in zip(rep.original.names, rep.coverage):
            rows.append((rep.n, name, float(cov), rep.coverage_count, report.config.level))
    return _write_rows(path, ("n", "parameter", "coverage", "count", "level"), rows)

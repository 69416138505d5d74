"""CSV series and JSON summaries on disk."""
import csv
import io
import json
import math
import os
import warnings

import numpy as np

from .functionals import D_ITEMS, E_ITEMS, EnergyReport, TimeSeries

CORE_COLUMNS = (
    "t", "E", "D", "E_tan", "D_tan", "E_bar_tan", "D_bar_tan", "wh_inf", "d3rho_inf",
    "mass_drift", "res_p3divu", "res_p3rho", "res_vort",
)
ITEM_COLUMNS = E_ITEMS + D_ITEMS + ("neg_mean_dropped",)
SERIES_COLUMNS = CORE_COLUMNS + ITEM_COLUMNS
# columns owned by EnergyReport; everything else is auxiliary
_REPORT_KEYS = {"t", "E", "D", "E_tan", "D_tan", "E_bar_tan", "D_bar_tan", "wh_inf",
                "d3rho_inf", "neg_mean_dropped"} | set(E_ITEMS) | set(D_ITEMS)


class TruncatedSeriesWarning(UserWarning):
    pass


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    try:
        x = float(v)
    except (TypeError, ValueError):
        return str(v)
    return format(x, ".17g")


class SeriesWriter:
    """Append rows to a CSV file, one complete line per write and flush."""

    def __init__(self, path, columns=SERIES_COLUMNS):
        self.path = path
        self.columns = tuple(columns)
        d = os.path.dirname(os.path.abspath(path))
        os.makedirs(d, exist_ok=True)
        self._fh = open(path, "w", newline="")
        self._write_line(self.columns)
        self.n_rows = 0

    def _write_line(self, values):
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow(values)
        self._fh.write(buf.getvalue())
        self._fh.flush()

    def append(self, row):
        self._write_line([_fmt(row.get(c, float("nan"))) for c in self.columns])
        self.n_rows += 1

    def close(self):
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_series(series, path, columns=SERIES_COLUMNS):
    with SeriesWriter(path, columns) as w:
        for row in series.rows():
            w.append(row)
    return path


def _report_from_row(row, zeta, m, eps):
    return EnergyReport(
        t=row["t"], m=m, zeta=zeta, eps=eps,
        E_items={k: row.get(k, 0.0) for k in E_ITEMS},
        D_items={k: row.get(k, 0.0) for k in D_ITEMS},
        E_tan=row["E_tan"], D_tan=row["D_tan"], E_bar_tan=row["E_bar_tan"], D_bar_tan=row["D_bar_tan"],
        neg_mean_dropped=row.get("neg_mean_dropped", 0.0), wh_inf=row.get("wh_inf", 0.0),
        d3rho_inf=row.get("d3rho_inf", 0.0),
    )


def read_series_columns(path):
    """Columns of a series CSV as float arrays.

    A torn final line (a run killed mid-write) is dropped with a
    :class:`TruncatedSeriesWarning`; earlier rows are kept.
    """
    with open(path, newline="") as fh:
        text = fh.read()
    lines = text.splitlines()
    if not lines:
        raise ValueError(f"{path}: empty series file")
    header = next(csv.reader([lines[0]]))
    rows = []
    for n, line in enumerate(lines[1:], start=2):
        vals = next(csv.reader([line])) if line else []
        ok = len(vals) == len(header)
        if ok:
            try:
                vals = [float(v) for v in vals]
            except ValueError:
                ok = False
        if not ok or (n == len(lines) and not text.endswith("\n")):
            warnings.warn(f"{path}: truncated row {n} dropped; loaded {len(rows)} complete rows",
                          TruncatedSeriesWarning, stacklevel=2)
            break
        rows.append(vals)
    arr = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {h: arr[:, i] for i, h in enumerate(header)}


def load_series(path, zeta=1.0 / 34.0, m=5, eps=0.0):
    """Rebuild a :class:`TimeSeries` from a CSV written by :class:`SeriesWriter`."""
    cols = read_series_columns(path)
    n = len(cols["t"])
    ts = TimeSeries(zeta=zeta, m=m, eps=eps)
    aux_names = [c for c in cols if c not in _REPORT_KEYS]
    for i in range(n):
        row = {k: float(v[i]) for k, v in cols.items()}
        ts.append(_report_from_row(row, zeta, m, eps), **{k: row[k] for k in aux_names})
    return ts


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def write_summary(summary, path):
    """Write a JSON summary atomically (temp file + rename)."""
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return path


def load_summary(path):
    with open(path) as fh:
        return json.load(fh)

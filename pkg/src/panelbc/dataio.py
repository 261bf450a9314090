"""CSV ingestion and export of panels.

Dialect: comma separated, UTF-8, header row required, '.' as the decimal
mark, booleans written as 0/1. Floats are written with ``repr`` so a panel
survives a round trip bit for bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DataError
from .panel import BINARY, CONTINUOUS, PanelData, panel_from_arrays


class CsvFormatError(DataError):
    """A CSV file cannot be read as a panel; carries the line and column."""

    def __init__(self, message, line=None, column=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__((", ".join(where) + ": " if where else "") + message)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class ColumnRoles:
    """Which CSV columns play which role.

    ``regressors`` are ``(name, kind)`` pairs. ``lag_outcome`` names an extra
    regressor holding the outcome one period earlier; it is built after
    reading and removes each individual's first period (and any period that
    follows a gap).
    """

    outcome: str
    indiv: str
    time: str
    regressors: tuple
    lag_outcome: Optional[str] = None

    def __post_init__(self):
        names = [self.outcome, self.indiv, self.time] + [n for n, _ in self.regressors]
        if self.lag_outcome:
            names.append(self.lag_outcome)
        if len(set(names)) != len(names):
            raise ValueError("column roles must name distinct columns")
        for _, kind in self.regressors:
            if kind not in (CONTINUOUS, BINARY):
                raise ValueError(f"unknown regressor kind {kind!r}")


def _keys(values: list[str]) -> np.ndarray:
    """Integer keys when every value is an integer literal, strings otherwise."""
    try:
        return np.array([int(v) for v in values], dtype=np.int64)
    except ValueError:
        return np.array(values)


def read_panel_csv(path, roles: ColumnRoles, binary_outcome: bool = True) -> PanelData:
    """Read a panel from ``path``; one row per (individual, period)."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise CsvFormatError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError("file is empty; a header row is required", line=1) from None
        except (csv.Error, UnicodeDecodeError) as exc:
            raise CsvFormatError(str(exc), line=1) from exc
        header = [h.strip() for h in header]
        pos = {}
        for name in [roles.outcome, roles.indiv, roles.time] + [n for n, _ in roles.regressors]:
            if name not in header:
                raise CsvFormatError(f"header has no column {name!r}", line=1)
            pos[name] = header.index(name)
        ids, times, ys, xs = [], [], [], []
        xnames = [n for n, _ in roles.regressors]
        try:
            for row in reader:
                line = reader.line_num
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise CsvFormatError(f"expected {len(header)} fields, found {len(row)}", line=line)
                ids.append(row[pos[roles.indiv]].strip())
                t = row[pos[roles.time]].strip()
                try:
                    times.append(int(t))
                except ValueError:
                    raise CsvFormatError(f"time value {t!r} is not an integer", line, roles.time) from None
                ys.append(_number(row[pos[roles.outcome]], line, roles.outcome))
                xs.append([_number(row[pos[n]], line, n) for n in xnames])
        except (csv.Error, UnicodeDecodeError) as exc:
            raise CsvFormatError(str(exc), line=reader.line_num) from exc
    if not ys:
        raise CsvFormatError("no data rows", line=2)
    y = np.array(ys)
    if binary_outcome:
        bad = np.flatnonzero((y != 0.0) & (y != 1.0))
        if bad.size:
            raise CsvFormatError(f"outcome must be 0 or 1, found {y[bad[0]]!r}", None, roles.outcome)
    p = panel_from_arrays(_keys(ids), np.array(times, dtype=np.int64), y,
                          np.array(xs, dtype=float).reshape(len(ys), len(xnames)),
                          tuple(xnames), tuple(k for _, k in roles.regressors))
    if roles.lag_outcome:
        p = add_lagged_outcome(p, roles.lag_outcome, BINARY if binary_outcome else CONTINUOUS)
    return p


def _number(text: str, line: int, column: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise CsvFormatError(f"cannot parse {text.strip()!r} as a number", line, column) from None
    if not np.isfinite(v):
        raise CsvFormatError(f"value {text.strip()!r} is not finite", line, column)
    return v


def add_lagged_outcome(p: PanelData, name: str, kind: str = BINARY) -> PanelData:
    """Append ``y`` one period earlier as the first regressor; drops rows without a lag."""
    lag = p.lag_map
    keep = lag >= 0
    if not keep.any():
        raise DataError("no observation has its previous period in the data")
    X = np.column_stack([p.y[lag[keep]], p.X[keep]])
    return panel_from_arrays(p.indiv_keys[keep], p.time_keys[keep], p.y[keep], X,
                             (name,) + tuple(p.regressor_names), (kind,) + tuple(p.regressor_kinds))


def write_panel_csv(p: PanelData, path, indiv: str = "id", time: str = "t", outcome: str = "y",
                    names: Optional[Sequence[str]] = None) -> None:
    """Write ``p`` in the dialect :func:`read_panel_csv` reads."""
    names = list(names or p.regressor_names)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([indiv, time, outcome] + names)
        for k in range(p.n_obs):
            ik = p.indiv_keys[k]
            tk = p.time_keys[k]
            w.writerow([ik.item() if hasattr(ik, "item") else ik,
                        tk.item() if hasattr(tk, "item") else tk,
                        _fmt(p.y[k])] + [_fmt(v) for v in p.X[k]])


def _fmt(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 2**53 else repr(v)

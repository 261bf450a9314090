"""In-memory panel data with two factors (individual, time).

Observations are always stored sorted by individual and then calendar time.
Every downstream routine relies on this ordering: lag pairs and per-individual
sums are contiguous scans.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    DuplicateCell,
    EmptyPanel,
    EmptySubpanel,
    InvalidRegressor,
    RaggedRegressors,
    SingletonIndividual,
)

CONTINUOUS = "continuous"
BINARY = "binary"


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _dense_codes(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map arbitrary sortable keys to dense integer codes (sorted order)."""
    uniques, codes = np.unique(values, return_inverse=True)
    return uniques, codes.astype(np.int64)


def _calendar_index(time_keys: np.ndarray) -> np.ndarray:
    """Integer calendar positions; integer keys keep their gaps."""
    if np.issubdtype(time_keys.dtype, np.integer) or (
        np.issubdtype(time_keys.dtype, np.floating)
        and np.all(np.isfinite(time_keys))
        and np.all(time_keys == np.round(time_keys))
    ):
        tk = time_keys.astype(np.int64)
        return tk - tk.min()
    _, codes = _dense_codes(time_keys)
    return codes


@dataclass(frozen=True, eq=False)
class FactorMap:
    """Dense group codes for one factor plus lazily built member lists."""

    codes: np.ndarray
    group_count: int

    @cached_property
    def groups(self) -> list[np.ndarray]:
        order = np.argsort(self.codes, kind="stable")
        bounds = np.searchsorted(self.codes[order], np.arange(self.group_count + 1))
        return [order[bounds[g]:bounds[g + 1]] for g in range(self.group_count)]

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.codes, minlength=self.group_count)


@dataclass(frozen=True, eq=False)
class PanelData:
    """A validated, sorted panel.

    Attributes
    ----------
    y : ndarray, shape (n,)
        Outcome.
    X : ndarray, shape (n, J)
        Regressors, Fortran ordered.
    indiv : ndarray, shape (n,)
        Dense individual index in ``0..N-1`` (order of the sorted keys).
    time : ndarray, shape (n,)
        Calendar-time index. Integer time keys keep their spacing, so a
        missing period leaves a gap.
    indiv_keys, time_keys : ndarray, shape (n,)
        Original keys per observation, kept for serialization.
    regressor_names, regressor_kinds : tuple of str
    """

    y: np.ndarray
    X: np.ndarray
    indiv: np.ndarray
    time: np.ndarray
    indiv_keys: np.ndarray
    time_keys: np.ndarray
    regressor_names: tuple
    regressor_kinds: tuple

    @property
    def n_obs(self) -> int:
        return int(self.y.shape[0])

    @property
    def n_regressors(self) -> int:
        return int(self.X.shape[1])

    @property
    def n_indiv(self) -> int:
        return self.factors[0].group_count

    @property
    def n_time(self) -> int:
        return self.factors[1].group_count

    @cached_property
    def factors(self) -> tuple[FactorMap, FactorMap]:
        """Individual and time factor maps (time codes dense over observed periods)."""
        n_i = int(self.indiv.max()) + 1 if self.n_obs else 0
        periods, tcodes = _dense_codes(self.time)
        return (
            FactorMap(_freeze(self.indiv.copy()), n_i),
            FactorMap(_freeze(tcodes), int(periods.shape[0])),
        )

    @cached_property
    def periods(self) -> np.ndarray:
        """Sorted calendar indices of all observed periods."""
        return _freeze(np.unique(self.time))

    @cached_property
    def indiv_counts(self) -> np.ndarray:
        """Observed span count T_i per individual."""
        return _freeze(np.bincount(self.indiv, minlength=self.n_indiv))

    @cached_property
    def indiv_starts(self) -> np.ndarray:
        """Offset of each individual's first observation (length N + 1)."""
        starts = np.zeros(self.n_indiv + 1, dtype=np.int64)
        np.cumsum(self.indiv_counts, out=starts[1:])
        return _freeze(starts)

    def lag_index(self, lag: int = 1) -> np.ndarray:
        """Index of the same individual's observation ``lag`` periods earlier, or -1."""
        span = int(self.time.max()) + lag + 1
        key = self.indiv * span + self.time
        target = key - lag
        pos = np.searchsorted(key, target)
        pos_c = np.minimum(pos, key.shape[0] - 1)
        found = (pos < key.shape[0]) & (key[pos_c] == target)
        return np.where(found, pos_c, -1)

    @cached_property
    def lag_map(self) -> np.ndarray:
        return _freeze(self.lag_index(1))

    def take(self, rows: np.ndarray) -> "PanelData":
        """Sub-panel on a boolean mask or sorted index array, re-densifying individuals."""
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        if rows.size == 0:
            raise EmptyPanel("no observations selected")
        _, icodes = _dense_codes(self.indiv[rows])
        return PanelData(
            y=_freeze(self.y[rows].copy()),
            X=_freeze(np.asfortranarray(self.X[rows])),
            indiv=_freeze(icodes),
            time=_freeze(self.time[rows].copy()),
            indiv_keys=_freeze(self.indiv_keys[rows].copy()),
            time_keys=_freeze(self.time_keys[rows].copy()),
            regressor_names=self.regressor_names,
            regressor_kinds=self.regressor_kinds,
        )

    def rows(self) -> list[tuple]:
        """Serialize back to ``(indiv_key, time_key, y, x-vector)`` rows."""
        return [
            (self.indiv_keys[k].item() if hasattr(self.indiv_keys[k], "item") else self.indiv_keys[k],
             self.time_keys[k].item() if hasattr(self.time_keys[k], "item") else self.time_keys[k],
             float(self.y[k]),
             tuple(float(v) for v in self.X[k]))
            for k in range(self.n_obs)
        ]

    def equals(self, other: "PanelData") -> bool:
        return (
            self.regressor_names == other.regressor_names
            and self.regressor_kinds == other.regressor_kinds
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.indiv, other.indiv)
            and np.array_equal(self.time, other.time)
            and np.array_equal(self.indiv_keys, other.indiv_keys)
            and np.array_equal(self.time_keys, other.time_keys)
        )


def panel_from_arrays(
    indiv_keys,
    time_keys,
    y,
    X,
    regressor_names: Optional[Sequence[str]] = None,
    regressor_kinds: Optional[Sequence[str]] = None,
) -> PanelData:
    """Build a :class:`PanelData` from parallel arrays.

    Sorts by (individual, time), checks uniqueness of cells and binary
    regressors, and drops individuals with a single observation with a
    :class:`SingletonIndividual` warning.
    """
    indiv_keys = np.asarray(indiv_keys)
    time_keys = np.asarray(time_keys)
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = y.shape[0]
    if indiv_keys.shape[0] != n or time_keys.shape[0] != n or X.shape[0] != n:
        raise RaggedRegressors("columns have different lengths")
    if n == 0:
        raise EmptyPanel("no observations")
    J = X.shape[1]
    names = tuple(regressor_names) if regressor_names is not None else tuple(f"x{j + 1}" for j in range(J))
    kinds = tuple(regressor_kinds) if regressor_kinds is not None else (CONTINUOUS,) * J
    if len(names) != J or len(kinds) != J:
        raise RaggedRegressors(f"expected {J} regressor names/kinds")
    for j, kind in enumerate(kinds):
        if kind not in (CONTINUOUS, BINARY):
            raise ValueError(f"unknown regressor kind {kind!r}")
        if kind == BINARY and not np.all((X[:, j] == 0) | (X[:, j] == 1)):
            raise InvalidRegressor(f"regressor {names[j]!r} is flagged binary but has values outside {{0, 1}}")

    _, icodes = _dense_codes(indiv_keys)
    calendar = _calendar_index(time_keys)
    order = np.lexsort((calendar, icodes))
    icodes, calendar = icodes[order], calendar[order]
    dup = (np.diff(icodes) == 0) & (np.diff(calendar) == 0)
    if dup.any():
        k = int(np.flatnonzero(dup)[0]) + 1
        raise DuplicateCell(
            f"duplicate cell (indiv={indiv_keys[order][k]!r}, time={time_keys[order][k]!r})"
        )

    counts = np.bincount(icodes)
    single = counts[icodes] < 2
    if single.any():
        dropped = np.unique(indiv_keys[order][single])
        warnings.warn(
            f"dropped {dropped.size} individual(s) with a single observation: {list(dropped[:10])}",
            SingletonIndividual,
            stacklevel=2,
        )
        order = order[~single]
        if order.size == 0:
            raise EmptyPanel("every individual has a single observation")
        _, icodes = _dense_codes(icodes[~single])
        calendar = calendar[~single]
        calendar = calendar - calendar.min()

    return PanelData(
        y=_freeze(y[order].copy()),
        X=_freeze(np.asfortranarray(X[order])),
        indiv=_freeze(icodes),
        time=_freeze(calendar.astype(np.int64)),
        indiv_keys=_freeze(indiv_keys[order].copy()),
        time_keys=_freeze(time_keys[order].copy()),
        regressor_names=names,
        regressor_kinds=kinds,
    )


def build_panel(
    rows: Iterable[tuple],
    regressor_names: Optional[Sequence[str]] = None,
    regressor_kinds: Optional[Sequence[str]] = None,
) -> PanelData:
    """Build a panel from ``(indiv_key, time_key, y, x_vector)`` rows."""
    rows = list(rows)
    if not rows:
        raise EmptyPanel("no rows")
    widths = {len(r[3]) for r in rows}
    if len(widths) != 1:
        raise RaggedRegressors(f"regressor vectors have lengths {sorted(widths)}")
    return panel_from_arrays(
        np.array([r[0] for r in rows]),
        np.array([r[1] for r in rows]),
        np.array([r[2] for r in rows], dtype=float),
        np.array([list(r[3]) for r in rows], dtype=float).reshape(len(rows), widths.pop()),
        regressor_names,
        regressor_kinds,
    )


@dataclass
class DropLog:
    """Groups removed by :func:`drop_noninformative`, one entry per pass."""

    passes: list = field(default_factory=list)

    @property
    def n_indiv_dropped(self) -> int:
        return sum(len(p["indiv"]) for p in self.passes)

    @property
    def n_time_dropped(self) -> int:
        return sum(len(p["time"]) for p in self.passes)

    @property
    def n_obs_dropped(self) -> int:
        return sum(p["n_obs"] for p in self.passes)

    def __bool__(self) -> bool:
        return bool(self.passes)

    def to_dict(self) -> dict:
        return {
            "passes": [
                {"indiv": [_plain(v) for v in p["indiv"]], "time": [_plain(v) for v in p["time"]], "n_obs": p["n_obs"]}
                for p in self.passes
            ]
        }


def _plain(v):
    return v.item() if hasattr(v, "item") else v


def _constant_groups(codes: np.ndarray, count: int, y: np.ndarray) -> np.ndarray:
    n = np.bincount(codes, minlength=count)
    s = np.bincount(codes, weights=y, minlength=count)
    return (n > 0) & ((s == 0) | (s == n))


def drop_noninformative(p: PanelData) -> tuple[PanelData, DropLog]:
    """Remove individuals and periods whose binary outcomes never vary.

    Repeats until no group is constant. Each pass removes all constant
    individual groups and all constant time groups found in a single scan.
    """
    log = DropLog()
    keep = np.ones(p.n_obs, dtype=bool)
    _, tcodes = _dense_codes(p.time)
    n_t = int(tcodes.max()) + 1
    while True:
        idx = np.flatnonzero(keep)
        if idx.size == 0:
            raise EmptyPanel("no informative observations remain")
        y = p.y[idx]
        bad_i = _constant_groups(p.indiv[idx], p.n_indiv, y)
        bad_t = _constant_groups(tcodes[idx], n_t, y)
        drop = bad_i[p.indiv[idx]] | bad_t[tcodes[idx]]
        if not drop.any():
            break
        first_i = np.flatnonzero(bad_i)
        first_t = np.flatnonzero(bad_t)
        ikeys = [p.indiv_keys[np.flatnonzero(p.indiv == g)[0]] for g in first_i]
        tkeys = [p.time_keys[np.flatnonzero(tcodes == g)[0]] for g in first_t]
        log.passes.append({"indiv": ikeys, "time": tkeys, "n_obs": int(drop.sum())})
        keep[idx[drop]] = False
    if not log:
        return p, log
    return p.take(keep), log


@dataclass(frozen=True)
class SubpanelSelector:
    """Half of the individuals and/or half of the periods.

    ``indiv`` and ``time`` are each ``None`` (no restriction), ``"first"``
    or ``"second"``. With an odd count the two halves share the middle
    element.
    """

    indiv: Optional[str] = None
    time: Optional[str] = None

    def __post_init__(self):
        for v in (self.indiv, self.time):
            if v not in (None, "first", "second"):
                raise ValueError(f"invalid half {v!r}")

    @property
    def label(self) -> str:
        parts = []
        if self.indiv:
            parts.append(f"indiv:{self.indiv}")
        if self.time:
            parts.append(f"time:{self.time}")
        return ",".join(parts) or "full"


def half_mask(count: int, half: str) -> np.ndarray:
    """Members of the first (``<= ceil(n/2)``) or second (``>= floor(n/2 + 1)``) half."""
    pos = np.arange(1, count + 1)
    if half == "first":
        return pos <= math.ceil(count / 2)
    return pos >= math.floor(count / 2 + 1)


def split_subpanel(p: PanelData, sel: SubpanelSelector) -> PanelData:
    """Extract a sub-panel for split-panel jackknife estimation."""
    keep = np.ones(p.n_obs, dtype=bool)
    if sel.indiv is not None:
        keep &= half_mask(p.n_indiv, sel.indiv)[p.indiv]
    if sel.time is not None:
        periods = p.periods
        chosen = periods[half_mask(periods.size, sel.time)]
        keep &= np.isin(p.time, chosen)
    if not keep.any():
        raise EmptySubpanel(f"sub-panel {sel.label} is empty")
    sub = p.take(keep)
    counts = sub.indiv_counts
    if np.any(counts < 2):
        sub = sub.take(counts[sub.indiv] >= 2)
    return sub


SPJ1_SELECTORS = (
    SubpanelSelector(indiv="first"),
    SubpanelSelector(indiv="second"),
    SubpanelSelector(time="first"),
    SubpanelSelector(time="second"),
)

SPJ2_SELECTORS = (
    SubpanelSelector(indiv="first", time="first"),
    SubpanelSelector(indiv="first", time="second"),
    SubpanelSelector(indiv="second", time="first"),
    SubpanelSelector(indiv="second", time="second"),
)

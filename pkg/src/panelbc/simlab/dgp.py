"""Dynamic probit and dynamic linear panel designs with optional missing-data patterns."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from ..panel import BINARY, CONTINUOUS, PanelData, panel_from_arrays

KINDS = ("dynamic_probit", "dynamic_linear")
PATTERNS = ("balanced", "pattern1", "pattern2")
GENERATOR = "numpy.random.PCG64"


@dataclass(frozen=True)
class DgpConfig:
    """Design of one simulated panel.

    For ``pattern="balanced"`` set ``N`` and ``T``. For the unbalanced
    patterns set ``N1, N2, T1, T2``; which individuals are of type 1 (the
    short ones) is drawn at random, so halves of the individual ordering mix
    both types. ``T`` counts estimation periods; the
    initial condition period is generated on top and never enters the
    estimation sample.
    """

    kind: str = "dynamic_probit"
    N: Optional[int] = 200
    T: Optional[int] = 10
    pattern: str = "balanced"
    N1: Optional[int] = None
    N2: Optional[int] = None
    T1: Optional[int] = None
    T2: Optional[int] = None
    rho: float = 0.5
    beta: float = 1.0
    var_alpha: float = 1.0 / 16.0
    var_gamma: float = 1.0 / 16.0
    ar_coef: float = 0.5
    var_nu: float = 0.5
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern must be one of {PATTERNS}")
        if self.pattern == "balanced":
            if not self.N or not self.T or self.N < 1 or self.T < 2:
                raise ValueError("balanced designs need N >= 1 and T >= 2")
        else:
            vals = (self.N1, self.N2, self.T1, self.T2)
            if any(v is None for v in vals):
                raise ValueError("unbalanced designs need N1, N2, T1 and T2")
            if not self.T1 < self.T2:
                raise ValueError("T1 must be smaller than T2")
            if min(vals) < 1 or self.T1 < 2:
                raise ValueError("N1, N2 must be positive and T1 >= 2")
            object.__setattr__(self, "N", self.N1 + self.N2)
            object.__setattr__(self, "T", None)

    @property
    def n_indiv(self) -> int:
        return int(self.N)

    @property
    def horizon(self) -> int:
        """Last calendar period that can be observed."""
        return int(self.T if self.pattern == "balanced" else self.T2)

    @property
    def mean_span(self) -> float:
        if self.pattern == "balanced":
            return float(self.T)
        return (self.N1 * self.T1 + self.N2 * self.T2) / self.N

    @property
    def mean_count(self) -> float:
        """Average number of individuals observed per period."""
        if self.pattern == "balanced":
            return float(self.N)
        return (self.N1 * self.T1 + self.N2 * self.T2) / self.T2

    def describe(self) -> str:
        if self.pattern == "balanced":
            return f"N = {self.N}; T = {self.T}"
        return f"N1 = {self.N1}, N2 = {self.N2}; T1 = {self.T1}, T2 = {self.T2} (mean T = {self.mean_span:g})"

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True, eq=False)
class Truth:
    """True coefficients and partial effects of one draw.

    ``effects`` holds the per-observation partial effects at the true index,
    aligned with the rows of the generated panel; ``ape`` is their mean.
    """

    coef: np.ndarray
    ape: np.ndarray
    effects: np.ndarray = field(default=None, repr=False)
    keys: np.ndarray = field(default=None, repr=False)
    names: tuple = ("y_lag", "x")

    def ape_on(self, panel: PanelData) -> np.ndarray:
        """Mean true effect over the cells of ``panel`` (e.g. after pruning)."""
        if panel.n_obs == self.keys.shape[0]:
            return self.ape.copy()
        k = _cell_keys(panel.indiv_keys, panel.time_keys)
        pos = np.searchsorted(self.keys, k)
        return self.effects[pos].mean(axis=0)


def _cell_keys(indiv_keys, time_keys) -> np.ndarray:
    ik = np.asarray(indiv_keys, dtype=np.int64)
    tk = np.asarray(time_keys, dtype=np.int64)
    return ik * (1 << 20) + tk


def _spans(cfg: DgpConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    """Initial-condition period and last period for every individual."""
    N = cfg.n_indiv
    if cfg.pattern == "balanced":
        return np.zeros(N, dtype=np.int64), np.full(N, cfg.T, dtype=np.int64)
    short = np.sort(rng.permutation(N)[: cfg.N1])
    first = np.zeros(N, dtype=np.int64)
    last = np.full(N, cfg.T2, dtype=np.int64)
    last[short] = cfg.T1
    if cfg.pattern == "pattern2":
        s = rng.integers(0, cfg.T2 - cfg.T1 + 1, size=cfg.N1)
        first[short] = s
        last[short] = s + cfg.T1
    return first, last


def generate(cfg: DgpConfig, rng=None) -> tuple[PanelData, Truth]:
    """Draw one panel. ``rng`` overrides ``cfg.seed`` when given."""
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(cfg.seed))
    N, H = cfg.n_indiv, cfg.horizon
    alpha = rng.normal(0.0, np.sqrt(cfg.var_alpha), size=N)
    gamma = rng.normal(0.0, np.sqrt(cfg.var_gamma), size=H + 1)
    eps = rng.normal(size=(N, H + 1))
    nu = rng.normal(0.0, np.sqrt(cfg.var_nu), size=(N, H + 1))
    x0 = rng.normal(size=N)
    first, last = _spans(cfg, rng)

    linear = cfg.kind == "dynamic_linear"
    x = np.zeros((N, H + 1))
    y = np.zeros((N, H + 1))
    for t in range(H + 1):
        init = first == t
        prev_x = x[:, t - 1] if t > 0 else np.zeros(N)
        prev_y = y[:, t - 1] if t > 0 else np.zeros(N)
        x[:, t] = np.where(init, x0, cfg.ar_coef * prev_x + alpha + gamma[t] + nu[:, t])
        index = cfg.beta * x[:, t] + alpha + gamma[t] + np.where(init, 0.0, cfg.rho * prev_y)
        y[:, t] = index + eps[:, t] if linear else (index >= eps[:, t]).astype(float)

    t_grid = np.arange(H + 1)[None, :]
    keep = (t_grid > first[:, None]) & (t_grid <= last[:, None])
    ii, tt = np.nonzero(keep)
    ylag = y[ii, tt - 1]
    xs = x[ii, tt]
    ys = y[ii, tt]
    X = np.column_stack([ylag, xs])
    kinds = (CONTINUOUS, CONTINUOUS) if linear else (BINARY, CONTINUOUS)
    panel = panel_from_arrays(ii, tt, ys, X, ("y_lag", "x"), kinds)
    coef = np.array([cfg.rho, cfg.beta])
    # rows of the panel follow (individual, time) order, as does nonzero()
    if linear:
        effects = np.tile(coef, (ii.shape[0], 1))
    else:
        rest = cfg.beta * xs + alpha[ii] + gamma[tt]
        eta = rest + cfg.rho * ylag
        effects = np.column_stack([
            special.ndtr(rest + cfg.rho) - special.ndtr(rest),
            cfg.beta * np.exp(-0.5 * eta * eta) / np.sqrt(2.0 * np.pi),
        ])
    keys = _cell_keys(panel.indiv_keys, panel.time_keys)
    return panel, Truth(coef, effects.mean(axis=0), effects, keys)

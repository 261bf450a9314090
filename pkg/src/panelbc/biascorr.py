"""Analytical and split-panel jackknife bias corrections for the coefficients.

The analytical corrections estimate the leading incidental-parameter bias
from quantities already available after a fit: the working weights, the
score residuals, the second derivative of ``F`` and the centered regressors.
The jackknife corrections re-estimate the model on half panels instead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BandwidthTooLarge, NoConvergence, PanelBCError, SubpanelFitFailed
from .families import Family
from .feglm import FitConfig, FitResult, concentrated_score, evaluate_at, fit, _solve_spd
from .panel import SPJ1_SELECTORS, SPJ2_SELECTORS, PanelData, split_subpanel

logger = logging.getLogger(__name__)

ABC_VARIANTS = ("abc1", "abc2", "abc3", "abc4")
SPJ_VARIANTS = ("spj1", "spj2")
ADJUSTMENTS = ("individual", "global")


@dataclass(frozen=True)
class BcConfig:
    """Settings shared by the bias corrections.

    Parameters
    ----------
    bandwidth : int
        Number of lags ``L`` in the spectral part of the bias term.
    abc_variant : str
        Used by :func:`correct` to pick one of ``abc1``..``abc4``.
    iterated_tol, iterated_max
        Stopping rule of the iterated correction.
    score_tol, score_max
        Stopping rule of the score-corrected solvers.
    adjustment : {"individual", "global"}
        Whether the small-sample factor ``T/(T - l)`` uses each individual's
        observation count or the number of observed periods.
    """

    bandwidth: int = 1
    abc_variant: str = "abc1"
    iterated_tol: float = 1e-9
    iterated_max: int = 50
    score_tol: float = 1e-8
    score_max: int = 100
    adjustment: str = "individual"

    def __post_init__(self):
        if self.bandwidth < 0:
            raise ValueError("bandwidth must be non-negative")
        if self.abc_variant not in ABC_VARIANTS:
            raise ValueError(f"unknown variant {self.abc_variant!r}")
        if self.adjustment not in ADJUSTMENTS:
            raise ValueError(f"adjustment must be one of {ADJUSTMENTS}")
        if self.iterated_tol <= 0 or self.score_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True, eq=False)
class BcResult:
    """A bias-corrected coefficient vector.

    ``state`` is the fitted state re-profiled at ``beta_corrected`` (analytical
    variants only); partial effects at the corrected coefficients are built
    from it. ``hessian`` is the matrix whose inverse gives the reported
    standard errors.
    """

    variant: str
    beta: np.ndarray
    beta_corrected: np.ndarray
    bias_hat: np.ndarray
    hessian: np.ndarray
    bandwidth: Optional[int] = None
    iterations: int = 1
    state: Optional[FitResult] = None
    base: Optional[FitResult] = None
    subpanel_estimates: dict = field(default_factory=dict)
    subpanel_fits: dict = field(default_factory=dict)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(np.linalg.inv(self.hessian)))

    @property
    def label(self) -> str:
        if self.bandwidth is None:
            return self.variant.upper()
        return f"{self.variant.upper()}({self.bandwidth})"


# ---------------------------------------------------------------------------
# group sums shared with the partial-effect corrections


def span_factors(p: PanelData, bandwidth: int, adjustment: str = "individual") -> np.ndarray:
    """``T_i`` per individual used in ``T_i / (T_i - l)``; checks ``T_i > L``."""
    if adjustment == "global":
        T = np.full(p.n_indiv, float(p.n_time))
    else:
        T = p.indiv_counts.astype(float)
    if bandwidth > 0 and np.any(T <= bandwidth):
        short = int(np.flatnonzero(T <= bandwidth)[0])
        raise BandwidthTooLarge(
            f"bandwidth {bandwidth} is not below the span of individual {p.indiv_keys[p.indiv_starts[short]]!r}"
            f" ({int(T[short])} periods)"
        )
    return T


def group_ratio_sum(V: np.ndarray, codes: np.ndarray, count: int, w: np.ndarray) -> np.ndarray:
    """``sum_g (sum_{o in g} V_o) / (sum_{o in g} w_o)`` for every column of ``V``."""
    V = V.reshape(V.shape[0], -1)
    den = np.bincount(codes, weights=w, minlength=count)
    out = np.empty(V.shape[1])
    for j in range(V.shape[1]):
        out[j] = np.sum(np.bincount(codes, weights=V[:, j], minlength=count) / den)
    return out


def spectral_sum(p: PanelData, score: np.ndarray, w: np.ndarray, V: np.ndarray, bandwidth: int,
                 adjustment: str = "individual") -> np.ndarray:
    """``sum_i [sum_l T_i/(T_i - l) sum_t score_{i,t-l} w_it V_it] / sum_t w_it``.

    Lag pairs are formed from calendar periods, so a gap in an individual's
    record breaks every pair that would span it.
    """
    V = V.reshape(V.shape[0], -1)
    out = np.zeros(V.shape[1])
    if bandwidth == 0:
        return out
    T = span_factors(p, bandwidth, adjustment)
    den = np.bincount(p.indiv, weights=w, minlength=p.n_indiv)
    for lag in range(1, bandwidth + 1):
        idx = p.lag_index(lag)
        ok = idx >= 0
        prod = np.where(ok, score[np.where(ok, idx, 0)], 0.0) * w
        scale = T / (T - lag) / den
        for j in range(V.shape[1]):
            s = np.bincount(p.indiv, weights=prod * V[:, j], minlength=p.n_indiv)
            out[j] += np.sum(scale * s)
    return out


def abc_terms(fr: FitResult, bandwidth: int = 1, adjustment: str = "individual"):
    """Individual and time bias terms ``(B, C)`` for the coefficients at ``fr``."""
    p, fam = fr.panel, fr.family
    span_factors(p, bandwidth, adjustment)
    d = fam.evaluate(fr.eta)
    hd = (fr.H * d.d2F)[:, None] * fr.MX_X
    fi, ft = p.factors
    B = group_ratio_sum(hd, fi.codes, fi.group_count, fr.weights)
    B += 2.0 * spectral_sum(p, fr.score_resid, fr.weights, fr.MX_X, bandwidth, adjustment)
    C = group_ratio_sum(hd, ft.codes, ft.group_count, fr.weights)
    return -0.5 * B, -0.5 * C


def _bias(fr: FitResult, cfg: BcConfig) -> np.ndarray:
    B, C = abc_terms(fr, cfg.bandwidth, cfg.adjustment)
    return B + C


def _reprofile(base: FitResult, prev: FitResult, beta) -> FitResult:
    return evaluate_at(base, beta, eta_start=prev.eta + base.panel.X @ (beta - prev.beta))


def abc1(fr: FitResult, cfg: Optional[BcConfig] = None, reprofile: bool = True) -> BcResult:
    """``beta_hat - W^{-1}(B + C)``; standard errors from the uncorrected Hessian."""
    cfg = cfg or BcConfig()
    bias = _solve_spd(fr.hessian, _bias(fr, cfg))
    bt = fr.beta - bias
    state = _reprofile(fr, fr, bt) if reprofile else None
    return BcResult("abc1", fr.beta.copy(), bt, bias, fr.hessian, cfg.bandwidth, 1, state, fr)


def abc2(fr: FitResult, cfg: Optional[BcConfig] = None) -> BcResult:
    """Iterated correction: re-evaluate the bias at the corrected coefficients until it settles."""
    cfg = cfg or BcConfig()
    state = fr
    bt = fr.beta - _solve_spd(fr.hessian, _bias(fr, cfg))
    for it in range(1, cfg.iterated_max + 1):
        state = _reprofile(fr, state, bt)
        new = fr.beta - _solve_spd(state.hessian, _bias(state, cfg))
        change = float(np.max(np.abs(new - bt)))
        bt = new
        logger.debug("abc2 iter %d change %.3e", it, change)
        if change < cfg.iterated_tol:
            state = _reprofile(fr, state, bt)
            return BcResult("abc2", fr.beta.copy(), bt, fr.beta - bt, state.hessian,
                            cfg.bandwidth, it + 1, state, fr)
    raise NoConvergence(f"iterated correction did not settle in {cfg.iterated_max} steps")


def _score_solve(fr: FitResult, cfg: BcConfig, update: bool, variant: str) -> BcResult:
    target = _bias(fr, cfg)
    state = fr
    beta = fr.beta.copy()
    resid = concentrated_score(state) - target
    norm = float(np.max(np.abs(resid)))
    for it in range(1, cfg.score_max + 1):
        step = _solve_spd(state.hessian, resid)
        s = 1.0
        while True:
            cand = _reprofile(fr, state, beta + s * step)
            rhs = _bias(cand, cfg) if update else target
            cand_resid = concentrated_score(cand) - rhs
            cand_norm = float(np.max(np.abs(cand_resid)))
            if cand_norm < norm or s < 1e-3:
                break
            s *= 0.5
        moved = float(np.max(np.abs(s * step)))
        beta, state, resid, norm = cand.beta, cand, cand_resid, cand_norm
        logger.debug("%s iter %d score %.3e step %.3e", variant, it, norm, moved)
        # the step test guards against a score floor set by the centering tolerance
        if norm < cfg.score_tol or moved < 1e-12 * (1.0 + float(np.max(np.abs(beta)))):
            return BcResult(variant, fr.beta.copy(), beta, fr.beta - beta, state.hessian,
                            cfg.bandwidth, it, state, fr)
    raise NoConvergence(f"modified score equation not solved in {cfg.score_max} steps")


def abc3(fr: FitResult, cfg: Optional[BcConfig] = None) -> BcResult:
    """Root of the score corrected by the bias terms evaluated at the uncorrected fit."""
    return _score_solve(fr, cfg or BcConfig(), update=False, variant="abc3")


def abc4(fr: FitResult, cfg: Optional[BcConfig] = None) -> BcResult:
    """Like :func:`abc3` but the bias terms are re-evaluated at every candidate."""
    return _score_solve(fr, cfg or BcConfig(), update=True, variant="abc4")


def correct(fr: FitResult, cfg: Optional[BcConfig] = None) -> BcResult:
    cfg = cfg or BcConfig()
    return {"abc1": abc1, "abc2": abc2, "abc3": abc3, "abc4": abc4}[cfg.abc_variant](fr, cfg)


# ---------------------------------------------------------------------------
# split-panel jackknife


def subpanel_fits(p: PanelData, fam: Family, selectors, fit_cfg: Optional[FitConfig] = None) -> dict:
    """Fit every sub-panel of the unpruned panel ``p``; keyed by selector label."""
    out = {}
    for sel in selectors:
        try:
            out[sel.label] = fit(split_subpanel(p, sel), fam, fit_cfg)
        except PanelBCError as exc:
            raise SubpanelFitFailed(sel.label, f"{type(exc).__name__}: {exc}") from exc
    return out


def spj_combine(variant: str, full, parts: dict):
    """Jackknife combination of a full-sample statistic with its sub-panel counterparts.

    Halving either dimension doubles the corresponding leading bias, so
    ``3 full - mean(individual halves) - mean(time halves)`` and
    ``2 full - mean(quadrants)`` cancel it.
    """
    full = np.asarray(full, dtype=float)
    if variant == "spj1":
        by_n = 0.5 * (parts["indiv:first"] + parts["indiv:second"])
        by_t = 0.5 * (parts["time:first"] + parts["time:second"])
        return 3.0 * full - by_n - by_t
    quad = np.mean([parts[k] for k in sorted(parts)], axis=0)
    return 2.0 * full - quad


def _spj(variant, p, fam, fit_cfg, base) -> BcResult:
    if base is None:
        base = fit(p, fam, fit_cfg)
    selectors = SPJ1_SELECTORS if variant == "spj1" else SPJ2_SELECTORS
    fits = subpanel_fits(p, fam, selectors, fit_cfg)
    est = {k: f.beta for k, f in fits.items()}
    bt = spj_combine(variant, base.beta, est)
    return BcResult(variant, base.beta.copy(), bt, base.beta - bt, base.hessian, None, 1,
                    None, base, est, fits)


def spj1(p: PanelData, fam: Family, fit_cfg: Optional[FitConfig] = None,
         base: Optional[FitResult] = None) -> BcResult:
    """Half-panel jackknife over individuals and over periods.

    ``p`` is the unpruned panel; each half is pruned and fitted on its own.
    ``base`` may carry an existing fit of ``p``.
    """
    return _spj("spj1", p, fam, fit_cfg, base)


def spj2(p: PanelData, fam: Family, fit_cfg: Optional[FitConfig] = None,
         base: Optional[FitResult] = None) -> BcResult:
    """Jackknife over the four individual-by-period quadrants."""
    return _spj("spj2", p, fam, fit_cfg, base)

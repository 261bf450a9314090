"""Average partial effects, their bias correction and covariance estimators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .biascorr import (
    BcConfig,
    BcResult,
    group_ratio_sum,
    span_factors,
    spectral_sum,
    spj_combine,
)
from .centering import center_columns
from .families import Family
from .feglm import FitResult, _solve_spd
from .panel import BINARY, PanelData


@dataclass(frozen=True, eq=False)
class PartialEffects:
    """Per-observation partial effects and their derivatives.

    Attributes
    ----------
    delta : (n, J)
        Partial effect of each regressor at each observation.
    d_eta, d2_eta : (n, J)
        First and second derivatives of ``delta`` in the linear predictor.
    d_beta : (n, J, J)
        ``d_beta[o, j, k]`` is the derivative of ``delta[o, j]`` in ``beta_k``
        with the fixed effects held constant.
    n_cells : int
        Number of observed cells the averages run over. Cells removed because
        their group's outcome never varies have infinite fixed effects and
        hence zero partial effect; they count here but carry no row.
    """

    delta: np.ndarray
    d_eta: np.ndarray
    d2_eta: np.ndarray
    d_beta: np.ndarray
    kinds: tuple
    n_cells: int

    @property
    def n_obs(self) -> int:
        return self.delta.shape[0]


def partial_effects(eta, beta, p: PanelData, fam: Family, n_cells: Optional[int] = None) -> PartialEffects:
    """Partial effects at linear predictor ``eta`` and coefficients ``beta``.

    Continuous regressors use the derivative ``beta_j dF``. Binary regressors
    use the difference in ``F`` between switching the regressor on and off,
    everything else fixed. ``n_cells`` defaults to the number of rows of
    ``p``.
    """
    eta = np.asarray(eta, dtype=float)
    beta = np.asarray(beta, dtype=float)
    X = p.X
    n, J = X.shape
    delta = np.empty((n, J))
    d1 = np.empty((n, J))
    d2 = np.empty((n, J))
    db = np.empty((n, J, J))
    base = fam.evaluate(eta)
    for j, kind in enumerate(p.regressor_kinds):
        b = beta[j]
        if kind == BINARY:
            rest = eta - b * X[:, j]
            on = fam.evaluate(rest + b)
            off = fam.evaluate(rest)
            delta[:, j] = fam.cdf(rest + b) - fam.cdf(rest)
            d1[:, j] = on.dF - off.dF
            d2[:, j] = on.d2F - off.d2F
            db[:, j, :] = (on.dF - off.dF)[:, None] * X
            db[:, j, j] = on.dF
        else:
            delta[:, j] = b * base.dF
            d1[:, j] = b * base.d2F
            d2[:, j] = b * base.d3F
            db[:, j, :] = (b * base.d2F)[:, None] * X
            db[:, j, j] += base.dF
    n_cells = n if n_cells is None else int(n_cells)
    if n_cells < n:
        raise ValueError("n_cells cannot be smaller than the number of observations")
    return PartialEffects(delta, d1, d2, db, tuple(p.regressor_kinds), n_cells)


def effects_at(fr: FitResult) -> PartialEffects:
    """Partial effects of a fitted state, counting cells removed by pruning."""
    return partial_effects(fr.eta, fr.beta, fr.panel, fr.family,
                           fr.n_obs + fr.dropped.n_obs_dropped)


def ape(pe: PartialEffects) -> np.ndarray:
    """Mean partial effect over the observed cells."""
    return pe.delta.sum(axis=0) / pe.n_cells


def _psi_parts(state: FitResult, pe: PartialEffects):
    psi = pe.d_eta / state.weights[:, None]
    m_psi = center_columns(psi, state.workspace()).reshape(psi.shape)
    return m_psi, psi - m_psi


def ape_bias_terms(state: FitResult, pe: PartialEffects, bandwidth: int = 1,
                   adjustment: str = "individual"):
    """Individual and time bias terms ``(B, C)`` for the average partial effects."""
    p, fam = state.panel, state.family
    span_factors(p, bandwidth, adjustment)
    m_psi, p_psi = _psi_parts(state, pe)
    d = fam.evaluate(state.eta)
    core = -(state.H * d.d2F)[:, None] * p_psi + pe.d2_eta
    fi, ft = p.factors
    B = group_ratio_sum(core, fi.codes, fi.group_count, state.weights)
    B += 2.0 * spectral_sum(p, state.score_resid, state.weights, m_psi, bandwidth, adjustment)
    C = group_ratio_sum(core, ft.codes, ft.group_count, state.weights)
    return 0.5 * B, 0.5 * C


def ape_abc(state: FitResult, pe: Optional[PartialEffects] = None, bandwidth: int = 1,
            adjustment: str = "individual") -> np.ndarray:
    """Bias-corrected APE from a state re-profiled at corrected coefficients."""
    if pe is None:
        pe = effects_at(state)
    B, C = ape_bias_terms(state, pe, bandwidth, adjustment)
    return ape(pe) - (B + C) / pe.n_cells


def influence(state: FitResult, pe: PartialEffects, hessian=None) -> np.ndarray:
    """Per-observation ``Gamma`` combining coefficient and fixed-effect estimation noise."""
    W = state.hessian if hessian is None else hessian
    _, p_psi = _psi_parts(state, pe)
    PX = state.PX_X
    # jac[k, j] = sum_o d delta_j / d beta_k - PX_k d_eta_j
    jac = pe.d_beta.sum(axis=0).T - PX.T @ pe.d_eta
    lever = _solve_spd(W, state.MX_X.T).T * state.score_resid[:, None]
    return lever @ jac - p_psi * state.score_resid[:, None]


def _later_cross(p: PanelData, dbar: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """``sum_i sum_{t < s} dbar_it gamma_is'`` (rows sorted by individual, then time)."""
    J = dbar.shape[1]
    starts = p.indiv_starts
    # exclusive within-individual cumulative sums of dbar
    cum = np.cumsum(dbar, axis=0)
    first = cum[starts[:-1]] - dbar[starts[:-1]]
    before = cum - dbar - np.repeat(first, p.indiv_counts, axis=0)
    out = before.T @ gamma
    return out.reshape(J, gamma.shape[1])


def _cov_parts(state: FitResult, pe: PartialEffects, hessian=None):
    dbar = pe.delta - ape(pe)
    gamma = influence(state, pe, hessian)
    cross = _later_cross(state.panel, dbar, gamma)
    return dbar, gamma, cross + cross.T


def ape_cov_full(state: FitResult, pe: PartialEffects, exogenous: bool = False,
                 hessian=None) -> np.ndarray:
    """Covariance of the APE from the total ``Delta`` sum, ``Gamma`` and their cross term."""
    dbar, gamma, cross = _cov_parts(state, pe, hessian)
    tot = dbar.sum(axis=0)
    V = np.outer(tot, tot) + gamma.T @ gamma
    if not exogenous:
        V += cross
    return V / pe.n_cells**2


def ape_cov_simplified(state: FitResult, pe: PartialEffects, exogenous: bool = False,
                       hessian=None) -> np.ndarray:
    """Covariance of the APE with per-individual and same-period ``Delta`` products.

    The default estimator. ``exogenous=True`` drops the ``Delta``-``Gamma``
    cross term, valid when every regressor is strictly exogenous.
    """
    p = state.panel
    dbar, gamma, cross = _cov_parts(state, pe, hessian)
    J = dbar.shape[1]
    fi, ft = p.factors
    by_i = np.column_stack([np.bincount(fi.codes, weights=dbar[:, j], minlength=fi.group_count)
                            for j in range(J)])
    by_t = np.column_stack([np.bincount(ft.codes, weights=dbar[:, j], minlength=ft.group_count)
                            for j in range(J)])
    V = by_i.T @ by_i + (by_t.T @ by_t - dbar.T @ dbar) + gamma.T @ gamma
    if not exogenous:
        V += cross
    return V / pe.n_cells**2


def ape_se(V: np.ndarray) -> np.ndarray:
    return np.sqrt(np.clip(np.diag(V), 0.0, None))


@dataclass(frozen=True, eq=False)
class ApeResult:
    label: str
    estimate: np.ndarray
    cov: np.ndarray

    @property
    def se(self) -> np.ndarray:
        return ape_se(self.cov)


def ape_for(fr: FitResult, bc: Optional[BcResult] = None, cfg: Optional[BcConfig] = None,
            covariance: str = "simplified", exogenous: bool = False) -> ApeResult:
    """APE for the uncorrected fit or for a coefficient correction.

    Analytical corrections evaluate effects at the re-profiled corrected state
    and subtract the APE bias terms. Jackknife corrections combine sub-panel
    APEs. Covariances are evaluated where the effects are.
    """
    cov_fn = ape_cov_simplified if covariance == "simplified" else ape_cov_full
    if bc is None or bc.variant in ("spj1", "spj2"):
        pe = effects_at(fr)
        V = cov_fn(fr, pe, exogenous)
        if bc is None:
            return ApeResult("MLE", ape(pe), V)
        parts = {k: ape(effects_at(f)) for k, f in bc.subpanel_fits.items()}
        return ApeResult(bc.label, spj_combine(bc.variant, ape(pe), parts), V)
    state = bc.state
    if state is None:
        raise ValueError("analytical correction was computed without a re-profiled state")
    cfg = cfg or BcConfig(bandwidth=bc.bandwidth or 0)
    pe = effects_at(state)
    est = ape_abc(state, pe, bc.bandwidth or 0, cfg.adjustment)
    return ApeResult(bc.label, est, cov_fn(state, pe, exogenous))


def ape_spj(p: PanelData, fam: Family, variant: str = "spj1", fit_cfg=None, base=None) -> np.ndarray:
    """Jackknife-corrected APE from fresh sub-panel fits of ``p``."""
    from .biascorr import spj1, spj2

    bc = (spj1 if variant == "spj1" else spj2)(p, fam, fit_cfg, base)
    return ape_for(bc.base, bc).estimate

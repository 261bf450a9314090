"""Fisher scoring for binary-choice (and linear) models with two-way fixed effects.

The fixed effects are concentrated out: every iteration centers the working
response and the regressors under the current weights, solves a J x J
weighted least-squares problem for the structural coefficients and updates
the linear predictor directly. The fixed effects themselves are never stored;
the linear predictor carries them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg

from .centering import CenteringWorkspace, center_columns
from .errors import Collinear, NoConvergence
from .families import Family
from .panel import DropLog, PanelData, drop_noninformative

logger = logging.getLogger(__name__)

COLLINEAR_PIVOT_TOL = 1e-10


@dataclass(frozen=True)
class FitConfig:
    """Stopping rules for the estimation loops."""

    tol_dev: float = 1e-9
    tol_step: float = 1e-8
    max_iter: int = 100
    max_halvings: int = 20
    center_tol: float = 1e-8
    max_sweeps: int = 100_000

    def __post_init__(self):
        for name in ("tol_dev", "tol_step", "center_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class FitResult:
    """State of the concentrated problem at some coefficient vector.

    ``fit`` returns it at the maximum likelihood estimate; bias corrections
    build the same object at a corrected coefficient vector through
    :func:`evaluate_at`.
    """

    beta: np.ndarray
    eta: np.ndarray
    loglik: float
    weights: np.ndarray
    nu: np.ndarray
    score_resid: np.ndarray
    H: np.ndarray
    MX_X: np.ndarray
    MX_nu: np.ndarray
    hessian: np.ndarray
    panel: PanelData
    family: Family
    config: FitConfig
    iterations: int = 0
    converged: bool = True
    dropped: DropLog = field(default_factory=DropLog)

    @property
    def n_obs(self) -> int:
        return self.panel.n_obs

    @property
    def PX_X(self) -> np.ndarray:
        return self.panel.X - self.MX_X

    def workspace(self) -> CenteringWorkspace:
        return CenteringWorkspace.build(
            self.panel, self.weights, self.config.center_tol, self.config.max_sweeps
        )

    @property
    def se(self) -> np.ndarray:
        return standard_errors(self)


def _check_rank(W: np.ndarray) -> None:
    _, R, piv = scipy.linalg.qr(W, pivoting=True)
    d = np.abs(np.diag(R))
    if d.size and (d[0] == 0.0 or d[-1] < COLLINEAR_PIVOT_TOL * d[0]):
        raise Collinear("centered regressors are rank deficient (regressor absorbed by fixed effects?)")


def _solve_spd(W, b):
    try:
        c = scipy.linalg.cho_factor(W)
    except np.linalg.LinAlgError as exc:
        raise Collinear(f"concentrated Hessian is not positive definite: {exc}") from None
    return scipy.linalg.cho_solve(c, b)


def _state(panel: PanelData, fam: Family, beta, eta, cfg: FitConfig, *, iterations=0,
           converged=True, dropped=None, check_rank=True) -> FitResult:
    wq = fam.working_quantities(eta, panel.y)
    ws = CenteringWorkspace.build(panel, wq.weight, cfg.center_tol, cfg.max_sweeps)
    V = np.column_stack([panel.X, wq.nu])
    MV = center_columns(V, ws)
    MX = np.asfortranarray(MV[:, :-1])
    W = (MX * wq.weight[:, None]).T @ MX
    W = 0.5 * (W + W.T)
    if check_rank:
        _check_rank(W)
    return FitResult(
        beta=np.asarray(beta, dtype=float).copy(),
        eta=np.asarray(eta, dtype=float).copy(),
        loglik=fam.loglik(eta, panel.y),
        weights=wq.weight,
        nu=wq.nu,
        score_resid=wq.score,
        H=wq.H,
        MX_X=MX,
        MX_nu=MV[:, -1].copy(),
        hessian=W,
        panel=panel,
        family=fam,
        config=cfg,
        iterations=iterations,
        converged=converged,
        dropped=dropped if dropped is not None else DropLog(),
    )


def fit(p: PanelData, fam: Family, cfg: Optional[FitConfig] = None, prune: bool = True) -> FitResult:
    """Maximum likelihood with individual and time fixed effects.

    Each iteration regresses the centered working response ``M(eta + nu)``
    on the centered regressors ``MX`` under the working weights and takes the
    fitted values as the new linear predictor. When ``eta`` already lies in
    the model space this is the same as updating by
    ``nu - M nu + MX (beta_new - beta)``; the working-response form also
    repairs a starting value that does not. A step is halved while it lowers
    the log-likelihood.

    Scoring stops once the relative log-likelihood change is below
    ``tol_dev``, the coefficient step is below ``tol_step`` or a step had to
    be halved. The same update is then repeated with the observed instead of
    the expected information (still positive for these families) until the
    step is below ``tol_step``; this replaces the slow linear tail of scoring
    without changing the limit.

    Binary outcomes are first passed through :func:`drop_noninformative`
    unless ``prune=False``.
    """
    cfg = cfg or FitConfig()
    dropped = DropLog()
    if prune and fam.is_binary:
        p, dropped = drop_noninformative(p)
    J = p.n_regressors
    if J < 1:
        raise ValueError("at least one regressor is required")
    y = p.y
    beta = np.zeros(J)
    eta = fam.start_eta(y)
    # the start is not of the form X beta + D phi; its likelihood is no baseline
    ll = -np.inf
    converged = False
    newton = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        wq = fam.working_quantities(eta, y)
        weight, nu = wq.weight, wq.nu
        if newton:
            obs = fam.observed_weight(eta, y)
            if np.all(obs > 0.0) and np.all(np.isfinite(obs)):
                weight, nu = obs, wq.score / obs
        ws = CenteringWorkspace.build(p, weight, cfg.center_tol, cfg.max_sweeps)
        MV = center_columns(np.column_stack([p.X, eta + nu]), ws)
        MX, Mz = MV[:, :-1], MV[:, -1]
        wMX = MX * weight[:, None]
        W = wMX.T @ MX
        if it == 1:
            _check_rank(W)
        beta_full = _solve_spd(W, wMX.T @ Mz)
        eta_full = (eta + nu) - Mz + MX @ beta_full
        d_beta = beta_full - beta
        d_eta = eta_full - eta
        if fam.is_linear:
            beta, eta, ll = beta_full, eta_full, fam.loglik(eta_full, y)
            converged = True
            break
        s = 1.0
        for _ in range(cfg.max_halvings + 1):
            new_eta = eta + s * d_eta
            new_ll = fam.loglik(new_eta, y)
            if not np.isfinite(ll) or new_ll >= ll - 1e-12 * abs(ll):
                break
            s *= 0.5
        new_beta = beta + s * d_beta
        rel = abs(new_ll - ll) / (0.1 + abs(new_ll)) if np.isfinite(ll) else np.inf
        step = float(np.max(np.abs(new_beta - beta)))
        beta, eta, ll = new_beta, new_eta, new_ll
        logger.debug("iter %d loglik %.10f step %.3e halving %.4g newton %s", it, ll, step, s, newton)
        if newton and step < cfg.tol_step:
            converged = True
            break
        # scoring converges only linearly and can zig-zag; finish with observed-information steps
        if rel < cfg.tol_dev or step < cfg.tol_step or s < 1.0:
            newton = True
    if not converged:
        raise NoConvergence(f"Fisher scoring did not converge in {cfg.max_iter} iterations")
    return _state(p, fam, beta, eta, cfg, iterations=it, converged=True, dropped=dropped)


def offset_refit(p: PanelData, fam: Family, beta_fixed, cfg: Optional[FitConfig] = None,
                 eta_start=None) -> np.ndarray:
    """Linear predictor maximizing the likelihood over the fixed effects with ``beta`` held fixed.

    Iterates ``eta <- eta + (nu - M nu)``, i.e. adds the weighted projection of
    the working residual on the dummies. ``eta_start`` (if given) must equal
    ``X beta_fixed`` plus something in the span of the dummies; otherwise the
    start is built from the usual GLM starting values by an unweighted
    projection.
    """
    cfg = cfg or FitConfig()
    y = p.y
    beta_fixed = np.asarray(beta_fixed, dtype=float)
    offset = p.X @ beta_fixed
    if eta_start is None:
        z = fam.start_eta(y) - offset
        ws1 = CenteringWorkspace.build(p, None, cfg.center_tol, cfg.max_sweeps)
        eta = offset + (z - center_columns(z, ws1))
    else:
        eta = np.asarray(eta_start, dtype=float).copy()
    ll = fam.loglik(eta, y)
    for it in range(1, cfg.max_iter + 1):
        wq = fam.working_quantities(eta, y)
        ws = CenteringWorkspace.build(p, wq.weight, cfg.center_tol, cfg.max_sweeps)
        d_eta = wq.nu - center_columns(wq.nu, ws)
        if fam.is_linear:
            return eta + d_eta
        s = 1.0
        for _ in range(cfg.max_halvings + 1):
            new_eta = eta + s * d_eta
            new_ll = fam.loglik(new_eta, y)
            if new_ll >= ll - 1e-12 * abs(ll):
                break
            s *= 0.5
        step = float(np.max(np.abs(new_eta - eta)))
        rel = abs(new_ll - ll) / (0.1 + abs(new_ll))
        eta, ll = new_eta, new_ll
        if step < cfg.tol_step or (rel < 1e-2 * cfg.tol_dev and step < 1e2 * cfg.tol_step):
            return eta
    raise NoConvergence(f"offset iterations did not converge in {cfg.max_iter} iterations")


def evaluate_at(base: FitResult, beta, eta_start=None) -> FitResult:
    """Re-profile the fixed effects at ``beta`` and rebuild every fitted quantity there."""
    p, fam, cfg = base.panel, base.family, base.config
    beta = np.asarray(beta, dtype=float)
    if eta_start is None:
        eta_start = base.eta + p.X @ (beta - base.beta)
    eta = offset_refit(p, fam, beta, cfg, eta_start=eta_start)
    return _state(p, fam, beta, eta, cfg, dropped=base.dropped)


def concentrated_hessian(fr: FitResult) -> np.ndarray:
    """``sum_it w_it (MX)_it (MX)_it'``."""
    W = (fr.MX_X * fr.weights[:, None]).T @ fr.MX_X
    return 0.5 * (W + W.T)


def concentrated_score(fr: FitResult) -> np.ndarray:
    """Gradient of the concentrated log-likelihood, ``(MX)' Omega nu``."""
    return fr.MX_X.T @ (fr.weights * fr.nu)


def standard_errors(fr: FitResult, hessian=None) -> np.ndarray:
    W = fr.hessian if hessian is None else hessian
    return np.sqrt(np.diag(np.linalg.inv(W)))


def with_config(fr: FitResult, **changes) -> FitResult:
    return replace(fr, config=replace(fr.config, **changes))

"""Two-way fixed-effects linear probability model with a dynamic-bias correction.

The correction is the Gaussian-identity case of the analytical coefficient
correction: with ``F(eta) = eta`` the second derivative vanishes and only the
serial-correlation (Nickell) part of the bias term survives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .biascorr import BcConfig, abc1
from .families import GAUSSIAN
from .feglm import FitConfig, FitResult, fit
from .panel import PanelData


@dataclass(frozen=True, eq=False)
class LpmResult:
    beta: np.ndarray
    beta_corrected: np.ndarray
    se: np.ndarray
    fitted: np.ndarray
    out_of_unit_fraction: float
    sigma2: float
    bandwidth: int
    fit: FitResult

    @property
    def cov(self) -> np.ndarray:
        return np.linalg.inv(self.fit.hessian) * self.sigma2


def lpm_fit(p: PanelData, bandwidth: int = 1, fit_cfg: FitConfig | None = None) -> LpmResult:
    """Within OLS plus the dynamic-bias correction with ``bandwidth`` lags.

    Standard errors are ``sqrt(diag(W^{-1}) * s2)`` where ``s2`` is the
    residual sum of squares over ``n - (N + T - 1 + J)``. ``fitted`` holds the
    fitted values of the corrected model, i.e. with the fixed effects
    re-profiled at the corrected coefficients.
    """
    fr = fit(p, GAUSSIAN, fit_cfg, prune=False)
    n, J = p.n_obs, p.n_regressors
    dof = n - (p.n_indiv + p.n_time - 1 + J)
    if dof <= 0:
        raise ValueError("not enough observations for the residual variance")
    resid = p.y - fr.eta
    sigma2 = float(resid @ resid) / dof
    se = np.sqrt(np.diag(np.linalg.inv(fr.hessian)) * sigma2)
    if bandwidth > 0:
        bc = abc1(fr, BcConfig(bandwidth=bandwidth))
        beta_c, fitted = bc.beta_corrected, bc.state.eta
    else:
        beta_c, fitted = fr.beta.copy(), fr.eta.copy()
    frac = float(np.mean((fitted < 0.0) | (fitted > 1.0)))
    return LpmResult(fr.beta.copy(), beta_c, se, fitted, frac, sigma2, bandwidth, fr)


def lpm_ape(r: LpmResult) -> np.ndarray:
    """Under linearity the partial effect of every regressor is its coefficient."""
    return r.beta_corrected.copy()

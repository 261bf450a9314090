"""Binary-choice distribution functions and derivatives in the linear predictor.

Each family returns ``F`` and its first three derivatives with respect to
``eta``. The Gaussian identity family is included so the linear model can run
through the same estimation and correction code.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

from .errors import DegenerateWeight, NonFiniteEta

KINDS = ("logit", "probit", "cloglog", "gaussian")

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Derivatives(NamedTuple):
    F: np.ndarray
    dF: np.ndarray
    d2F: np.ndarray
    d3F: np.ndarray


class WorkingQuantities(NamedTuple):
    score: np.ndarray
    weight: np.ndarray
    H: np.ndarray
    nu: np.ndarray


@dataclass(frozen=True)
class Family:
    """A distribution for the latent error, or ``"gaussian"`` for the linear model.

    Parameters
    ----------
    kind : {"logit", "probit", "cloglog", "gaussian"}
    clamp_eps : float
        Floor applied to ``F`` and ``1 - F`` before they enter ratios.
    """

    kind: str = "probit"
    clamp_eps: float = 1e-10

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family {self.kind!r}; expected one of {KINDS}")
        if not 0 < self.clamp_eps < 0.5:
            raise ValueError("clamp_eps must lie in (0, 0.5)")

    @property
    def is_binary(self) -> bool:
        return self.kind != "gaussian"

    @property
    def is_linear(self) -> bool:
        return self.kind == "gaussian"

    def cdf(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.kind == "logit":
            return special.expit(eta)
        if self.kind == "probit":
            return special.ndtr(eta)
        if self.kind == "cloglog":
            return -np.expm1(-np.exp(eta))
        return eta.copy()

    def evaluate(self, eta) -> Derivatives:
        """``(F, dF, d2F, d3F)`` at ``eta``; binary ``F`` is clamped."""
        eta = np.asarray(eta, dtype=float)
        if not np.all(np.isfinite(eta)):
            raise NonFiniteEta("linear predictor contains non-finite values")
        kind = self.kind
        if kind == "gaussian":
            one = np.ones_like(eta)
            zero = np.zeros_like(eta)
            return Derivatives(eta.copy(), one, zero, zero.copy())
        if kind == "logit":
            F = special.expit(eta)
            dF = F * (1.0 - F)
            d2F = dF * (1.0 - 2.0 * F)
            d3F = dF * ((1.0 - 2.0 * F) ** 2 - 2.0 * dF)
        elif kind == "probit":
            F = special.ndtr(eta)
            dF = _INV_SQRT_2PI * np.exp(-0.5 * eta * eta)
            d2F = -eta * dF
            d3F = (eta * eta - 1.0) * dF
        else:
            e = np.exp(eta)
            F = -np.expm1(-e)
            dF = np.exp(eta - e)
            d2F = dF * (1.0 - e)
            d3F = d2F * (2.0 - e) - dF
        F = np.clip(F, self.clamp_eps, 1.0 - self.clamp_eps)
        return Derivatives(F, dF, d2F, d3F)

    def link(self, mu):
        """Inverse of ``F``; used for starting values."""
        mu = np.asarray(mu, dtype=float)
        if self.kind == "logit":
            return special.logit(mu)
        if self.kind == "probit":
            return special.ndtri(mu)
        if self.kind == "cloglog":
            return np.log(-np.log1p(-mu))
        return mu.copy()

    def start_eta(self, y):
        y = np.asarray(y, dtype=float)
        if self.is_linear:
            return np.full_like(y, y.mean())
        return self.link((y + 0.5) / 2.0)

    def working_quantities(self, eta, y, derivs: Derivatives | None = None) -> WorkingQuantities:
        """Score ``H (y - F)``, weight ``H dF``, ``H`` and working residual ``(y - F) / dF``."""
        y = np.asarray(y, dtype=float)
        d = self.evaluate(eta) if derivs is None else derivs
        if self.is_linear:
            r = y - d.F
            one = np.ones_like(r)
            return WorkingQuantities(r, one, one.copy(), r.copy())
        F, dF = d.F, d.dF
        H = dF / (F * (1.0 - F))
        w = H * dF
        if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
            raise DegenerateWeight("working weight underflowed; linear predictor too extreme")
        resid = y - F
        return WorkingQuantities(H * resid, w, H, resid / dF)

    def observed_weight(self, eta, y, derivs: Derivatives | None = None) -> np.ndarray:
        """Negative second derivative of the log-likelihood in ``eta``.

        Positive for the log-concave binary families; equals the working
        weight in expectation.
        """
        y = np.asarray(y, dtype=float)
        d = self.evaluate(eta) if derivs is None else derivs
        if self.is_linear:
            return np.ones_like(y)
        F, dF = d.F, d.dF
        v = F * (1.0 - F)
        dH = d.d2F / v - dF * dF * (1.0 - 2.0 * F) / (v * v)
        return dF * dF / v - dH * (y - F)

    def loglik(self, eta, y) -> float:
        y = np.asarray(y, dtype=float)
        if self.is_linear:
            r = y - np.asarray(eta, dtype=float)
            return float(-0.5 * np.dot(r, r))
        F = np.clip(self.cdf(eta), self.clamp_eps, 1.0 - self.clamp_eps)
        return float(np.sum(y * np.log(F) + (1.0 - y) * np.log1p(-F)))


def evaluate(fam: Family, eta) -> Derivatives:
    return fam.evaluate(eta)


def working_quantities(fam: Family, eta, y) -> WorkingQuantities:
    return fam.working_quantities(eta, y)


LOGIT = Family("logit")
PROBIT = Family("probit")
CLOGLOG = Family("cloglog")
GAUSSIAN = Family("gaussian")

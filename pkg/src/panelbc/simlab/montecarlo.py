"""Replication engine, evaluation statistics and Wald tests."""

from __future__ import annotations

import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from ..ape import ape_for
from ..biascorr import BcConfig, abc1, abc2, abc3, abc4, spj1, spj2
from ..errors import PanelBCError
from ..families import GAUSSIAN, PROBIT
from ..feglm import FitConfig, fit
from ..lpm import lpm_fit
from .dgp import DgpConfig, generate

logger = logging.getLogger(__name__)

Z95 = 1.959964
CHI2_2_95 = float(stats.chi2.ppf(0.95, 2))
PARAMS = ("y_lag", "x")
QUANTITIES = ("coef", "ape")

_EST_RE = re.compile(r"^(MLE|LM|SPJ1|SPJ2|ABC[1-4]|LPM|BC)(?:\s*\(\s*(\d+)\s*\))?$")


@dataclass(frozen=True)
class EstimatorSpec:
    """An estimator label such as ``MLE``, ``ABC1(1)``, ``SPJ1``, ``LPM(2)`` or ``BC(2)``."""

    name: str
    bandwidth: Optional[int] = None

    @property
    def label(self) -> str:
        if self.bandwidth is None:
            return self.name
        return f"{self.name} ({self.bandwidth})"

    @property
    def linear(self) -> bool:
        return self.name in ("LPM", "LM", "BC")

    @property
    def has_coef(self) -> bool:
        # the LPM coefficient is not comparable to a probit coefficient
        return self.name != "LPM"


def parse_estimator(text: str) -> EstimatorSpec:
    m = _EST_RE.match(text.strip().upper())
    if not m:
        raise ValueError(f"unknown estimator {text!r}")
    name, bw = m.group(1), m.group(2)
    if name in ("ABC1", "ABC2", "ABC3", "ABC4", "LPM", "BC"):
        return EstimatorSpec(name, 1 if bw is None else int(bw))
    if bw is not None:
        raise ValueError(f"estimator {name} takes no bandwidth")
    return EstimatorSpec(name)


def wald_test(beta_hat, cov, h0, critical: float = CHI2_2_95):
    """``(b - h0)' cov^{-1} (b - h0)`` and whether it exceeds ``critical``."""
    d = np.asarray(beta_hat, dtype=float) - np.asarray(h0, dtype=float)
    stat = float(d @ np.linalg.solve(np.asarray(cov, dtype=float), d))
    return stat, stat > critical


@dataclass
class EstimateRecord:
    coef: np.ndarray
    coef_se: np.ndarray
    ape: np.ndarray
    ape_se: np.ndarray
    wald: float


def run_estimators(panel, specs: Sequence[EstimatorSpec], h0, fit_cfg: Optional[FitConfig] = None,
                   covariance: str = "simplified") -> tuple[dict, dict]:
    """Apply every estimator to one panel; returns ``(records, failures)`` keyed by label."""
    out, failed = {}, {}
    base = None
    base_err = None
    if any(not s.linear for s in specs):
        try:
            base = fit(panel, PROBIT, fit_cfg)
        except PanelBCError as exc:
            base_err = exc
    for s in specs:
        try:
            if s.linear:
                out[s.label] = _linear_record(panel, s, h0, fit_cfg)
                continue
            if base is None:
                raise base_err
            out[s.label] = _probit_record(panel, base, s, h0, fit_cfg, covariance)
        except PanelBCError as exc:
            failed[s.label] = f"{type(exc).__name__}: {exc}"
    return out, failed


def _probit_record(panel, base, s: EstimatorSpec, h0, fit_cfg, covariance) -> EstimateRecord:
    if s.name == "MLE":
        a = ape_for(base, covariance=covariance)
        return EstimateRecord(base.beta, base.se, a.estimate, a.se,
                              wald_test(base.beta, np.linalg.inv(base.hessian), h0)[0])
    if s.name.startswith("ABC"):
        fn = {"ABC1": abc1, "ABC2": abc2, "ABC3": abc3, "ABC4": abc4}[s.name]
        cfg = BcConfig(bandwidth=s.bandwidth)
        bc = fn(base, cfg)
    else:
        bc = (spj1 if s.name == "SPJ1" else spj2)(panel, PROBIT, fit_cfg, base)
        cfg = None
    a = ape_for(base, bc, cfg, covariance=covariance)
    return EstimateRecord(bc.beta_corrected, bc.se, a.estimate, a.se,
                          wald_test(bc.beta_corrected, np.linalg.inv(bc.hessian), h0)[0])


def _linear_record(panel, s: EstimatorSpec, h0, fit_cfg) -> EstimateRecord:
    bw = 0 if s.name == "LM" else s.bandwidth
    r = lpm_fit(panel, bw, fit_cfg)
    b = r.beta_corrected
    return EstimateRecord(b, r.se, b.copy(), r.se.copy(), wald_test(b, r.cov, h0)[0])


# ---------------------------------------------------------------------------
# replications


def replication_rng(base_seed: int, rep: int) -> np.random.Generator:
    """Independent stream for replication ``rep``; identical under any schedule."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(base_seed, spawn_key=(rep,))))


@dataclass
class Replication:
    rep: int
    truth_coef: np.ndarray
    truth_ape: np.ndarray
    records: dict
    failures: dict


def run_replication(cfg: DgpConfig, specs, base_seed: int, rep: int,
                    fit_cfg: Optional[FitConfig] = None) -> Replication:
    panel, truth = generate(cfg, replication_rng(base_seed, rep))
    records, failures = run_estimators(panel, specs, truth.coef, fit_cfg)
    for label, why in failures.items():
        logger.info("replication %d: %s failed (%s)", rep, label, why)
    return Replication(rep, truth.coef, truth.ape, records, failures)


def _run_chunk(args):
    cfg, specs, base_seed, reps, fit_cfg = args
    return [run_replication(cfg, specs, base_seed, r, fit_cfg) for r in reps]


def run_replications(cfg: DgpConfig, estimators, reps: int, base_seed: int, threads: int = 1,
                     fit_cfg: Optional[FitConfig] = None) -> list[Replication]:
    specs = [parse_estimator(e) if isinstance(e, str) else e for e in estimators]
    if threads <= 1 or reps <= 1:
        return _run_chunk((cfg, specs, base_seed, range(reps), fit_cfg))
    n_chunks = min(reps, threads * 4)
    chunks = [list(range(reps))[k::n_chunks] for k in range(n_chunks)]
    out: list[Replication] = []
    with ProcessPoolExecutor(max_workers=threads) as pool:
        for part in pool.map(_run_chunk, [(cfg, specs, base_seed, c, fit_cfg) for c in chunks]):
            out.extend(part)
    out.sort(key=lambda r: r.rep)
    return out


# ---------------------------------------------------------------------------
# summaries


@dataclass(frozen=True)
class SummaryRow:
    estimator: str
    quantity: str
    param: str
    bias: float
    sd: float
    rmse: float
    se_sd: float
    cp95: float
    n: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def summarize(estimates, truths, ses=None) -> dict:
    """Relative bias, SD and RMSE in percent, SE/SD and 95% coverage.

    ``truths`` may vary by replication; relative errors are formed per
    replication before averaging.
    """
    est = np.asarray(estimates, dtype=float)
    tru = np.broadcast_to(np.asarray(truths, dtype=float), est.shape)
    rel = (est - tru) / tru
    n = est.shape[0]
    bias = 100.0 * float(np.mean(rel)) if n else math.nan
    sd = 100.0 * float(np.std(rel, ddof=1)) if n > 1 else math.nan
    rmse = 100.0 * float(np.sqrt(np.mean(rel * rel))) if n else math.nan
    se_sd = cp = math.nan
    if ses is not None and n:
        se = np.asarray(ses, dtype=float)
        sd_abs = float(np.std(est, ddof=1)) if n > 1 else math.nan
        se_sd = float(np.mean(se)) / sd_abs if sd_abs > 0 else math.nan
        cp = float(np.mean(np.abs(est - tru) <= Z95 * se))
    return {"bias": bias, "sd": sd, "rmse": rmse, "se_sd": se_sd, "cp95": cp, "n": n}


@dataclass
class McSummary:
    design: dict
    estimators: list
    reps: int
    base_seed: int
    rows: list = field(default_factory=list)
    wald_size: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    def row(self, estimator: str, quantity: str, param: str) -> SummaryRow:
        for r in self.rows:
            if r.estimator == estimator and r.quantity == quantity and r.param == param:
                return r
        raise KeyError((estimator, quantity, param))

    def to_dict(self) -> dict:
        return {
            "design": self.design,
            "estimators": list(self.estimators),
            "reps": self.reps,
            "base_seed": self.base_seed,
            "rows": [r.to_dict() for r in self.rows],
            "wald_size": dict(self.wald_size),
            "failures": dict(self.failures),
        }


def summarize_replications(cfg: DgpConfig, estimators, reps: list[Replication], base_seed: int) -> McSummary:
    specs = [parse_estimator(e) if isinstance(e, str) else e for e in estimators]
    summ = McSummary(cfg.to_dict(), [s.label for s in specs], len(reps), base_seed)
    for s in specs:
        ok = [r for r in reps if s.label in r.records]
        summ.failures[s.label] = len(reps) - len(ok)
        for q in QUANTITIES:
            if q == "coef" and not s.has_coef:
                continue
            for j, name in enumerate(PARAMS):
                est = [getattr(r.records[s.label], q)[j] for r in ok]
                se = [getattr(r.records[s.label], q + "_se")[j] for r in ok]
                tru = [(r.truth_coef if q == "coef" else r.truth_ape)[j] for r in ok]
                st = summarize(est, tru, se) if ok else summarize(np.empty(0), np.empty(0))
                summ.rows.append(SummaryRow(s.label, q, name, st["bias"], st["sd"], st["rmse"],
                                            st["se_sd"], st["cp95"], st["n"]))
        if s.has_coef:
            w = np.array([r.records[s.label].wald for r in ok])
            summ.wald_size[s.label] = float(np.mean(w > CHI2_2_95)) if ok else math.nan
    return summ


def run_monte_carlo(cfg: DgpConfig, estimators, reps: int, base_seed: int, threads: int = 1,
                    fit_cfg: Optional[FitConfig] = None, keep_draws: bool = False):
    """Run ``reps`` replications and summarize them.

    Returns the :class:`McSummary`, or ``(summary, replications)`` when
    ``keep_draws`` is set.
    """
    draws = run_replications(cfg, estimators, reps, base_seed, threads, fit_cfg)
    summ = summarize_replications(cfg, estimators, draws, base_seed)
    return (summ, draws) if keep_draws else summ

"""Weighted two-way within transformation by alternating projections.

The residual projection onto the orthogonal complement of the individual and
time dummies (under the weighted inner product) is never formed. Instead the
two one-way weighted demeaning operators are applied in turn until a full
sweep leaves the vector unchanged up to the tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import NoConvergence, ZeroGroupWeight
from .panel import PanelData

INDIV = 0
TIME = 1


@numba.njit(cache=True)
def _demean_once(v, codes, w, inv_sums, acc):
    acc[:] = 0.0
    n = v.shape[0]
    for o in range(n):
        acc[codes[o]] += w[o] * v[o]
    for o in range(n):
        v[o] -= acc[codes[o]] * inv_sums[codes[o]]


@numba.njit(cache=True)
def _map_columns(V, c1, c2, w, inv1, inv2, tol, max_sweeps):
    n, k = V.shape
    out = V.copy()
    sweeps = np.zeros(k, dtype=np.int64)
    acc1 = np.empty(inv1.shape[0])
    acc2 = np.empty(inv2.shape[0])
    prev = np.empty(n)
    for j in range(k):
        v = out[:, j]
        scale = 0.0
        for o in range(n):
            a = abs(v[o])
            if a > scale:
                scale = a
        thresh = tol * (1.0 + scale)
        done = False
        s = 0
        last = np.inf
        while s < max_sweeps:
            s += 1
            for o in range(n):
                prev[o] = v[o]
            _demean_once(v, c1, w, inv1, acc1)
            _demean_once(v, c2, w, inv2, acc2)
            diff = 0.0
            for o in range(n):
                d = abs(v[o] - prev[o])
                if d > diff:
                    diff = d
            # linear convergence: distance to the limit is about diff / (1 - rate)
            rate = diff / last if last > 0.0 else 0.0
            if rate > 0.999:
                rate = 0.999
            last = diff
            if diff < thresh * (1.0 - rate):
                done = True
                break
        sweeps[j] = s if done else -1
    return out, sweeps


@dataclass(frozen=True, eq=False)
class CenteringWorkspace:
    """Group codes, weights and inverse group weight sums for both factors.

    Built once per set of weights and shared by every vector centered under
    those weights.
    """

    codes: tuple
    weights: np.ndarray
    inv_sums: tuple
    tolerance: float = 1e-8
    max_sweeps: int = 100_000

    @classmethod
    def build(cls, panel: PanelData, weights=None, tolerance: float = 1e-8, max_sweeps: int = 100_000):
        if tolerance <= 0:
            raise ValueError("tolerance must be positive")
        fi, ft = panel.factors
        w = np.ones(panel.n_obs) if weights is None else np.ascontiguousarray(weights, dtype=float)
        inv = []
        for fm in (fi, ft):
            sums = np.bincount(fm.codes, weights=w, minlength=fm.group_count)
            if np.any(sums <= 0.0):
                g = int(np.flatnonzero(sums <= 0.0)[0])
                raise ZeroGroupWeight(f"group {g} has non-positive total weight")
            inv.append(1.0 / sums)
        return cls(
            codes=(np.ascontiguousarray(fi.codes), np.ascontiguousarray(ft.codes)),
            weights=w,
            inv_sums=tuple(inv),
            tolerance=float(tolerance),
            max_sweeps=int(max_sweeps),
        )

    def group_means(self, v, factor: int) -> np.ndarray:
        codes = self.codes[factor]
        sums = np.bincount(codes, weights=self.weights * v, minlength=self.inv_sums[factor].shape[0])
        return sums * self.inv_sums[factor]


def center_factor(v, factor: int, ws: CenteringWorkspace) -> np.ndarray:
    """Subtract the weighted mean of ``v`` over the observation's group of one factor."""
    v = np.asarray(v, dtype=float)
    return v - ws.group_means(v, factor)[ws.codes[factor]]


def center_columns(X, ws: CenteringWorkspace, return_sweeps: bool = False):
    """Center each column of ``X`` independently."""
    X = np.asarray(X, dtype=float)
    squeeze = X.ndim == 1
    V = np.asfortranarray(X[:, None] if squeeze else X)
    if V.shape[1] == 0:
        return (V.copy(), np.zeros(0, dtype=np.int64)) if return_sweeps else V.copy()
    out, sweeps = _map_columns(
        V, ws.codes[0], ws.codes[1], ws.weights, ws.inv_sums[0], ws.inv_sums[1],
        ws.tolerance, ws.max_sweeps,
    )
    if np.any(sweeps < 0):
        raise NoConvergence(f"alternating projections did not converge in {ws.max_sweeps} sweeps")
    if squeeze:
        out = out[:, 0]
    return (out, sweeps) if return_sweeps else out


def center(v, ws: CenteringWorkspace) -> np.ndarray:
    """Approximate the weighted two-way within transformation of ``v``."""
    return center_columns(np.asarray(v, dtype=float), ws)

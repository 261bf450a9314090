"""Dense, slow reference computations used only by the tests.

Everything here works with explicit dummy matrices and explicit loops so it
shares no code path with the package's sparse routines.
"""

import numpy as np
from scipy import stats

from panelbc.panel import PanelData


def dummies(p: PanelData):
    """Full individual and time indicator matrices."""
    D1 = np.zeros((p.n_obs, p.n_indiv))
    D1[np.arange(p.n_obs), p.indiv] = 1.0
    periods = np.unique(p.time)
    D2 = (p.time[:, None] == periods[None, :]).astype(float)
    return D1, D2


def dense_projection(p: PanelData, w):
    """Weighted residual projection I - D (D'WD)^+ D'W for D = (D1, D2)."""
    D1, D2 = dummies(p)
    D = np.hstack([D1, D2])
    Om = np.diag(w)
    return np.eye(p.n_obs) - D @ np.linalg.pinv(D.T @ Om @ D) @ D.T @ Om


def dense_factor_projection(D, w):
    Om = np.diag(w)
    return np.eye(D.shape[0]) - D @ np.linalg.inv(D.T @ Om @ D) @ D.T @ Om


def _cdf_parts(kind, eta):
    if kind == "logit":
        F = 1.0 / (1.0 + np.exp(-eta))
        return F, F * (1 - F), F * (1 - F) * (1 - 2 * F)
    if kind == "probit":
        F = stats.norm.cdf(eta)
        f = stats.norm.pdf(eta)
        return F, f, -eta * f
    F = 1.0 - np.exp(-np.exp(eta))
    f = np.exp(eta - np.exp(eta))
    return F, f, f * (1 - np.exp(eta))


def dense_newton(p: PanelData, kind: str, tol=1e-13, max_iter=200):
    """Exact Newton-Raphson on the full dummy-encoded likelihood (observed Hessian).

    Returns ``(beta, eta, converged)``. The intercept direction shared by the
    two sets of dummies is handled with a pseudo-inverse.
    """
    D1, D2 = dummies(p)
    Z = np.hstack([p.X, D1, D2])
    y = p.y
    theta = np.zeros(Z.shape[1])

    def loglik(th):
        F, _, _ = _cdf_parts(kind, Z @ th)
        F = np.clip(F, 1e-300, 1 - 1e-16)
        return np.sum(y * np.log(F) + (1 - y) * np.log1p(-F))

    ll = loglik(theta)
    for _ in range(max_iter):
        eta = Z @ theta
        F, f, df = _cdf_parts(kind, eta)
        g = F * (1 - F)
        s = f * (y - F) / g
        dH = df / g - f * f * (1 - 2 * F) / g**2
        h = dH * (y - F) - f * f / g
        grad = Z.T @ s
        hess = (Z * h[:, None]).T @ Z
        step = -np.linalg.pinv(hess, rcond=1e-12) @ grad
        t = 1.0
        for _ in range(60):
            new = loglik(theta + t * step)
            if new >= ll - 1e-14:
                break
            t *= 0.5
        theta = theta + t * step
        ll = new
        if np.max(np.abs(t * step)) < tol:
            return theta[: p.n_regressors], Z @ theta, True
    return theta[: p.n_regressors], Z @ theta, False


def dense_offset_newton(p: PanelData, kind: str, beta, tol=1e-13, max_iter=200):
    """Newton over the fixed effects only with ``X beta`` as offset."""
    D1, D2 = dummies(p)
    Z = np.hstack([D1, D2])
    off = p.X @ beta
    y = p.y
    phi = np.zeros(Z.shape[1])
    for _ in range(max_iter):
        eta = off + Z @ phi
        F, f, df = _cdf_parts(kind, eta)
        g = F * (1 - F)
        s = f * (y - F) / g
        dH = df / g - f * f * (1 - 2 * F) / g**2
        h = dH * (y - F) - f * f / g
        step = -np.linalg.pinv((Z * h[:, None]).T @ Z, rcond=1e-12) @ (Z.T @ s)
        phi = phi + step
        if np.max(np.abs(step)) < tol:
            break
    return off + Z @ phi


def full_hessian_schur(p: PanelData, w):
    """(beta, beta) block of the expected Hessian after partialling out the fixed effects."""
    D1, D2 = dummies(p)
    D = np.hstack([D1, D2])
    Om = np.diag(w)
    A = p.X.T @ Om @ p.X
    B = p.X.T @ Om @ D
    C = D.T @ Om @ D
    return A - B @ np.linalg.pinv(C) @ B.T


def direct_bias_terms(p: PanelData, H, d2F, score, w, MX, L, adjust="individual"):
    """Literal double loops for the coefficient bias terms."""
    J = MX.shape[1]
    B = np.zeros(J)
    C = np.zeros(J)
    cells = {(int(p.indiv[k]), int(p.time[k])): k for k in range(p.n_obs)}
    T_glob = len(np.unique(p.time))
    for i in range(p.n_indiv):
        ks = [k for k in range(p.n_obs) if p.indiv[k] == i]
        Ti = len(ks) if adjust == "individual" else T_glob
        num = np.zeros(J)
        den = 0.0
        for k in ks:
            num += H[k] * d2F[k] * MX[k]
            den += w[k]
        for l in range(1, L + 1):
            acc = np.zeros(J)
            for k in ks:
                prev = cells.get((i, int(p.time[k]) - l))
                if prev is not None:
                    acc += score[prev] * w[k] * MX[k]
            num += 2.0 * Ti / (Ti - l) * acc
        B += num / den
    for t in np.unique(p.time):
        ks = [k for k in range(p.n_obs) if p.time[k] == t]
        num = np.zeros(J)
        den = 0.0
        for k in ks:
            num += H[k] * d2F[k] * MX[k]
            den += w[k]
        C += num / den
    return -0.5 * B, -0.5 * C


def central_diff(f, x, h=1e-5):
    return (f(x + h) - f(x - h)) / (2 * h)


def random_panel(rng, N, T, J, kind="probit", beta_scale=0.4, unbalanced=False):
    """Random binary panel suitable for the oracle comparison."""
    from panelbc.panel import panel_from_arrays

    ids, ts = [], []
    for i in range(N):
        if unbalanced:
            a = int(rng.integers(0, max(1, T - 2)))
            b = int(rng.integers(a + 2, T + 1))
        else:
            a, b = 0, T
        for t in range(a, b):
            ids.append(i)
            ts.append(t)
    n = len(ids)
    X = rng.normal(size=(n, J))
    alpha = rng.normal(scale=0.3, size=N)
    gamma = rng.normal(scale=0.3, size=T)
    beta = rng.normal(scale=beta_scale, size=J)
    eta = X @ beta + alpha[ids] + gamma[ts]
    if kind == "logit":
        e = rng.logistic(size=n)
    elif kind == "probit":
        e = rng.normal(size=n)
    else:
        e = np.log(-np.log(rng.uniform(size=n)))
    y = (eta >= e).astype(float)
    return panel_from_arrays(np.array(ids), np.array(ts), y, X)

"""Linear models with crossed random intercepts, fitted by maximum likelihood.

With Z the stacked indicator matrices of the grouping factors and
D = diag(theta_g) the variance ratios (random-effect variance over residual
variance), V = I + Z D Z'. Everything the likelihood needs is expressed through
the small cross-product matrices X'X, X'Z, Z'Z, X'y, Z'y and y'y, so one
likelihood evaluation costs O((p + q)^3) regardless of the number of rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize, stats

LOG_THETA_BOUNDS = (-20.0, 8.0)


class SingularDesignError(ValueError):
    pass


@dataclass
class MixedFit:
    names: list
    coef: np.ndarray
    cov: np.ndarray
    theta: np.ndarray
    sigma2: float
    loglik: float
    n: int
    df_resid: int
    dropped: tuple = ()

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))

    def wald(self, name: str):
        """(estimate, standard error, t statistic, two-sided p) for one term."""
        i = self.names.index(name)
        est, se = float(self.coef[i]), float(self.se[i])
        if not se > 0:
            return est, se, math.nan, math.nan
        t = est / se
        return est, se, t, float(2 * stats.t.sf(abs(t), self.df_resid))


def indicator_columns(codes) -> np.ndarray:
    _, inv = np.unique(np.asarray(codes), return_inverse=True)
    z = np.zeros((len(inv), inv.max() + 1 if len(inv) else 0))
    z[np.arange(len(inv)), inv] = 1.0
    return z


def independent_columns(X: np.ndarray, protect=(0, 1), tol: float = 1e-9):
    """Indices of a maximal linearly independent column subset.

    Columns are visited in order so earlier ones win; raises when a column in
    ``protect`` is dependent on the ones before it.
    """
    keep = []
    for j in range(X.shape[1]):
        trial = X[:, keep + [j]]
        s = np.linalg.svd(trial, compute_uv=False)
        if s[-1] > tol * max(1.0, s[0]) * math.sqrt(X.shape[0]):
            keep.append(j)
        elif j in protect:
            raise SingularDesignError(f"design column {j} is aliased")
    return keep


class _CrossProducts:
    def __init__(self, y, X, Z, block_sizes):
        self.n, self.p = X.shape
        self.XtX = X.T @ X
        self.XtZ = X.T @ Z
        self.ZtZ = Z.T @ Z
        self.Xty = X.T @ y
        self.Zty = Z.T @ y
        self.yty = float(y @ y)
        self.blocks = np.repeat(np.arange(len(block_sizes)), block_sizes).astype(int)

    def solve(self, theta):
        """GLS quantities for variance ratios ``theta`` (one per factor)."""
        if self.ZtZ.shape[0]:
            d = np.sqrt(np.asarray(theta, dtype=float)[self.blocks])
            A = np.eye(len(d)) + d[:, None] * self.ZtZ * d[None, :]
            cf = linalg.cho_factor(A, lower=True)
            logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
            XZd = self.XtZ * d[None, :]
            Zyd = self.Zty * d
            XV = self.XtX - XZd @ linalg.cho_solve(cf, XZd.T)
            XVy = self.Xty - XZd @ linalg.cho_solve(cf, Zyd)
            yVy = self.yty - Zyd @ linalg.cho_solve(cf, Zyd)
        else:
            logdet, XV, XVy, yVy = 0.0, self.XtX, self.Xty, self.yty
        beta = linalg.solve(XV, XVy, assume_a="pos")
        rss = max(float(yVy - beta @ XVy), 1e-300)
        return beta, XV, rss, logdet

    def neg2ll(self, theta) -> float:
        try:
            _, _, rss, logdet = self.solve(theta)
        except (linalg.LinAlgError, ValueError):
            return math.inf
        n = self.n
        return n * math.log(2 * math.pi * rss / n) + logdet + n


def fit_crossed(y, X, groups=(), names=None, theta=None, start=None) -> MixedFit:
    """Maximum-likelihood fit of ``y = X b + sum_g Z_g u_g + e``.

    ``groups`` holds one label array per crossed random-intercept factor.
    Passing ``theta`` fixes the variance ratios instead of optimising them over
    log-ratios with Nelder-Mead; ``theta = 0`` reproduces least squares.
    Fixed-effect tests use the ML residual variance rescaled to n - p degrees
    of freedom and a t reference, so a zero-variance fit matches OLS exactly.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    names = list(names) if names is not None else [f"x{i}" for i in range(X.shape[1])]
    Zs = [indicator_columns(g) for g in groups]
    Z = np.hstack(Zs) if Zs else np.zeros((len(y), 0))
    cp = _CrossProducts(y, X, Z, [z.shape[1] for z in Zs])
    n, p = X.shape
    if n <= p:
        raise SingularDesignError("not enough observations for the fixed effects")
    if theta is None and Zs:
        theta = _optimise_theta(cp, len(Zs), start)
    elif theta is None:
        theta = np.zeros(0)
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (len(Zs),)).copy()
    beta, XV, rss, logdet = cp.solve(theta)
    sigma2 = rss / n
    cov = rss / (n - p) * linalg.inv(XV)
    loglik = -0.5 * (n * math.log(2 * math.pi * sigma2) + logdet + n)
    return MixedFit(names, beta, cov, theta, sigma2, loglik, n, n - p)


def _optimise_theta(cp: _CrossProducts, k: int, start=None) -> np.ndarray:
    lo, hi = LOG_THETA_BOUNDS

    def objective(logt):
        return cp.neg2ll(np.exp(np.clip(logt, lo, hi)))

    x0 = np.zeros(k) if start is None else np.log(np.maximum(start, math.exp(lo)))
    res = optimize.minimize(objective, x0, method="Nelder-Mead",
                            options={"xatol": 1e-4, "fatol": 1e-8, "maxiter": 400 * k})
    best_t, best_v = np.exp(np.clip(res.x, lo, hi)), res.fun
    # boundary candidates: any subset of ratios at exactly zero
    for mask in range(1, 2 ** k):
        t = best_t.copy()
        for g in range(k):
            if mask >> g & 1:
                t[g] = 0.0
        v = cp.neg2ll(t)
        if v < best_v - 1e-10:
            best_t, best_v = t, v
    return best_t


def ols(y, X):
    """Ordinary least squares: (coef, standard errors, t-test p values)."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    df = X.shape[0] - X.shape[1]
    s2 = resid @ resid / df
    se = np.sqrt(np.diag(s2 * np.linalg.inv(X.T @ X)))
    p = 2 * stats.t.sf(np.abs(coef / se), df)
    return coef, se, p


def permutation_test(y, pairing, clusters, rng, n_perm: int = 999):
    """Mean-difference test with pairing labels shuffled within clusters.

    Returns (difference target minus reference, permutation sd, p value).
    """
    y = np.asarray(y, dtype=float)
    pairing = np.asarray(pairing, dtype=bool)
    rng = np.random.default_rng(rng)

    def stat(lab):
        if lab.all() or not lab.any():
            return 0.0
        return y[lab].mean() - y[~lab].mean()

    obs = stat(pairing)
    clusters = np.asarray(clusters)
    members = [np.flatnonzero(clusters == c) for c in np.unique(clusters)]
    perm = np.empty(n_perm)
    lab = pairing.copy()
    for b in range(n_perm):
        for idx in members:
            lab[idx] = rng.permutation(pairing[idx])
        perm[b] = stat(lab)
    p = (1 + np.sum(np.abs(perm) >= abs(obs) - 1e-12)) / (n_perm + 1)
    return float(obs), float(perm.std()), float(p)

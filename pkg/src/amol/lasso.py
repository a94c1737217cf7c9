"""Lasso by cyclic coordinate descent, with a cross-validated penalty.

Objective on standardized columns ``z_j = (x_j - mean_j) / scale_j``::

    (1 / 2n) ||y - b0 - Z b||^2 + lam * ||b||_1

The intercept is unpenalized.  Columns with zero variance get coefficient 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass(frozen=True)
class LassoFit:
    intercept: float
    coefficients: np.ndarray
    lam: float
    means: np.ndarray
    scales: np.ndarray

    def predict(self, X) -> np.ndarray:
        return predict(self, X)


@njit(cache=True)
def _cd_path(Z, y, lambdas, tol, max_sweeps):
    n, p = Z.shape
    L = lambdas.shape[0]
    out = np.zeros((L, p))
    sweeps = np.zeros(L, dtype=np.int64)
    beta = np.zeros(p)
    resid = y.copy()
    colsq = np.zeros(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += Z[i, j] * Z[i, j]
        colsq[j] = s / n
    for li in range(L):
        lam = lambdas[li]
        l1 = 0.0
        for j in range(p):
            l1 += abs(beta[j])
        rss = 0.0
        for i in range(n):
            rss += resid[i] * resid[i]
        obj = rss / (2 * n) + lam * l1
        for sweep in range(max_sweeps):
            max_delta = 0.0
            for j in range(p):
                if colsq[j] == 0.0:
                    continue
                rho = 0.0
                for i in range(n):
                    rho += Z[i, j] * resid[i]
                rho = rho / n + colsq[j] * beta[j]
                if rho > lam:
                    new = (rho - lam) / colsq[j]
                elif rho < -lam:
                    new = (rho + lam) / colsq[j]
                else:
                    new = 0.0
                delta = new - beta[j]
                if delta != 0.0:
                    for i in range(n):
                        resid[i] -= Z[i, j] * delta
                    beta[j] = new
                    if abs(delta) > max_delta:
                        max_delta = abs(delta)
            l1 = 0.0
            for j in range(p):
                l1 += abs(beta[j])
            rss = 0.0
            for i in range(n):
                rss += resid[i] * resid[i]
            new_obj = rss / (2 * n) + lam * l1
            sweeps[li] = sweep + 1
            change = abs(obj - new_obj) / max(abs(new_obj), 1e-300)
            obj = new_obj
            if change < tol or max_delta == 0.0:
                break
        out[li] = beta
    return out, sweeps


@njit(cache=True)
def _max_corr(Z, r):
    # same summation order as the coordinate updates, so lam = max gives exact zeros
    n, p = Z.shape
    best = 0.0
    for j in range(p):
        rho = 0.0
        for i in range(n):
            rho += Z[i, j] * r[i]
        best = max(best, abs(rho / n))
    return best


def _standardize(X):
    means = X.mean(axis=0)
    scales = X.std(axis=0)
    keep = scales > 1e-12 * np.maximum(1.0, np.abs(means))
    Z = np.zeros_like(X)
    Z[:, keep] = (X[:, keep] - means[keep]) / scales[keep]
    scales = np.where(keep, scales, 0.0)
    return Z, means, scales


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(y) == 0 or X.shape[0] == 0:
        raise ValueError("empty data")
    if X.shape[0] != len(y):
        raise ValueError(f"X has {X.shape[0]} rows but y has {len(y)}")
    if len(y) < 2:
        raise ValueError("need at least two observations")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite entries in X or y")
    return X, y


def _path(X, y, lambdas, tol, max_sweeps):
    Z, means, scales = _standardize(X)
    ybar = y.mean()
    betas, sweeps = _cd_path(np.ascontiguousarray(Z), y - ybar, np.asarray(lambdas, dtype=float),
                             tol, max_sweeps)
    safe = np.where(scales > 0, scales, 1.0)
    coefs = np.where(scales > 0, betas / safe, 0.0)
    intercepts = ybar - coefs @ means
    return [LassoFit(float(b0), c, float(lam), means, scales)
            for b0, c, lam in zip(intercepts, coefs, lambdas)], sweeps


def lambda_max(X, y) -> float:
    """Smallest penalty at which every coefficient is zero."""
    X, y = _check_xy(X, y)
    Z, _, _ = _standardize(X)
    if Z.shape[1] == 0:
        return 0.0
    return float(_max_corr(np.ascontiguousarray(Z), y - y.mean()))


def lambda_grid(X, y, size: int = 50, ratio: float = 1e-3) -> np.ndarray:
    lmax = lambda_max(X, y)
    if lmax <= 0:
        return np.zeros(1)
    return np.geomspace(lmax, ratio * lmax, size)


def fit_lasso(X, y, lam: float, tol: float = 1e-8, max_sweeps: int = 10_000) -> LassoFit:
    """Lasso fit at a single penalty.

    Coordinate descent runs until the relative objective change between sweeps
    drops below ``tol``.  Coefficients are reported on the original scale.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    X, y = _check_xy(X, y)
    fits, _ = _path(X, y, [float(lam)], tol, max_sweeps)
    return fits[0]


def lasso_path(X, y, lambdas, tol: float = 1e-8, max_sweeps: int = 10_000) -> list[LassoFit]:
    """Warm-started fits along a descending penalty sequence."""
    X, y = _check_xy(X, y)
    return _path(X, y, np.asarray(lambdas, dtype=float), tol, max_sweeps)[0]


def predict(fit: LassoFit, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != len(fit.coefficients):
        raise ValueError(f"X has {X.shape[1]} columns, fit expects {len(fit.coefficients)}")
    return fit.intercept + X @ fit.coefficients


def objective(fit: LassoFit, X, y) -> float:
    """Penalized objective of ``fit`` on the standardized scale."""
    X, y = _check_xy(X, y)
    resid = y - predict(fit, X)
    return float(resid @ resid / (2 * len(y)) + fit.lam * np.sum(np.abs(fit.coefficients * fit.scales)))


def fold_ids(n: int, folds: int, seed: int = 0) -> np.ndarray:
    """Balanced fold labels ``0..folds-1`` in a seeded random order."""
    if folds < 2:
        raise ValueError("need at least two folds")
    if n < folds:
        raise ValueError(f"{n} rows cannot fill {folds} folds")
    perm = np.random.default_rng(seed).permutation(n)
    ids = np.empty(n, dtype=int)
    ids[perm] = np.arange(n) % folds
    return ids


def cv_curve(X, y, folds: int = 5, grid=None, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Mean held-out squared error for each penalty in ``grid``."""
    X, y = _check_xy(X, y)
    grid = lambda_grid(X, y) if grid is None else np.asarray(grid, dtype=float)
    if len(grid) == 0:
        raise ValueError("empty lambda grid")
    ids = fold_ids(len(y), folds, seed)
    errors = np.zeros(len(grid))
    for f in range(folds):
        test = ids == f
        fits, _ = _path(X[~test], y[~test], grid, 1e-7, 10_000)
        for i, fit in enumerate(fits):
            errors[i] += np.mean((y[test] - predict(fit, X[test])) ** 2)
    return grid, errors / folds


def select_lambda_cv(X, y, folds: int = 5, grid=None, seed: int = 0) -> float:
    """Grid penalty with the smallest mean held-out squared error; ties go to the larger penalty."""
    grid, errors = cv_curve(X, y, folds, grid, seed)
    best = errors.min()
    candidates = np.flatnonzero(errors <= best)
    return float(grid[candidates[np.argmax(grid[candidates])]])


def fit_lasso_cv(X, y, folds: int = 5, grid_size: int = 50, seed: int = 0) -> LassoFit:
    """Lasso with the penalty chosen by ``folds``-fold cross-validation."""
    X, y = _check_xy(X, y)
    grid = lambda_grid(X, y, grid_size)
    if len(grid) == 1 or len(y) < 2 * folds:
        return fit_lasso(X, y, float(grid[0]))
    lam = select_lambda_cv(X, y, folds, grid, seed)
    # refit along the path down to the chosen penalty for a warm start
    path = grid[grid >= lam]
    return lasso_path(X, y, path)[-1]

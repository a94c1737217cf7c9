import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from amol.lasso import (cv_curve, fit_lasso, fit_lasso_cv, lambda_grid, lambda_max, lasso_path, objective,
                        predict, select_lambda_cv)

from oracles import soft_threshold


def orthonormal_design(rng, n=50, p=10):
    """Centred columns with X'X / n = I."""
    G = rng.normal(size=(n, p))
    G -= G.mean(axis=0)
    Q, _ = np.linalg.qr(G)
    return np.sqrt(n) * Q


def test_zero_penalty_is_least_squares():
    rng = np.random.default_rng(0)
    X = orthonormal_design(rng)
    y = X @ rng.normal(size=10) + 2.0 + rng.normal(size=50)
    fit = fit_lasso(X, y, 0.0)
    ols, *_ = np.linalg.lstsq(np.column_stack([np.ones(50), X]), y, rcond=None)
    assert fit.intercept == pytest.approx(ols[0], abs=1e-8)
    np.testing.assert_allclose(fit.coefficients, ols[1:], atol=1e-8)


@pytest.mark.parametrize("seed", range(20))
def test_soft_threshold_on_orthonormal_design(seed):
    rng = np.random.default_rng(seed)
    X = orthonormal_design(rng)
    y = X @ rng.normal(size=10) + rng.normal(size=50)
    lam = float(rng.uniform(0.05, 1.0))
    fit = fit_lasso(X, y, lam)
    expected = soft_threshold(X.T @ y / 50, lam)
    np.testing.assert_allclose(fit.coefficients, expected, atol=1e-8)
    # predictions by hand from the closed form
    np.testing.assert_allclose(predict(fit, X), y.mean() + X @ expected, atol=1e-8)


def test_lambda_max_zeroes_everything():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 5)) * [1, 2, 3, 4, 5]
    y = X[:, 0] + rng.normal(size=40)
    lmax = lambda_max(X, y)
    fit = fit_lasso(X, y, lmax)
    np.testing.assert_array_equal(fit.coefficients, 0.0)
    assert fit.intercept == pytest.approx(y.mean())
    assert np.any(fit_lasso(X, y, 0.9 * lmax).coefficients != 0)


def test_predict_examples():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(10, 3))
    y = rng.normal(size=10)
    fit = fit_lasso(X, y, lambda_max(X, y) * 2)
    np.testing.assert_allclose(predict(fit, X), fit.intercept)
    ident = fit_lasso(np.arange(5.0), np.arange(5.0), 0.0)
    np.testing.assert_allclose(ident.predict(np.arange(5.0)[:, None]), np.arange(5.0), atol=1e-10)
    with pytest.raises(ValueError):
        predict(fit, np.zeros((2, 4)))


def test_objective_non_increasing_across_sweeps():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(60, 8))
    X[:, 1] = X[:, 0] + 0.1 * rng.normal(size=60)
    y = X @ rng.normal(size=8) + rng.normal(size=60)
    lam = 0.05
    vals = [objective(fit_lasso(X, y, lam, tol=0.0, max_sweeps=s), X, y) for s in range(1, 30)]
    assert np.all(np.diff(vals) <= 1e-12)


@given(st.integers(0, 10_000), st.integers(0, 3))
def test_rescaled_column_gives_same_predictions(seed, col):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 4))
    y = X @ rng.normal(size=4) + rng.normal(size=40)
    X2 = X.copy()
    X2[:, col] *= 10
    for f1, f2 in ((fit_lasso(X, y, 0.1), fit_lasso(X2, y, 0.1)), (fit_lasso_cv(X, y), fit_lasso_cv(X2, y))):
        np.testing.assert_allclose(predict(f1, X), predict(f2, X2), atol=1e-6)


def test_constant_column_gets_zero_coefficient():
    rng = np.random.default_rng(4)
    X = np.column_stack([rng.normal(size=30), np.full(30, 3.0)])
    y = X[:, 0] + rng.normal(size=30)
    assert fit_lasso(X, y, 0.0).coefficients[1] == 0.0


def test_errors():
    with pytest.raises(ValueError):
        fit_lasso(np.zeros((0, 2)), np.zeros(0), 0.1)
    with pytest.raises(ValueError):
        fit_lasso([[1.0], [np.nan]], [1.0, 2.0], 0.1)
    with pytest.raises(ValueError):
        fit_lasso([[1.0], [2.0]], [1.0, 2.0], -1.0)
    with pytest.raises(ValueError):
        select_lambda_cv(np.zeros((3, 1)), np.zeros(3), folds=4)
    with pytest.raises(ValueError):
        select_lambda_cv(np.zeros((3, 1)), np.zeros(3), folds=1)


def test_grid_layout():
    rng = np.random.default_rng(5)
    X, y = rng.normal(size=(30, 3)), rng.normal(size=30)
    g = lambda_grid(X, y)
    assert len(g) == 50
    assert g[0] == pytest.approx(lambda_max(X, y))
    assert g[-1] == pytest.approx(1e-3 * g[0])
    assert np.all(np.diff(g) < 0)


def test_path_matches_single_fits():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(50, 5))
    y = X[:, 0] - X[:, 2] + rng.normal(size=50)
    grid = lambda_grid(X, y, 10)
    for lam, fit in zip(grid, lasso_path(X, y, grid, tol=1e-14)):
        np.testing.assert_allclose(fit.coefficients, fit_lasso(X, y, lam, tol=1e-14).coefficients, atol=1e-8)


def test_cv_pure_noise_prefers_heavy_penalty():
    picks = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X, y = rng.normal(size=(100, 5)), rng.normal(size=100)
        grid = lambda_grid(X, y)
        picks.append(np.searchsorted(-grid, -select_lambda_cv(X, y, grid=grid, seed=seed)))
    # most selections sit in the upper part of the path
    assert np.median(picks) <= 15


def test_cv_noiseless_linear_picks_smallest():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(60, 4))
    y = X @ [1.0, -2.0, 0.5, 3.0]
    grid = lambda_grid(X, y)
    assert select_lambda_cv(X, y, grid=grid) == grid[-1]


def test_cv_single_grid_point():
    rng = np.random.default_rng(8)
    X, y = rng.normal(size=(20, 2)), rng.normal(size=20)
    assert select_lambda_cv(X, y, grid=[0.37]) == 0.37
    grid, err = cv_curve(X, y, grid=[0.37])
    assert len(err) == 1 and np.isfinite(err[0])


def test_cv_ties_go_to_larger_penalty():
    rng = np.random.default_rng(9)
    X, y = rng.normal(size=(20, 2)), rng.normal(size=20)
    lmax = lambda_max(X, y)
    # both penalties give the null model
    assert select_lambda_cv(X, y, grid=[3 * lmax, 2 * lmax]) == 3 * lmax

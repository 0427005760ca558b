import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mallows_ma.baselines import (
    cv_folds,
    default_lasso_grid,
    lasso_cv_fit,
    lasso_duality_gap,
    lasso_fit,
    lasso_objective,
    lasso_path,
    ridge_cv_fit,
    ridge_fit,
)


def sign_pattern_oracle(X, y, lam):
    """Smallest lasso objective over all sign-consistent stationary points."""
    n, d = X.shape
    best = lasso_objective(X, y, np.zeros(d), lam)
    for s in itertools.product((-1, 0, 1), repeat=d):
        s = np.array(s, dtype=float)
        S = np.flatnonzero(s)
        if S.size == 0:
            continue
        XS = X[:, S]
        try:
            bS = np.linalg.solve(XS.T @ XS, XS.T @ y - n * lam * s[S])
        except np.linalg.LinAlgError:
            continue
        if np.all(np.sign(bS) == s[S]):
            b = np.zeros(d)
            b[S] = bS
            best = min(best, lasso_objective(X, y, b, lam))
    return best


class TestLasso:
    def test_orthonormal_design_soft_thresholds(self, rng):
        n, d = 40, 6
        q, _ = np.linalg.qr(rng.standard_normal((n, d)))
        X = np.sqrt(n) * q
        y = rng.standard_normal(n)
        z = X.T @ y / n
        lam = float(np.median(np.abs(z)))
        expect = np.sign(z) * np.maximum(np.abs(z) - lam, 0)
        np.testing.assert_allclose(lasso_fit(X, y, lam), expect, atol=1e-8)

    def test_large_penalty_is_zero(self, rng):
        X = rng.standard_normal((30, 8))
        y = rng.standard_normal(30)
        lam_max = np.max(np.abs(X.T @ y)) / 30
        assert np.all(lasso_fit(X, y, 1.01 * lam_max) == 0)
        assert np.all(ridge_fit(X, y, 1e12) == pytest.approx(0, abs=1e-9))

    @pytest.mark.parametrize("seed", range(6))
    def test_sign_pattern_oracle(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((20, 5))
        y = X @ np.array([2.0, 0, -1, 0, 0.5]) + rng.standard_normal(20)
        for lam in default_lasso_grid(X, y, num=6, ratio=1e-2):
            beta = lasso_fit(X, y, lam)
            assert lasso_objective(X, y, beta, lam) <= sign_pattern_oracle(X, y, lam) + 1e-6

    def test_wide_design_reaches_gap(self, rng):
        X = rng.standard_normal((40, 120))
        y = X[:, :5] @ np.ones(5) + rng.standard_normal(40)
        grid = default_lasso_grid(X, y, num=20)
        path = lasso_path(X, y, grid)
        for lam, beta in zip(grid, path):
            assert lasso_duality_gap(X, y, beta, lam) <= 1e-7

    def test_path_support_grows(self, rng):
        X = rng.standard_normal((50, 10))
        y = X @ rng.standard_normal(10) + rng.standard_normal(50)
        path = lasso_path(X, y, default_lasso_grid(X, y, num=10))
        nnz = (path != 0).sum(axis=1)
        assert nnz[0] <= 1 and nnz[-1] == 10


class TestRidge:
    def test_normal_equations(self, rng):
        X = rng.standard_normal((25, 7))
        y = rng.standard_normal(25)
        b = ridge_fit(X, y, 0.3)
        np.testing.assert_allclose((X.T @ X + 25 * 0.3 * np.eye(7)) @ b, X.T @ y, atol=1e-10)

    def test_zero_penalty_rank_deficient(self, rng):
        X = rng.standard_normal((5, 8))
        with pytest.raises(ValueError):
            ridge_fit(X, rng.standard_normal(5), 0.0)

    def test_zero_penalty_full_rank_is_ols(self, rng):
        X = rng.standard_normal((20, 3))
        y = rng.standard_normal(20)
        np.testing.assert_allclose(ridge_fit(X, y, 0.0), np.linalg.lstsq(X, y, rcond=None)[0])


class TestCrossValidation:
    def test_contiguous_blocks(self):
        folds = cv_folds(10, 3)
        assert [f.tolist() for f in folds] == [[0, 1, 2, 3], [4, 5, 6], [7, 8, 9]]

    @given(st.integers(2, 60), st.integers(0, 1000))
    def test_seeded_folds_partition(self, n, seed):
        k = min(5, n)
        folds = cv_folds(n, k, seed)
        assert sorted(np.concatenate(folds).tolist()) == list(range(n))
        assert all(np.array_equal(a, b) for a, b in zip(folds, cv_folds(n, k, seed)))

    def test_fold_bounds(self):
        with pytest.raises(ValueError):
            cv_folds(10, 1)
        with pytest.raises(ValueError):
            cv_folds(3, 4)

    def test_ties_go_to_larger_penalty(self, rng):
        X = rng.standard_normal((20, 4))
        y = np.zeros(20)
        r = ridge_cv_fit(X, y, [0.1, 5.0, 1.0])
        assert r.lam == 5.0
        l = lasso_cv_fit(X, y, [0.1, 5.0, 1.0])
        assert l.lam == 5.0 and np.all(l.coef == 0)

    def test_rejects_bad_grid(self, rng):
        X = rng.standard_normal((20, 4))
        y = rng.standard_normal(20)
        for grid in ([], [0.0, 1.0], [-1.0]):
            with pytest.raises(ValueError):
                ridge_cv_fit(X, y, grid)
            with pytest.raises(ValueError):
                lasso_cv_fit(X, y, grid)

    def test_lasso_cv_refit_matches_direct(self, rng):
        X = rng.standard_normal((60, 15))
        y = X[:, :3] @ np.array([1.0, -1.0, 0.5]) + 0.5 * rng.standard_normal(60)
        cv = lasso_cv_fit(X, y, seed=4)
        assert cv.cv_mse.shape == cv.grid.shape
        assert cv.cv_mse[np.flatnonzero(cv.grid == cv.lam)[0]] == cv.cv_mse.min()
        direct = lasso_fit(X, y, cv.lam)
        assert lasso_objective(X, y, cv.coef, cv.lam) == pytest.approx(lasso_objective(X, y, direct, cv.lam), abs=1e-7)

    def test_ridge_cv_matches_manual(self, rng):
        X = rng.standard_normal((30, 5))
        y = X @ rng.standard_normal(5) + rng.standard_normal(30)
        grid = np.array([0.01, 0.1, 1.0])
        cv = ridge_cv_fit(X, y, grid, folds=3)
        manual = []
        for lam in grid:
            err = 0.0
            for val in cv_folds(30, 3):
                tr = np.setdiff1d(np.arange(30), val)
                r = y[val] - X[val] @ ridge_fit(X[tr], y[tr], lam)
                err += r @ r / len(val)
            manual.append(err / 3)
        np.testing.assert_allclose(cv.cv_mse, manual)

"""
Ridge and lasso fitted directly on a design matrix, tuned by K-fold
cross-validation. These serve as comparison methods for the basis-driven
averaging estimators.

Lasso objective: ``(1/2n) ||y - X b||^2 + lam ||b||_1``.
Ridge normal equations: ``(X'X + n lam I) b = X'y``.

The lasso is solved by cyclic coordinate descent until the duality gap
drops below the tolerance. Along a path, each penalty is warm-started from
the piecewise-linear homotopy (LARS-lasso) solution, which is usually
exact already; descent then only certifies it. Without such a start, plain
descent stalls when the penalty is small and ``n < d``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import warnings

import numpy as np
from numba import njit
from sklearn.linear_model import lars_path

__all__ = [
    "CVFit",
    "LassoConvergenceError",
    "lasso_fit",
    "lasso_path",
    "lasso_objective",
    "lasso_duality_gap",
    "default_lasso_grid",
    "default_ridge_grid",
    "ridge_fit",
    "cv_folds",
    "lasso_cv_fit",
    "ridge_cv_fit",
]


class LassoConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CVFit:
    coef: np.ndarray
    lam: float
    grid: np.ndarray
    cv_mse: np.ndarray


@njit(cache=True, nogil=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@njit(cache=True, nogil=True)
def _gap(X, y, beta, r, lam):
    n, d = X.shape
    c = 0.0
    for j in range(d):
        v = abs(X[:, j] @ r)
        if v > c:
            c = v
    s = 1.0
    if c > n * lam:
        s = n * lam / c
    l1 = 0.0
    for j in range(d):
        l1 += abs(beta[j])
    rr = r @ r
    primal = rr / (2 * n) + lam * l1
    yy = y @ y
    ymsr = y - s * r
    dual = (yy - ymsr @ ymsr) / (2 * n)
    return primal - dual


@njit(cache=True, nogil=True)
def _cd(X, y, lam, beta, col_sq, tol, max_sweeps):
    """Cyclic coordinate descent with active-set inner passes; stops on the duality gap."""
    n, d = X.shape
    r = y - X @ beta
    thresh = n * lam
    gap = np.inf
    for sweep in range(max_sweeps):
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            xj = X[:, j]
            old = beta[j]
            new = _soft(xj @ r + col_sq[j] * old, thresh) / col_sq[j]
            if new != old:
                r -= (new - old) * xj
                beta[j] = new
        gap = _gap(X, y, beta, r, lam)
        if gap <= tol:
            return sweep + 1, gap
        for inner in range(10):
            delta = 0.0
            for j in range(d):
                if beta[j] == 0.0:
                    continue
                xj = X[:, j]
                old = beta[j]
                new = _soft(xj @ r + col_sq[j] * old, thresh) / col_sq[j]
                if new != old:
                    r -= (new - old) * xj
                    beta[j] = new
                    step = abs(new - old) * np.sqrt(col_sq[j])
                    if step > delta:
                        delta = step
            if delta < 1e-3 * np.sqrt(tol):
                break
    return max_sweeps, gap


def lasso_objective(X, y, beta, lam) -> float:
    r = y - X @ beta
    return float(r @ r) / (2 * len(y)) + lam * float(np.abs(beta).sum())


def lasso_duality_gap(X, y, beta, lam) -> float:
    X = np.asfortranarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    return float(_gap(X, y, beta, y - X @ beta, lam))


def _polish(X, y, lam, beta):
    """
    Feature-sign refinement on the current support.

    Solve the KKT equations for the current sign pattern; if a coefficient
    would change sign, move to the first zero crossing instead, drop that
    coordinate and repeat. Each step lowers the objective.
    """
    n = X.shape[0]
    b = beta.copy()
    for _ in range(4 * n):
        A = np.flatnonzero(b)
        if A.size == 0 or A.size > n:
            return b
        XA = X[:, A]
        sgn = np.sign(b[A])
        try:
            bA = np.linalg.solve(XA.T @ XA, XA.T @ y - n * lam * sgn)
        except np.linalg.LinAlgError:
            return b
        flip = np.sign(bA) != sgn
        if not flip.any():
            b[A] = bA
            return b
        cur = b[A]
        t = np.full(A.size, np.inf)
        t[flip] = cur[flip] / (cur[flip] - bA[flip])
        k = int(np.argmin(t))
        b[A] = cur + t[k] * (bA - cur)
        b[A[k]] = 0.0
    return b


def _solve(X, y, lam, beta, col_sq, tol, max_sweeps):
    """Coordinate descent sweeps interleaved with feature-sign refinement."""
    done, gap = 0, np.inf
    while done < max_sweeps:
        sweeps, gap = _cd(X, y, lam, beta, col_sq, tol, min(2, max_sweeps - done))
        done += sweeps
        if gap <= tol:
            break
        cand = _polish(X, y, lam, beta)
        if lasso_objective(X, y, cand, lam) <= lasso_objective(X, y, beta, lam):
            beta[:] = cand
            gap = _gap(X, y, beta, y - X @ beta, lam)
            if gap <= tol:
                break
    if gap > tol:
        raise LassoConvergenceError(f"lasso duality gap {gap:.3e} above {tol:.1e} at lam={lam:.3e}")
    return gap


def _homotopy_starts(X, y, grid):
    """Homotopy path evaluated at ``grid``; None if it cannot be computed."""
    lo = float(np.min(grid))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            alphas, _, coefs = lars_path(X, y, method="lasso", alpha_min=lo * (1 - 1e-9))
    except (ValueError, FloatingPointError, np.linalg.LinAlgError):
        return None
    if not np.all(np.isfinite(coefs)):
        return None
    # alphas decrease along the path; the path is linear between knots
    k = np.clip(np.searchsorted(-alphas, -np.asarray(grid)), 1, max(len(alphas) - 1, 1))
    out = np.empty((len(grid), X.shape[1]))
    for i, (lam, ki) in enumerate(zip(grid, k)):
        if len(alphas) == 1 or lam >= alphas[0]:
            out[i] = coefs[:, 0] if lam < alphas[0] else 0.0
            continue
        a0, a1 = alphas[ki - 1], alphas[ki]
        t = min(max((a0 - lam) / (a0 - a1), 0.0), 1.0) if a0 > a1 else 1.0
        out[i] = coefs[:, ki - 1] + t * (coefs[:, ki] - coefs[:, ki - 1])
    return out


def lasso_fit(X, y, lam: float, beta0=None, tol: float = 1e-7, max_sweeps: int = 10_000) -> np.ndarray:
    """Lasso coefficients at penalty ``lam`` to duality gap ``<= tol``."""
    if lam < 0:
        raise ValueError("lam must be non-negative")
    X = np.asfortranarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if beta0 is not None:
        beta = np.array(beta0, dtype=np.float64)
    else:
        starts = _homotopy_starts(X, y, [lam]) if lam > 0 else None
        beta = np.zeros(X.shape[1]) if starts is None else starts[0]
    col_sq = np.einsum("ij,ij->j", X, X)
    _solve(X, y, float(lam), beta, col_sq, float(tol), int(max_sweeps))
    return beta


def lasso_path(X, y, grid: Sequence[float], tol: float = 1e-7) -> np.ndarray:
    """
    Coefficients along ``grid``, shape (len(grid), d). Each penalty starts
    from the homotopy solution when available, else from the previous one.
    """
    X = np.asfortranarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    col_sq = np.einsum("ij,ij->j", X, X)
    starts = _homotopy_starts(X, y, grid) if grid.size and grid.min() > 0 else None
    beta = np.zeros(X.shape[1])
    out = np.empty((len(grid), X.shape[1]))
    for i, lam in enumerate(grid):
        if starts is not None:
            cand = starts[i].copy()
            if lasso_objective(X, y, cand, lam) <= lasso_objective(X, y, beta, lam):
                beta = cand
        _solve(X, y, float(lam), beta, col_sq, float(tol), 10_000)
        out[i] = beta
    return out


def default_lasso_grid(X, y, num: int = 50, ratio: float = 1e-3) -> np.ndarray:
    """``num`` log-spaced values from ``||X'y||_inf / n`` down to ``ratio`` times that."""
    lam_max = float(np.max(np.abs(X.T @ y))) / X.shape[0]
    if lam_max <= 0:
        lam_max = 1.0
    return np.geomspace(lam_max, ratio * lam_max, num)


def default_ridge_grid(X, num: int = 50) -> np.ndarray:
    """Log-spaced from ``10 s_1^2 / n`` down to ``1e-6 s_1^2 / n`` (s_1 = top singular value)."""
    s1 = float(np.linalg.norm(X, 2))
    scale = s1 * s1 / X.shape[0] if s1 > 0 else 1.0
    return np.geomspace(10.0 * scale, 1e-6 * scale, num)


def _ridge_solver(X, y):
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    uty = U.T @ y
    n = X.shape[0]

    def solve(lam):
        return Vt.T @ (s / (s * s + n * lam) * uty)

    return solve


def ridge_fit(X, y, lam: float) -> np.ndarray:
    """Solve ``(X'X + n lam I) b = X'y`` through the SVD of X."""
    X = np.asarray(X, dtype=np.float64)
    if lam <= 0:
        if np.linalg.matrix_rank(X) < X.shape[1]:
            raise ValueError("ridge with lam <= 0 is singular for a rank-deficient X")
        return np.linalg.lstsq(X, y, rcond=None)[0]
    return _ridge_solver(X, np.asarray(y, dtype=np.float64))(lam)


def cv_folds(n: int, folds: int, seed: Optional[int] = None) -> list:
    """
    Validation index blocks. Contiguous blocks of ``range(n)``; with a seed,
    contiguous blocks of a seeded permutation.
    """
    if folds < 2 or folds > n:
        raise ValueError(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    order = np.arange(n)
    if seed is not None:
        order = np.random.default_rng(seed).permutation(n)
    return [np.sort(b) for b in np.array_split(order, folds)]


def _pick(grid, mse):
    best = np.min(mse)
    ties = np.flatnonzero(mse == best)
    return int(ties[np.argmax(grid[ties])])


def _check_grid(grid):
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("lambda grid must be a non-empty vector")
    if np.any(~(grid > 0)):
        raise ValueError("lambda grid values must be positive")
    return grid


def lasso_cv_fit(X, y, lambda_grid=None, folds: int = 5, seed: Optional[int] = None, tol: float = 1e-7) -> CVFit:
    """
    Lasso with the penalty chosen by K-fold CV (mean validation MSE, ties to
    the larger penalty), refit on all rows.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    grid = _check_grid(default_lasso_grid(X, y) if lambda_grid is None else lambda_grid)
    order = np.argsort(-grid, kind="stable")
    mse = np.zeros(grid.size)
    for val in cv_folds(len(y), folds, seed):
        train = np.setdiff1d(np.arange(len(y)), val)
        path = lasso_path(X[train], y[train], grid[order], tol)
        resid = y[val][None, :] - path @ X[val].T
        mse[order] += np.mean(resid ** 2, axis=1)
    mse /= folds
    i = _pick(grid, mse)
    k = int(np.flatnonzero(order == i)[0])
    coef = lasso_path(X, y, grid[order][: k + 1], tol)[-1]
    return CVFit(coef, float(grid[i]), grid, mse)


def ridge_cv_fit(X, y, lambda_grid=None, folds: int = 5, seed: Optional[int] = None) -> CVFit:
    """Ridge with the penalty chosen by K-fold CV, refit on all rows."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    grid = _check_grid(default_ridge_grid(X) if lambda_grid is None else lambda_grid)
    mse = np.zeros(grid.size)
    for val in cv_folds(len(y), folds, seed):
        train = np.setdiff1d(np.arange(len(y)), val)
        solve = _ridge_solver(X[train], y[train])
        for i, lam in enumerate(grid):
            r = y[val] - X[val] @ solve(lam)
            mse[i] += float(r @ r) / len(val)
    mse /= folds
    i = _pick(grid, mse)
    return CVFit(ridge_fit(X, y, float(grid[i])), float(grid[i]), grid, mse)

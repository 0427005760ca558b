"""
Fitting procedures: Mallows model averaging, the dimension-adaptive
hypercube-weighted average (Adap) and the soft/hard thresholding rules.

Every fitter returns a :class:`FitResult`. Fits built from basis
coefficients also carry the shrinkage profile, so the fitted vector is
``reconstruct(basis, gamma * theta_tilde)``.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .candidates import ShrinkageProfile, shrinkage_profile
from .risk import nested_gamma
from .simplex_qp import (
    ProjectorSet,
    SimplexWeights,
    assemble_mallows_qp,
    solve_nested_blocks,
    solve_simplex_qp,
)
from .spectral import OrthoBasis, reconstruct, spectral_transform

__all__ = [
    "FitResult",
    "HypercubeWeights",
    "PenaltySpec",
    "estimate_sigma2",
    "mallows_criterion",
    "adap_criterion",
    "mma_fit",
    "adap_fit",
    "soft_threshold_fit",
    "hard_threshold_fit",
    "threshold_level",
    "fitted_checksum",
    "write_fit_csv",
]


@dataclass(frozen=True)
class HypercubeWeights:
    """Weights in ``[0, 1]^p`` (no sum constraint)."""

    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64)
        if w.ndim != 1 or np.any(w < -1e-12) or np.any(w > 1 + 1e-12):
            raise ValueError("hypercube weights must lie in [0, 1]")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)


@dataclass(frozen=True, eq=False)
class FitResult:
    fitted: np.ndarray
    method: str
    weights: Optional[Union[SimplexWeights, HypercubeWeights]] = None
    shrinkage: Optional[ShrinkageProfile] = None
    penalty_lambda: float = 0.0
    sigma2_used: float = 0.0
    coef: Optional[np.ndarray] = None
    criterion: Optional[float] = None

    @property
    def n(self) -> int:
        return self.fitted.size


@dataclass(frozen=True)
class PenaltySpec:
    """
    Penalty multiplier ``lam`` in the criterion
    ``n^-1 ||y - P(w)y||^2 + 2 lam^2 sigma^2 tr P(w)``.

    Named choices: ``mallows`` = sqrt(1/n), ``adaptive`` = sqrt(2 log p / n),
    ``log_n`` = sqrt(log n / n).
    """

    lam: float
    name: str = "custom"

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("penalty must be non-negative")
        if self.name not in ("mallows", "adaptive", "log_n", "custom"):
            raise ValueError(f"unknown penalty name {self.name!r}")

    @classmethod
    def mallows(cls, n: int) -> "PenaltySpec":
        return cls(math.sqrt(1.0 / n), "mallows")

    @classmethod
    def adaptive(cls, n: int, p: int) -> "PenaltySpec":
        return cls(math.sqrt(2.0 * math.log(p) / n), "adaptive")

    @classmethod
    def log_n(cls, n: int) -> "PenaltySpec":
        return cls(math.sqrt(math.log(n) / n), "log_n")

    @classmethod
    def custom(cls, lam: float) -> "PenaltySpec":
        return cls(float(lam), "custom")


def _vec(y) -> np.ndarray:
    return np.asarray(getattr(y, "y", y), dtype=np.float64)


def estimate_sigma2(y, basis: OrthoBasis, k: int) -> float:
    """
    Residual variance of the fit on the first ``k`` basis vectors,
    ``(y'y - n sum_{j<=k} theta_tilde_j^2) / (n - k)``.
    """
    y = _vec(y)
    n = basis.n
    if not 0 <= k <= basis.p:
        raise ValueError(f"k={k} outside [0, p={basis.p}]")
    if k >= n:
        raise ValueError(f"need k < n for a residual variance (k={k}, n={n})")
    th = spectral_transform(basis, y).theta_tilde[:k]
    return max(float(y @ y - n * (th @ th)) / (n - k), 0.0)


def mallows_criterion(y, basis, cset, w, lam: float, sigma2_hat: float) -> float:
    """Direct evaluation of ``n^-1 ||y - P(w) y||^2 + 2 lam^2 sigma2_hat tr P(w)``."""
    y = _vec(y)
    w = np.asarray(getattr(w, "w", w), dtype=np.float64)
    if isinstance(cset, ProjectorSet):
        fit = cset.fits(y) @ w
        trace = float(cset.sizes @ w)
    else:
        coefs = spectral_transform(basis, y)
        gamma = cset.membership.T.astype(np.float64) @ w
        fit = reconstruct(basis, gamma * coefs.theta_tilde)
        trace = float(gamma.sum())
    r = y - fit
    return float(r @ r) / y.size + 2.0 * lam * lam * sigma2_hat * trace


def adap_criterion(y, basis, w, sigma2: float, lam: Optional[float] = None) -> float:
    """Hypercube criterion ``n^-1 ||y - sum_j w_j theta_tilde_j psi_j||^2 + 2 lam^2 sigma2 sum w``."""
    y = _vec(y)
    if lam is None:
        lam = PenaltySpec.adaptive(basis.n, basis.p).lam
    w = np.asarray(getattr(w, "w", w), dtype=np.float64)
    th = spectral_transform(basis, y).theta_tilde
    r = y - reconstruct(basis, w * th)
    return float(r @ r) / y.size + 2.0 * lam * lam * sigma2 * float(w.sum())


def mma_fit(
    y,
    basis: Optional[OrthoBasis],
    cset,
    penalty: PenaltySpec,
    sigma2: Union[float, str] = "estimate",
    tol: float = 1e-9,
    max_iter: Optional[int] = None,
    solver: str = "auto",
) -> FitResult:
    """
    Mallows model averaging: simplex weights minimizing the Mallows
    criterion, then the weighted combination of candidate fits.

    Parameters
    ----------
    y : array_like or ResponseSample
    basis : OrthoBasis or None
        Needed for subset candidates; ignored for a ProjectorSet.
    cset : CandidateSet or ProjectorSet
    penalty : PenaltySpec
    sigma2 : float or "estimate"
        Noise variance in the penalty. ``"estimate"`` uses
        :func:`estimate_sigma2` on the largest candidate.
    solver : {"auto", "qp"}
        ``"auto"`` solves prefix-nested sets exactly by block-wise antitonic
        regression and everything else with the simplex QP solver;
        ``"qp"`` always uses the QP solver.
    """
    if solver not in ("auto", "qp"):
        raise ValueError(f"unknown solver {solver!r}")
    y = _vec(y)
    if isinstance(cset, ProjectorSet):
        if sigma2 == "estimate":
            raise ValueError("sigma2 estimation needs a basis and subset candidates")
        qp = assemble_mallows_qp(y, cset, penalty.lam, float(sigma2))
        sol = solve_simplex_qp(qp, tol=tol, max_iter=max_iter)
        fitted = cset.fits(y) @ sol.weights.w
        return FitResult(fitted, "mma", sol.weights, None, penalty.lam, float(sigma2), criterion=sol.objective)
    if sigma2 == "estimate":
        sigma2 = estimate_sigma2(y, basis, int(cset.sizes.max()))
    elif isinstance(sigma2, str):
        raise ValueError(f"sigma2 must be a number or 'estimate', got {sigma2!r}")
    sigma2 = float(sigma2)
    coefs = spectral_transform(basis, y, sigma2)
    pen = 2.0 * penalty.lam ** 2 * sigma2
    if solver == "auto" and cset.nested_sizes is not None:
        sizes = cset.nested_sizes
        edges = np.concatenate([[0], sizes])
        signal = np.add.reduceat(coefs.theta_tilde ** 2, edges[:-1])
        w = solve_nested_blocks(signal, signal - 0.5 * pen * np.diff(edges))
        gamma = nested_gamma(w, sizes, cset.p)
        th = coefs.theta_tilde
        crit = coefs.resid_ss + float(np.sum((1.0 - gamma) ** 2 * th * th)) + pen * float(gamma.sum())
        fitted = reconstruct(basis, gamma * th)
        return FitResult(fitted, "mma", SimplexWeights(w / w.sum()), ShrinkageProfile(gamma),
                         penalty.lam, sigma2, criterion=crit)
    qp = assemble_mallows_qp(coefs, cset, penalty.lam, sigma2)
    sol = solve_simplex_qp(qp, tol=tol, max_iter=max_iter)
    prof = shrinkage_profile(cset, sol.weights.w)
    fitted = reconstruct(basis, prof.gamma * coefs.theta_tilde)
    return FitResult(fitted, "mma", sol.weights, prof, penalty.lam, sigma2, criterion=sol.objective)


def threshold_level(basis: OrthoBasis, sigma2: float, lam: Optional[float] = None) -> float:
    """``lam * sigma`` with ``lam = sqrt(2 log p / n)`` by default."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    if lam is None:
        lam = PenaltySpec.adaptive(basis.n, basis.p).lam
    return lam * math.sqrt(sigma2)


def _coef_fit(basis, gamma, th, method, lam, sigma2, weights=None):
    prof = ShrinkageProfile(gamma)
    fitted = reconstruct(basis, gamma * th)
    return FitResult(fitted, method, weights, prof, lam, sigma2, coef=gamma * th)


def _lam_or_default(basis, lam):
    return PenaltySpec.adaptive(basis.n, basis.p).lam if lam is None else lam


def adap_fit(y, basis: OrthoBasis, sigma2: float, lam: Optional[float] = None) -> FitResult:
    """
    Hypercube-weighted average of univariate fits with the dimension-adaptive
    penalty. The criterion separates over coordinates and its minimizer is
    ``w_j = (1 - lam^2 sigma2 / theta_tilde_j^2)_+`` (zero when
    ``theta_tilde_j = 0`` and ``sigma2 > 0``).
    """
    y = _vec(y)
    lam = _lam_or_default(basis, lam)
    t2 = threshold_level(basis, sigma2, lam) ** 2
    th = spectral_transform(basis, y).theta_tilde
    th2 = th * th
    if t2 > 0:
        # tiny theta_tilde overflows to inf, which still gives weight 0
        with np.errstate(over="ignore"):
            ratio = np.divide(t2, th2, out=np.full_like(th2, np.inf), where=th2 > 0)
    else:
        ratio = np.zeros_like(th2)
    w = np.maximum(1.0 - ratio, 0.0)
    return _coef_fit(basis, w, th, "adap", lam, sigma2, HypercubeWeights(w))


def soft_threshold_fit(y, basis: OrthoBasis, sigma2: float, lam: Optional[float] = None) -> FitResult:
    """Coefficients ``sgn(x)(|x| - lam sigma)_+``."""
    y = _vec(y)
    lam = _lam_or_default(basis, lam)
    t = threshold_level(basis, sigma2, lam)
    th = spectral_transform(basis, y).theta_tilde
    a = np.abs(th)
    gamma = np.divide(np.maximum(a - t, 0.0), a, out=np.zeros_like(a), where=a > 0)
    return _coef_fit(basis, gamma, th, "soft", lam, sigma2)


def hard_threshold_fit(y, basis: OrthoBasis, sigma2: float, lam: Optional[float] = None) -> FitResult:
    """Coefficients kept when ``|x| > lam sigma`` (strict), else zero."""
    y = _vec(y)
    lam = _lam_or_default(basis, lam)
    t = threshold_level(basis, sigma2, lam)
    th = spectral_transform(basis, y).theta_tilde
    gamma = (np.abs(th) > t).astype(np.float64)
    return _coef_fit(basis, gamma, th, "hard", lam, sigma2)


def fitted_checksum(fitted) -> str:
    """SHA-256 over the little-endian float64 bytes of the fitted vector."""
    return hashlib.sha256(np.asarray(fitted, dtype="<f8").tobytes()).hexdigest()


def write_fit_csv(fit: FitResult, path) -> None:
    """
    Summary CSV with columns ``field,index,value``: method, penalty,
    sigma2, fitted-vector checksum, then one row per shrinkage factor and
    per weight.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["field", "index", "value"])
        w.writerow(["method", "", fit.method])
        w.writerow(["penalty_lambda", "", repr(float(fit.penalty_lambda))])
        w.writerow(["sigma2_used", "", repr(float(fit.sigma2_used))])
        w.writerow(["fitted_sha256", "", fitted_checksum(fit.fitted)])
        if fit.shrinkage is not None:
            for j, g in enumerate(fit.shrinkage.gamma, start=1):
                w.writerow(["shrinkage", j, repr(float(g))])
        if fit.weights is not None:
            for m, v in enumerate(fit.weights.w, start=1):
                w.writerow(["weight", m, repr(float(v))])
        if fit.coef is not None:
            for j, v in enumerate(fit.coef, start=1):
                w.writerow(["coef", j, repr(float(v))])

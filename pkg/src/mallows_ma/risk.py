"""
Exact losses, risks and oracle (best-weight) risks for model averaging.

Over an orthogonal basis the risk of a weighted fit depends on the weights
only through the shrinkage profile ``gamma_j``:

    R = sum_j (1 - gamma_j)^2 theta_j^2 + gamma_j^2 sigma^2 / n

so oracle risks reduce to small convex problems in ``gamma``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .candidates import CandidateSet, ShrinkageProfile
from .simplex_qp import (
    ProjectorSet,
    SimplexWeights,
    assemble_risk_qp,
    solve_nested_blocks,
    solve_simplex_qp,
)
from .spectral import DimensionError, MeanSpec

__all__ = [
    "RiskReport",
    "loss_of_fit",
    "risk_of_profile",
    "risk_of_weights",
    "optimal_ma_risk",
    "optimal_nested_profile",
    "nested_gamma",
    "optimal_all_subset_risk",
    "minimax_ratio_denominator",
]


@dataclass(frozen=True)
class RiskReport:
    risk: float
    optimal_weights: Optional[Union[SimplexWeights, ShrinkageProfile]] = None
    denominator_offset: float = 0.0

    def __post_init__(self):
        if not self.risk >= 0:
            raise ValueError(f"risk must be non-negative, got {self.risk}")


def loss_of_fit(fit, mean) -> float:
    """Normalized squared loss ``||mu_hat - mu||^2 / n``.

    ``fit`` may be a FitResult or a fitted vector; ``mean`` a MeanSpec or
    the mean vector.
    """
    fitted = np.asarray(getattr(fit, "fitted", fit), dtype=np.float64)
    mu = mean.mu() if isinstance(mean, MeanSpec) else np.asarray(mean, dtype=np.float64)
    if fitted.shape != mu.shape:
        raise DimensionError(f"fit has shape {fitted.shape}, mean has shape {mu.shape}")
    diff = fitted - mu
    return float(diff @ diff) / mu.size


def risk_of_profile(theta, sigma2: float, n: int, gamma) -> float:
    """Risk of the fit ``sum_j gamma_j theta_tilde_j psi_j``."""
    theta = np.asarray(theta, dtype=np.float64)
    gamma = np.asarray(getattr(gamma, "gamma", gamma), dtype=np.float64)
    if gamma.shape != theta.shape:
        raise DimensionError("gamma and theta differ in length")
    return float(np.sum((1.0 - gamma) ** 2 * theta ** 2 + gamma ** 2 * sigma2 / n))


def risk_of_weights(mean, sigma2: float, cset, w) -> float:
    """
    Exact risk of the averaged fit with fixed weights ``w``.

    Subset candidates use the shrinkage-profile formula; a
    :class:`ProjectorSet` uses
    ``n^-1 ||(I - P(w)) mu||^2 + sigma2 n^-1 tr P(w)^2``.
    """
    w = np.asarray(getattr(w, "w", w), dtype=np.float64)
    if w.shape != (len(cset),):
        raise DimensionError(f"expected {len(cset)} weights, got shape {w.shape}")
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    if isinstance(cset, ProjectorSet):
        mu = np.asarray(mean.mu() if isinstance(mean, MeanSpec) else mean, dtype=np.float64)
        n = cset.n
        bias = mu - cset.fits(mu) @ w
        return float(bias @ bias) / n + sigma2 * float(w @ cset.trace_products() @ w) / n
    if mean.basis.p != cset.p:
        raise DimensionError(f"mean has p={mean.basis.p}, candidates have p={cset.p}")
    gamma = cset.membership.T.astype(np.float64) @ w
    return risk_of_profile(mean.theta, sigma2, mean.n, gamma)


def optimal_nested_profile(theta, sigma2: float, n: int, sizes) -> tuple:
    """
    Optimal weights over prefix models ``{1..k_1} c ... c {1..k_M}``.

    The shrinkage profile is constant on each block ``(k_{t-1}, k_t]``, equal
    to one on the first block and zero past ``k_M``, and non-increasing; the
    risk is minimized block-wise by :func:`solve_nested_blocks`.

    Returns
    -------
    weights : ndarray, shape (M,)
    gamma : ndarray, shape (p,)
    """
    theta2 = np.asarray(theta, dtype=np.float64) ** 2
    sizes = np.asarray(sizes, dtype=np.int64)
    edges = np.concatenate([[0], sizes])
    signal = np.add.reduceat(theta2, edges[:-1]) if sizes.size else np.zeros(0)
    weights = solve_nested_blocks(signal + np.diff(edges) * sigma2 / n, signal)
    gamma = nested_gamma(weights, sizes, theta2.size)
    return weights, gamma


def nested_gamma(weights, sizes, p: int) -> np.ndarray:
    """Shrinkage profile of prefix models with sizes ``sizes``: ``gamma_j = sum_{k_m >= j} w_m``."""
    lam = np.cumsum(np.asarray(weights, dtype=np.float64)[::-1])[::-1]
    gamma = np.zeros(p)
    edges = np.concatenate([[0], np.asarray(sizes, dtype=np.int64)])
    for t in range(lam.size):
        gamma[edges[t]:edges[t + 1]] = min(lam[t], 1.0)
    return gamma


def optimal_ma_risk(mean, sigma2: float, cset, tol: float = 1e-10, method: str = "auto") -> RiskReport:
    """
    Smallest risk over simplex weights for the candidate set.

    ``method="qp"`` always solves the risk quadratic program;
    ``"auto"`` uses the exact antitonic-regression solution when the models
    are increasing prefixes and the QP otherwise.
    """
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    if method not in ("auto", "qp"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto" and isinstance(cset, CandidateSet) and cset.nested_sizes is not None:
        if mean.basis.p != cset.p:
            raise DimensionError(f"mean has p={mean.basis.p}, candidates have p={cset.p}")
        w, gamma = optimal_nested_profile(mean.theta, sigma2, mean.n, cset.nested_sizes)
        return RiskReport(risk_of_profile(mean.theta, sigma2, mean.n, gamma), SimplexWeights(w / w.sum()))
    sol = solve_simplex_qp(assemble_risk_qp(mean, sigma2, cset), tol=tol)
    return RiskReport(max(sol.objective, 0.0), sol.weights)


def optimal_all_subset_risk(theta, sigma2: float, n: int) -> RiskReport:
    """
    Best risk over all subset models, solved per coordinate:
    ``gamma_j = theta_j^2 / (theta_j^2 + sigma2/n)`` and
    ``R = sum_j theta_j^2 (sigma2/n) / (theta_j^2 + sigma2/n)``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    theta2 = np.asarray(theta, dtype=np.float64) ** 2
    noise = sigma2 / n
    denom = theta2 + noise
    gamma = np.divide(theta2, denom, out=np.zeros_like(theta2), where=denom > 0)
    terms = np.divide(theta2 * noise, denom, out=np.zeros_like(theta2), where=denom > 0)
    return RiskReport(float(terms.sum()), ShrinkageProfile(gamma))


def minimax_ratio_denominator(theta, sigma2: float, n: int) -> float:
    """``1/n`` plus the optimal all-subset risk."""
    return 1.0 / n + optimal_all_subset_risk(theta, sigma2, n).risk

"""
Data-generating pieces: coefficient sequences, calibrated noise and
correlated Gaussian designs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "CoefficientSpec",
    "NoiseSpec",
    "gen_coefficients",
    "calibrate_sigma2",
    "gen_noise",
    "ar1_design",
    "NOISE_FAMILIES",
    "DECAYS",
]

DECAYS = ("polynomial", "exponential", "hardest_cube")
NOISE_FAMILIES = ("gaussian", "student_t", "pareto_symmetric")


@dataclass(frozen=True)
class CoefficientSpec:
    """
    Coefficient sequence ``theta_(j)`` before optional permutation.

    polynomial: ``scale * j^-alpha`` (alpha > 0.5);
    exponential: ``scale * exp(-j^alpha)`` (alpha > 0);
    hardest_cube: ``|theta_j|`` uniform on ``[0, sqrt(2 sigma2 log p / n)]``
    with random signs (alpha unused).
    """

    decay: str
    p: int
    alpha: float = 1.0
    order: str = "ordered"
    scale: float = 1.0

    def __post_init__(self):
        if self.decay not in DECAYS:
            raise ValueError(f"unknown decay {self.decay!r}; expected one of {DECAYS}")
        if self.order not in ("ordered", "permuted"):
            raise ValueError(f"order must be 'ordered' or 'permuted', got {self.order!r}")
        if self.p < 1:
            raise ValueError("p must be positive")
        if self.decay == "polynomial" and not self.alpha > 0.5:
            raise ValueError(f"polynomial decay needs alpha > 0.5, got {self.alpha}")
        if self.decay == "exponential" and not self.alpha > 0:
            raise ValueError(f"exponential decay needs alpha > 0, got {self.alpha}")

    @property
    def random(self) -> bool:
        """True when each call may return a different vector."""
        return self.order == "permuted" or self.decay == "hardest_cube"


@dataclass(frozen=True)
class NoiseSpec:
    """Error distribution standardized to variance ``sigma2``."""

    family: str = "gaussian"
    sigma2: float = 1.0
    df: float = 5.0
    shape: float = 5.0

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}; expected one of {NOISE_FAMILIES}")
        if not self.sigma2 >= 0:
            raise ValueError("sigma2 must be non-negative")
        if self.family == "student_t" and not self.df > 2:
            raise ValueError("student_t needs df > 2 for a finite variance")
        if self.family == "pareto_symmetric" and not self.shape > 2:
            raise ValueError("pareto_symmetric needs shape > 2 for a finite variance")


def gen_coefficients(
    spec: CoefficientSpec,
    rng: Optional[np.random.Generator] = None,
    sigma2: Optional[float] = None,
    n: Optional[int] = None,
) -> np.ndarray:
    """
    Coefficient vector of length ``spec.p``.

    ``rng`` is required for permuted order and for the hardest cube, which
    also needs ``sigma2`` and ``n``.
    """
    j = np.arange(1, spec.p + 1, dtype=np.float64)
    if spec.random and rng is None:
        raise ValueError("a random generator is needed for permuted or random coefficients")
    if spec.decay == "polynomial":
        theta = j ** -spec.alpha
    elif spec.decay == "exponential":
        theta = np.exp(-(j ** spec.alpha))
    else:
        if sigma2 is None or n is None:
            raise ValueError("hardest_cube needs sigma2 and n")
        half = math.sqrt(2.0 * sigma2 * math.log(spec.p) / n) if spec.p > 1 else 0.0
        mag = rng.uniform(0.0, half, spec.p)
        theta = mag * rng.choice((-1.0, 1.0), spec.p)
    theta = spec.scale * theta
    if spec.order == "permuted":
        theta = theta[rng.permutation(spec.p)]
    return theta


def calibrate_sigma2(theta, snr: float) -> float:
    """Noise variance giving ``sum theta^2 / sigma2 = snr``."""
    if not snr > 0:
        raise ValueError("snr must be positive")
    energy = float(np.sum(np.asarray(theta, dtype=np.float64) ** 2))
    if energy == 0:
        raise ValueError("cannot calibrate a finite snr for a zero signal")
    return energy / snr


def gen_noise(spec: NoiseSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """
    ``n`` i.i.d. mean-zero errors with variance ``spec.sigma2``.

    student_t is scaled by ``sqrt(sigma2 (df-2)/df)``. pareto_symmetric draws
    ``X ~ Pareto(shape, 1)`` (Type I, support ``[1, inf)``), attaches an
    independent uniform sign and scales by ``sqrt(sigma2 / E X^2)`` with
    ``E X^2 = shape / (shape - 2)``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    sd = math.sqrt(spec.sigma2)
    if spec.family == "gaussian":
        return sd * rng.standard_normal(n)
    if spec.family == "student_t":
        return math.sqrt(spec.sigma2 * (spec.df - 2.0) / spec.df) * rng.standard_t(spec.df, n)
    a = spec.shape
    x = 1.0 + rng.pareto(a, n)  # numpy's pareto is the Lomax form; shifting by 1 gives Type I
    sign = rng.choice((-1.0, 1.0), n)
    return math.sqrt(spec.sigma2 * (a - 2.0) / a) * sign * x


def ar1_design(n: int, d: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Rows i.i.d. ``N(0, Sigma)`` with ``Sigma_ij = rho^|i-j|``."""
    if not -1 < rho < 1:
        raise ValueError("rho must lie in (-1, 1)")
    Z = rng.standard_normal((n, d))
    X = np.empty((n, d))
    X[:, 0] = Z[:, 0]
    c = math.sqrt(1.0 - rho * rho)
    for j in range(1, d):
        X[:, j] = rho * X[:, j - 1] + c * Z[:, j]
    return X

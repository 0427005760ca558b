"""
Orthogonal bases and the coefficient-space view of a response vector.

Every estimator in this package works on the empirical coefficients
``theta_tilde[j] = psi_j' y / n`` of a response ``y`` with respect to a
basis ``psi_1, ..., psi_p`` normalized so that ``psi_j' psi_j / n = 1``.
In that representation a subset least-squares fit keeps some coefficients
and zeroes the rest, and a model-averaged fit multiplies each coefficient by
a shrinkage factor.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

__all__ = [
    "ResponseSample",
    "OrthoBasis",
    "CanonicalBasis",
    "SpectralCoefs",
    "MeanSpec",
    "ValidationReport",
    "DimensionError",
    "validate_basis",
    "spectral_transform",
    "reconstruct",
    "basis_from_svd",
    "canonical_basis",
    "write_basis_csv",
    "read_basis_csv",
    "write_coefs_csv",
    "read_coefs_csv",
]


class DimensionError(ValueError):
    """Raised when array shapes disagree with declared dimensions."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ResponseSample:
    """Observation vector ``y`` of length ``n``."""

    y: np.ndarray

    def __post_init__(self):
        y = _frozen(self.y)
        if y.ndim != 1 or y.size < 1:
            raise DimensionError("y must be a non-empty 1-d vector")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite entries")
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.size


class OrthoBasis:
    """
    ``p`` orthogonal directions in R^n with ``psi_j' psi_j / n = 1``.

    Parameters
    ----------
    columns : array_like, shape (n, p)
        The basis vectors as columns.
    n, p : int, optional
        Declared dimensions; checked against ``columns`` when given.

    The constructor only checks shapes. Use :func:`validate_basis` to check
    the orthogonality and normalization invariants.
    """

    def __init__(self, columns, n: Optional[int] = None, p: Optional[int] = None):
        cols = _frozen(columns)
        if cols.ndim != 2:
            raise DimensionError("basis columns must be a 2-d array")
        if n is not None and cols.shape[0] != n:
            raise DimensionError(f"declared n={n} but columns have {cols.shape[0]} rows")
        if p is not None and cols.shape[1] != p:
            raise DimensionError(f"declared p={p} but columns have {cols.shape[1]} columns")
        if not 1 <= cols.shape[1] <= cols.shape[0]:
            raise DimensionError(f"need 1 <= p <= n, got n={cols.shape[0]}, p={cols.shape[1]}")
        self._columns = cols

    @property
    def columns(self) -> np.ndarray:
        return self._columns

    @property
    def n(self) -> int:
        return self._columns.shape[0]

    @property
    def p(self) -> int:
        return self._columns.shape[1]

    def transform(self, y: np.ndarray) -> np.ndarray:
        return self._columns.T @ y / self.n

    def combine(self, coefs: np.ndarray) -> np.ndarray:
        return self._columns @ coefs

    def permuted(self, order) -> "OrthoBasis":
        """Basis with columns reordered as ``columns[:, order]``."""
        return OrthoBasis(self._columns[:, np.asarray(order)])

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, p={self.p})"


class CanonicalBasis(OrthoBasis):
    """
    The scaled coordinate basis ``psi_j = sqrt(n) e_j``, j = 1..p.

    Transform and reconstruction are O(n) slicing operations; the dense
    column matrix is only built if :attr:`columns` is requested, which keeps
    ``p = n`` simulations at n ~ 10^4 within memory.
    """

    def __init__(self, n: int, p: int):
        if not 1 <= p <= n:
            raise DimensionError(f"need 1 <= p <= n, got n={n}, p={p}")
        self._n = int(n)
        self._p = int(p)
        self._scale = np.sqrt(n)
        self._dense = None

    @property
    def columns(self) -> np.ndarray:
        if self._dense is None:
            cols = np.zeros((self._n, self._p))
            cols[np.arange(self._p), np.arange(self._p)] = self._scale
            cols.setflags(write=False)
            self._dense = cols
        return self._dense

    @property
    def n(self) -> int:
        return self._n

    @property
    def p(self) -> int:
        return self._p

    def transform(self, y: np.ndarray) -> np.ndarray:
        return y[: self._p] / self._scale

    def combine(self, coefs: np.ndarray) -> np.ndarray:
        out = np.zeros(self._n)
        out[: self._p] = coefs * self._scale
        return out

    def permuted(self, order) -> OrthoBasis:
        return OrthoBasis(self.columns[:, np.asarray(order)])


@dataclass(frozen=True)
class SpectralCoefs:
    """
    Empirical coefficients of ``y`` in a basis.

    ``resid_ss`` holds ``||y - Psi Psi' y / n||^2 / n``, the part of the
    normalized sum of squares that no candidate model can explain. It is
    zero when ``p = n`` and enters the Mallows criterion as a constant.
    """

    theta_tilde: np.ndarray
    n: int
    sigma2: float = 0.0
    resid_ss: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta_tilde", _frozen(self.theta_tilde))
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be non-negative")

    @property
    def p(self) -> int:
        return self.theta_tilde.size


@dataclass(frozen=True)
class MeanSpec:
    """True mean ``mu = sum_j theta_j psi_j`` over a given basis."""

    theta: np.ndarray
    basis: OrthoBasis = field(repr=False)

    def __post_init__(self):
        theta = _frozen(self.theta)
        if theta.shape != (self.basis.p,):
            raise DimensionError(f"theta has shape {theta.shape}, basis has p={self.basis.p}")
        object.__setattr__(self, "theta", theta)

    @property
    def n(self) -> int:
        return self.basis.n

    def mu(self) -> np.ndarray:
        return self.basis.combine(self.theta)


@dataclass(frozen=True)
class ValidationReport:
    max_offdiag: float
    max_norm_dev: float
    passed: bool


def validate_basis(basis: OrthoBasis, tol: float = 1e-8) -> ValidationReport:
    """
    Check ``Psi' Psi / n = I`` entrywise within ``tol``.

    Returns the largest off-diagonal magnitude and the largest deviation of
    a diagonal entry from one.
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    if isinstance(basis, CanonicalBasis):
        return ValidationReport(0.0, 0.0, True)
    cols = basis.columns
    if cols.shape != (basis.n, basis.p):
        raise DimensionError("basis shape disagrees with declared n, p")
    gram = cols.T @ cols / basis.n
    diag = np.diag(gram)
    max_norm_dev = float(np.max(np.abs(diag - 1.0)))
    off = gram - np.diag(diag)
    max_offdiag = float(np.max(np.abs(off))) if basis.p > 1 else 0.0
    return ValidationReport(max_offdiag, max_norm_dev, max_offdiag <= tol and max_norm_dev <= tol)


def _as_y(y) -> np.ndarray:
    if isinstance(y, ResponseSample):
        return y.y
    return np.asarray(y, dtype=np.float64)


def spectral_transform(basis: OrthoBasis, y, sigma2: float = 0.0) -> SpectralCoefs:
    """Empirical coefficients ``theta_tilde[j] = psi_j' y / n``."""
    y = _as_y(y)
    if y.shape != (basis.n,):
        raise DimensionError(f"y has shape {y.shape}, basis has n={basis.n}")
    theta_tilde = basis.transform(y)
    n = basis.n
    if basis.p == n:
        resid_ss = 0.0
    else:
        resid = y - basis.combine(theta_tilde)
        resid_ss = float(resid @ resid) / n
    return SpectralCoefs(theta_tilde, n, sigma2, resid_ss)


def reconstruct(basis: OrthoBasis, coefs) -> np.ndarray:
    """Return ``sum_j coefs[j] psi_j``."""
    coefs = np.asarray(coefs, dtype=np.float64)
    if coefs.shape != (basis.p,):
        raise DimensionError(f"coefs has shape {coefs.shape}, basis has p={basis.p}")
    return basis.combine(coefs)


def basis_from_svd(X, rank_tol: float = 1e-10) -> OrthoBasis:
    """
    Orthogonal basis ``psi_j = sqrt(n) u_j`` from the left singular vectors.

    Singular vectors are kept while ``s_j > rank_tol * s_1`` and are ordered
    by decreasing singular value. Each ``u_j`` is sign-flipped so that its
    entry of largest magnitude is positive (first such entry on ties).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionError("X must be a non-empty 2-d array")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite entries")
    n = X.shape[0]
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    if s.size == 0 or s[0] <= 0:
        raise ValueError("X has no singular values above tolerance")
    keep = s > rank_tol * s[0]
    U = U[:, keep]
    pivot = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[pivot, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return OrthoBasis(np.sqrt(n) * U * signs)


def canonical_basis(n: int, p: Optional[int] = None) -> CanonicalBasis:
    """The basis ``psi_j = sqrt(n) e_j`` for j = 1..p (p defaults to n)."""
    if p is None:
        p = n
    if n < 1 or p < 1:
        raise DimensionError("n and p must be positive")
    if p > n:
        raise DimensionError(f"p={p} exceeds n={n}")
    return CanonicalBasis(n, p)


# CSV helpers: repr() of a float64 round-trips exactly.

def write_basis_csv(basis: OrthoBasis, path) -> None:
    """One column per basis vector, header ``psi_1..psi_p``."""
    cols = basis.columns
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"psi_{j + 1}" for j in range(basis.p)])
        for row in cols:
            w.writerow([repr(float(v)) for v in row])


def read_basis_csv(path) -> OrthoBasis:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: basis CSV needs a header and at least one row")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise ValueError(f"{path}: malformed basis CSV ({exc})") from None
    return OrthoBasis(data)


def write_coefs_csv(coefs, path, name: str = "coef") -> None:
    """One row per coefficient: ``j,<name>``."""
    coefs = np.asarray(coefs, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", name])
        for j, v in enumerate(coefs, start=1):
            w.writerow([j, repr(float(v))])


def read_coefs_csv(path) -> np.ndarray:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty coefficient CSV")
    try:
        return np.array([float(r[-1]) for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed coefficient CSV ({exc})") from None

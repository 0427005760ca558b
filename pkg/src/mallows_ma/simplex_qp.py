"""
Quadratic programs over the probability simplex.

Both the Mallows criterion and the risk of a model-averaged fit are
quadratic in the weight vector, ``f(w) = w'Qw + b'w + c``. This module
assembles those programs and minimizes them with an away-step Frank-Wolfe
method whose duality gap certifies the result.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .candidates import CandidateSet, CapacityError
from .spectral import DimensionError, MeanSpec, SpectralCoefs

__all__ = [
    "QuadraticProgram",
    "SimplexWeights",
    "QPSolution",
    "ProjectorSet",
    "ConvergenceError",
    "NotPSDError",
    "projectors_from_subsets",
    "assemble_mallows_qp",
    "assemble_risk_qp",
    "solve_simplex_qp",
    "grid_search_simplex",
    "solve_nested_blocks",
    "write_trace_csv",
]

GRID_CAPACITY = 10_000_000


class ConvergenceError(RuntimeError):
    """The solver hit ``max_iter`` before the duality gap reached ``tol``."""

    def __init__(self, message, weights, objective, gap, iterations):
        super().__init__(message)
        self.weights = weights
        self.objective = objective
        self.gap = gap
        self.iterations = iterations


class NotPSDError(ValueError):
    """Quadratic term is asymmetric or has a negative eigenvalue beyond tolerance."""


@dataclass(frozen=True, eq=False)
class QuadraticProgram:
    """``objective(w) = w'Qw + b'w + c``."""

    Q: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        Q = np.array(self.Q, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or b.shape != (Q.shape[0],):
            raise DimensionError(f"inconsistent shapes Q{Q.shape}, b{b.shape}")
        Q.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @property
    def size(self) -> int:
        return self.b.size

    def objective(self, w) -> float:
        w = np.asarray(w, dtype=np.float64)
        return float(w @ self.Q @ w + self.b @ w + self.c)

    def check(self) -> None:
        """Raise :class:`NotPSDError` unless Q is symmetric and PSD within tolerance."""
        Q = self.Q
        scale = float(np.max(np.abs(Q))) if Q.size else 0.0
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-10 * (1.0 + scale):
            raise NotPSDError("Q is not symmetric")
        eig = np.linalg.eigvalsh(Q)
        norm = float(np.max(np.abs(eig)))
        if eig[0] < -1e-8 * norm:
            raise NotPSDError(f"Q has eigenvalue {eig[0]:.3e} (norm {norm:.3e})")


@dataclass(frozen=True)
class SimplexWeights:
    """Non-negative weights summing to one."""

    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a non-empty vector")
        if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("weights are not on the probability simplex")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    def __len__(self):
        return self.w.size


@dataclass(frozen=True)
class QPSolution:
    weights: SimplexWeights
    objective: float
    iterations: int
    gap: float
    trace: Optional[list] = field(default=None, repr=False)


class ProjectorSet:
    """
    General candidate subspaces, each given by a factor ``Z_m`` (n x k_m)
    with orthonormal columns so that ``P_m = Z_m Z_m'``.
    """

    def __init__(self, factors: Sequence[np.ndarray], tol: float = 1e-8):
        mats = []
        for m, Z in enumerate(factors):
            Z = np.array(Z, dtype=np.float64)
            if Z.ndim == 1:
                Z = Z[:, None]
            if mats and Z.shape[0] != mats[0].shape[0]:
                raise DimensionError("all projector factors need the same number of rows")
            if Z.shape[1] and np.max(np.abs(Z.T @ Z - np.eye(Z.shape[1]))) > tol:
                raise ValueError(f"factor {m} does not have orthonormal columns")
            Z.setflags(write=False)
            mats.append(Z)
        if not mats:
            raise ValueError("need at least one candidate")
        self.factors = tuple(mats)

    def __len__(self):
        return len(self.factors)

    @property
    def n(self) -> int:
        return self.factors[0].shape[0]

    @property
    def sizes(self) -> np.ndarray:
        return np.array([Z.shape[1] for Z in self.factors])

    def fits(self, v: np.ndarray) -> np.ndarray:
        """Matrix whose m-th column is ``P_m v``."""
        return np.column_stack([Z @ (Z.T @ v) for Z in self.factors])

    def trace_products(self) -> np.ndarray:
        """``tr(P_l P_m) = ||Z_l' Z_m||_F^2``."""
        M = len(self)
        T = np.empty((M, M))
        for l in range(M):
            for m in range(l, M):
                T[l, m] = T[m, l] = np.sum((self.factors[l].T @ self.factors[m]) ** 2)
        return T


def projectors_from_subsets(basis, cset: CandidateSet) -> ProjectorSet:
    """Explicit projector factors ``Psi_I / sqrt(n)`` for subset candidates."""
    cols = basis.columns / np.sqrt(basis.n)
    return ProjectorSet([cols[:, list(idx)] for idx in cset.models])


def _symmetric(Q):
    return 0.5 * (Q + Q.T)


def assemble_mallows_qp(source, cset, lam: float, sigma2_hat: float) -> QuadraticProgram:
    """
    Mallows criterion ``n^-1 ||y - P(w) y||^2 + 2 lam^2 sigma2_hat tr P(w)``.

    Parameters
    ----------
    source : SpectralCoefs or array_like
        Spectral coefficients for subset candidates, or the raw response
        ``y`` when ``cset`` is a :class:`ProjectorSet`.
    cset : CandidateSet or ProjectorSet
    lam : float
        Penalty multiplier (``sqrt(1/n)`` recovers classical MMA).
    sigma2_hat : float
        Noise variance plugged into the penalty.

    Notes
    -----
    ``Q[l, m] = n^-1 e_l'e_m`` with residuals ``e_m = (I - P_m) y``,
    ``b[m] = 2 lam^2 sigma2_hat k_m`` and ``c = 0``.
    """
    if lam < 0 or sigma2_hat < 0:
        raise ValueError("lam and sigma2_hat must be non-negative")
    pen = 2.0 * lam * lam * sigma2_hat
    if isinstance(cset, ProjectorSet):
        y = np.asarray(source.y if hasattr(source, "y") else source, dtype=np.float64)
        if y.shape != (cset.n,):
            raise DimensionError(f"y has shape {y.shape}, candidates have n={cset.n}")
        E = y[:, None] - cset.fits(y)
        Q = E.T @ E / cset.n
        return QuadraticProgram(_symmetric(Q), pen * cset.sizes, 0.0)
    if not isinstance(source, SpectralCoefs):
        raise TypeError("subset candidates need SpectralCoefs")
    if source.p != cset.p:
        raise DimensionError(f"coefficients have p={source.p}, candidates have p={cset.p}")
    out = (~cset.membership).astype(np.float64)
    Q = (out * source.theta_tilde ** 2) @ out.T + source.resid_ss
    return QuadraticProgram(_symmetric(Q), pen * cset.sizes, 0.0)


def assemble_risk_qp(mean, sigma2: float, cset) -> QuadraticProgram:
    """
    Exact risk ``R_n(w) = E n^-1 ||P(w) y - mu||^2`` as a quadratic program.

    ``mean`` is a :class:`MeanSpec` for subset candidates, or the mean
    vector ``mu`` itself when ``cset`` is a :class:`ProjectorSet`.
    ``Q[l, m] = n^-1 (mu'P_l P_m mu + sigma2 tr(P_l P_m))``,
    ``b[m] = -2 n^-1 mu'P_m mu`` and ``c = n^-1 ||mu||^2``.
    """
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    if isinstance(cset, ProjectorSet):
        mu = np.asarray(mean.mu() if isinstance(mean, MeanSpec) else mean, dtype=np.float64)
        if mu.shape != (cset.n,):
            raise DimensionError(f"mu has shape {mu.shape}, candidates have n={cset.n}")
        n = cset.n
        F = cset.fits(mu)
        Q = (F.T @ F + sigma2 * cset.trace_products()) / n
        b = -2.0 * (mu @ F) / n
        return QuadraticProgram(_symmetric(Q), b, float(mu @ mu) / n)
    if not isinstance(mean, MeanSpec):
        raise TypeError("subset candidates need a MeanSpec")
    if mean.basis.p != cset.p:
        raise DimensionError(f"mean has p={mean.basis.p}, candidates have p={cset.p}")
    A = cset.membership.astype(np.float64)
    theta2 = mean.theta ** 2
    Q = (A * (theta2 + sigma2 / mean.n)) @ A.T
    return QuadraticProgram(_symmetric(Q), -2.0 * (A @ theta2), float(theta2.sum()))


def solve_simplex_qp(
    qp: QuadraticProgram,
    tol: float = 1e-9,
    max_iter: Optional[int] = None,
    trace: bool = False,
    check: bool = True,
) -> QPSolution:
    """
    Minimize ``qp`` over the probability simplex by away-step Frank-Wolfe.

    Each iteration compares the Frank-Wolfe vertex (smallest gradient
    entry) with the away vertex (largest gradient entry on the support) and
    moves along the better direction with an exact line search, so the
    objective never increases. The loop stops once the Frank-Wolfe duality
    gap ``g'(w - e_s)`` is at most ``tol``, which bounds the suboptimality.
    Ties go to the lowest index.

    Raises
    ------
    NotPSDError
        If ``check`` and Q fails :meth:`QuadraticProgram.check`.
    ConvergenceError
        If the gap is still above ``tol`` after ``max_iter`` iterations
        (default ``50 M^2``); carries the best iterate and its gap.
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    if check:
        qp.check()
    M = qp.size
    if max_iter is None:
        max_iter = 50 * M * M
    Q, b = qp.Q, qp.b
    diag = np.diag(Q)

    start = int(np.argmin(diag + b))
    w = np.zeros(M)
    w[start] = 1.0
    Qw = Q[:, start].copy()
    obj = float(diag[start] + b[start] + qp.c)
    rows = [] if trace else None

    it = 0
    while True:
        g = 2.0 * Qw + b
        s = int(np.argmin(g))
        gw = float(g @ w)
        gap = max(gw - float(g[s]), 0.0)
        if rows is not None:
            rows.append((it, obj, gap))
        if gap <= tol:
            break
        if it >= max_iter:
            ws = w / w.sum()
            raise ConvergenceError(
                f"no convergence in {max_iter} iterations (gap {gap:.3e} > tol {tol:.1e})",
                SimplexWeights(ws), obj, gap, it,
            )
        it += 1

        support = np.flatnonzero(w > 0)
        v = int(support[np.argmax(g[support])])
        away_gap = float(g[v]) - gw
        if gap >= away_gap or w[v] >= 1.0:
            Qd = Q[:, s] - Qw
            gd = -gap
            dQd = float(Qd[s] - Qd @ w)
            amax = 1.0
            away = False
        else:
            Qd = Qw - Q[:, v]
            gd = -away_gap
            dQd = float(Qd @ w - Qd[v])
            amax = w[v] / (1.0 - w[v])
            away = True
        alpha = amax if dQd <= 0 else min(amax, -gd / (2.0 * dQd))
        if away:
            w *= 1.0 + alpha
            w[v] -= alpha
            if alpha >= amax:
                w[v] = 0.0
        else:
            w *= 1.0 - alpha
            w[s] += alpha
        w[w < 0] = 0.0
        new_obj = obj + alpha * gd + alpha * alpha * dQd
        if it % 50 == 0:
            Qw = Q @ w
            obj = float(w @ Qw + b @ w + qp.c)
        else:
            Qw += alpha * Qd
            obj = min(obj, new_obj)

    w = w / w.sum()
    return QPSolution(SimplexWeights(w), qp.objective(w), it, gap, rows)


def _block_value(num: float, den: float) -> float:
    if den > 0:
        return num / den
    if num < 0:
        return -math.inf
    # an empty block carries no information; +inf makes it pool with its left neighbour
    return math.inf


def solve_nested_blocks(curv, lin) -> np.ndarray:
    """
    Exact minimizer for prefix-nested candidates.

    With models ``{1..k_1} c ... c {1..k_M}`` every quadratic above is a sum
    over blocks ``(k_{t-1}, k_t]`` of ``curv_t lam_t^2 - 2 lin_t lam_t``, where
    ``lam_t = w_t + ... + w_M`` is non-increasing with ``lam_1 = 1``. The
    minimizer is a weighted antitonic regression (pool adjacent violators)
    of ``lin_t / curv_t`` over blocks ``2..M``, clipped to [0, 1].

    Returns
    -------
    ndarray, shape (M,)
        Simplex weights ``w_t = lam_t - lam_{t+1}``.
    """
    curv = np.asarray(curv, dtype=np.float64)
    lin = np.asarray(lin, dtype=np.float64)
    if np.any(curv < 0):
        raise ValueError("block curvatures must be non-negative")
    M = curv.size
    lam = np.ones(M)
    nums, dens, counts, vals = [], [], [], []
    for a, c in zip(curv[1:], lin[1:]):
        nums.append(float(c))
        dens.append(float(a))
        counts.append(1)
        vals.append(_block_value(c, a))
        while len(vals) > 1 and vals[-2] < vals[-1]:
            nums[-2:] = [nums[-2] + nums[-1]]
            dens[-2:] = [dens[-2] + dens[-1]]
            counts[-2:] = [counts[-2] + counts[-1]]
            vals[-2:] = [_block_value(nums[-1], dens[-1])]
    if M > 1:
        lam[1:] = np.clip(np.repeat(vals, counts), 0.0, 1.0)
    w = lam - np.append(lam[1:], 0.0)
    return np.clip(w, 0.0, None)


def _compositions(K: int, M: int, chunk: int = 200_000):
    """Yield blocks of weight-count vectors c with sum K, in lexicographic bar order."""
    combos = itertools.combinations(range(K + M - 1), M - 1)
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            return
        bars = np.array(block, dtype=np.int64).reshape(len(block), M - 1)
        edges = np.hstack([np.full((len(block), 1), -1), bars, np.full((len(block), 1), K + M - 1)])
        yield np.diff(edges, axis=1) - 1


def grid_search_simplex(qp: QuadraticProgram, K: int) -> SimplexWeights:
    """
    Exact minimizer over the lattice ``{c / K : c_m >= 0 integer, sum c = K}``.

    Brute force over all ``C(K+M-1, M-1)`` lattice points; the first
    minimizer in enumeration order wins.
    """
    M = qp.size
    if K < 1:
        raise ValueError("K must be a positive integer")
    if M == 1:
        return SimplexWeights(np.ones(1))
    count = math.comb(K + M - 1, M - 1)
    if count > GRID_CAPACITY:
        raise CapacityError(f"grid has {count} points, capacity is {GRID_CAPACITY}")
    best_val, best_w = np.inf, None
    for counts in _compositions(K, M):
        W = counts / K
        vals = np.einsum("ij,jk,ik->i", W, qp.Q, W) + W @ qp.b
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_w = vals[i], W[i].copy()
    return SimplexWeights(best_w)


def write_trace_csv(solution: QPSolution, path) -> None:
    """Per-iteration objective and duality gap."""
    if solution.trace is None:
        raise ValueError("solution was computed without trace=True")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "objective", "gap"])
        for it, obj, gap in solution.trace:
            w.writerow([it, repr(obj), repr(gap)])

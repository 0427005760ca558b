"""
Candidate model sets built from subsets of an orthogonal basis.

A model is an index set ``I`` into the basis. Indices are 0-based in
memory; the text format and :meth:`CandidateSet.one_based` use the
1-based numbering ``{1, ..., p}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "CandidateSet",
    "ShrinkageProfile",
    "CapacityError",
    "MAX_ALL_SUBSETS_P",
    "build_all_nested",
    "build_group_blocks",
    "group_block_boundaries",
    "build_univariate",
    "enumerate_all_subsets",
    "custom_set",
    "shrinkage_profile",
    "write_candidates",
    "read_candidates",
]

KINDS = ("all_nested", "group_blocks", "univariate", "all_subsets", "custom")
MAX_ALL_SUBSETS_P = 20


class CapacityError(ValueError):
    """Raised when an enumeration would exceed a fixed size guard."""


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Ordered collection of index sets over ``{0, ..., p-1}``."""

    models: tuple
    p: int
    kind: str = "custom"

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be positive")
        if self.kind not in KINDS:
            raise ValueError(f"unknown candidate kind {self.kind!r}")
        clean = []
        for m, idx in enumerate(self.models):
            arr = np.asarray(idx, dtype=np.int64).ravel()
            if arr.size and (arr.min() < 0 or arr.max() >= self.p):
                raise ValueError(f"model {m} has an index outside [1, {self.p}]")
            if np.unique(arr).size != arr.size:
                raise ValueError(f"model {m} repeats an index")
            clean.append(tuple(int(i) for i in np.sort(arr)))
        if not clean:
            raise ValueError("a candidate set needs at least one model")
        object.__setattr__(self, "models", tuple(clean))

    def __len__(self):
        return len(self.models)

    def __iter__(self):
        return iter(self.models)

    def __getitem__(self, m):
        return self.models[m]

    def __repr__(self):
        return f"CandidateSet(kind={self.kind!r}, p={self.p}, M={len(self)})"

    @cached_property
    def membership(self) -> np.ndarray:
        """Boolean matrix ``A[m, j] = (j in I_m)``, shape (M, p)."""
        A = np.zeros((len(self.models), self.p), dtype=bool)
        for m, idx in enumerate(self.models):
            A[m, list(idx)] = True
        A.setflags(write=False)
        return A

    @cached_property
    def sizes(self) -> np.ndarray:
        """Model dimensions ``k_m``."""
        return self.membership.sum(axis=1)

    @cached_property
    def nested_sizes(self) -> Optional[np.ndarray]:
        """
        Sizes ``k_1 < ... < k_M`` when every model is a prefix ``{1..k_m}``
        in increasing order, otherwise None.
        """
        k = self.sizes
        if np.any(np.diff(k) <= 0) or k[0] < 1:
            return None
        for idx, km in zip(self.models, k):
            if idx != tuple(range(km)):
                return None
        return k.copy()

    def one_based(self) -> list:
        return [[i + 1 for i in idx] for idx in self.models]


@dataclass(frozen=True)
class ShrinkageProfile:
    """Per-coordinate multipliers ``gamma_j`` applied to ``theta_tilde_j``."""

    gamma: np.ndarray

    def __post_init__(self):
        g = np.array(self.gamma, dtype=np.float64)
        if g.ndim != 1:
            raise ValueError("gamma must be a vector")
        if np.any(g < -1e-12) or np.any(g > 1 + 1e-12):
            raise ValueError("shrinkage factors must lie in [0, 1]")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)


def build_all_nested(p: int) -> CandidateSet:
    """``{1}, {1,2}, ..., {1..p}``."""
    if p < 1:
        raise ValueError("p must be positive")
    return CandidateSet(tuple(tuple(range(k)) for k in range(1, p + 1)), p, "all_nested")


def group_block_boundaries(p: int) -> list:
    """
    Boundaries ``j_1 < j_2 < ... < j_T = p`` of the weakly geometric blocks.

    ``rho = 1/log p``, ``j_1 = ceil(log p)`` and each later block adds
    ``floor(j_1 (1+rho)^(t-1))`` indices. ``T`` is the first block count whose
    cumulative size reaches ``p``; that last boundary is set to ``p``.
    """
    if p < 2:
        raise ValueError("group blocks need p >= 2 (1/log p is undefined for p = 1)")
    logp = math.log(p)
    rho = 1.0 / logp
    j1 = math.ceil(logp)
    bounds = [min(j1, p)]
    t = 2
    while bounds[-1] < p:
        step = math.floor(j1 * (1.0 + rho) ** (t - 1))
        bounds.append(min(bounds[-1] + step, p))
        t += 1
    return bounds


def build_group_blocks(p: int) -> CandidateSet:
    """Nested models ``{1..j_t}`` over the weakly geometric boundaries."""
    bounds = group_block_boundaries(p)
    return CandidateSet(tuple(tuple(range(j)) for j in bounds), p, "group_blocks")


def build_univariate(p: int) -> CandidateSet:
    """``{1}, {2}, ..., {p}``."""
    if p < 1:
        raise ValueError("p must be positive")
    return CandidateSet(tuple((j,) for j in range(p)), p, "univariate")


def enumerate_all_subsets(p: int, include_empty: bool = False) -> CandidateSet:
    """
    Every subset of ``{1..p}`` in bitmask order (bit j-1 set means j in I).

    The empty model is left out unless ``include_empty``. Without it every
    simplex combination has ``sum_j gamma_j >= 1``, so the per-coordinate
    optimal profile is reachable only when the empty model is included.
    """
    if p < 1:
        raise ValueError("p must be positive")
    if p > MAX_ALL_SUBSETS_P:
        raise CapacityError(f"all-subset enumeration refuses p={p} > {MAX_ALL_SUBSETS_P} (2^p models)")
    start = 0 if include_empty else 1
    models = tuple(
        tuple(j for j in range(p) if mask >> j & 1) for mask in range(start, 1 << p)
    )
    return CandidateSet(models, p, "all_subsets")


def custom_set(models_one_based: Sequence[Sequence[int]], p: int) -> CandidateSet:
    """Candidate set from 1-based index lists."""
    return CandidateSet(tuple(tuple(i - 1 for i in m) for m in models_one_based), p, "custom")


def shrinkage_profile(cset: CandidateSet, w) -> ShrinkageProfile:
    """``gamma_j = sum of w_m over models containing j``."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (len(cset),):
        raise ValueError(f"expected {len(cset)} weights, got shape {w.shape}")
    if np.any(w < -1e-12):
        raise ValueError("weights must be non-negative")
    gamma = cset.membership.T.astype(np.float64) @ np.clip(w, 0.0, None)
    # absorb summation round-off above 1; larger excess is a caller error
    gamma[(gamma > 1.0) & (gamma <= 1.0 + 1e-12)] = 1.0
    return ShrinkageProfile(gamma)


def write_candidates(cset: CandidateSet, path) -> None:
    """One line per model, comma-separated 1-based indices (empty line = empty model)."""
    with open(path, "w") as fh:
        fh.write(f"# kind={cset.kind} p={cset.p}\n")
        for idx in cset.one_based():
            fh.write(",".join(str(i) for i in idx) + "\n")


def read_candidates(path, p: Optional[int] = None) -> CandidateSet:
    kind, models = "custom", []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    if key == "kind":
                        kind = val
                    elif key == "p" and p is None:
                        p = int(val)
                continue
            try:
                models.append([int(t) for t in line.split(",")] if line.strip() else [])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected comma-separated integers") from None
    if p is None:
        p = max((max(m) for m in models if m), default=1)
    return CandidateSet(tuple(tuple(i - 1 for i in m) for m in models), p, kind)

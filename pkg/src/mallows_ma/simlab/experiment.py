"""
Monte Carlo experiments comparing averaging and thresholding fits against
oracle risks.

Scenarios
---------
nested
    Canonical basis with ``p = n``, coefficients in decreasing order;
    losses are divided by the optimal risk over all nested models.
all_subset
    Canonical basis with fixed (or ``floor(sqrt n)``) ``p``, coefficients
    permuted every replication; losses are divided by ``1/n`` plus the
    optimal all-subset risk (the ratio without ``1/n`` is reported too).
pcr
    Principal-component basis of a correlated Gaussian design; the table
    reports plain mean losses (denominator 1), including lasso and ridge
    fitted on the design itself.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..baselines import lasso_cv_fit, ridge_cv_fit
from ..candidates import build_all_nested, build_group_blocks
from ..estimators import PenaltySpec, adap_fit, hard_threshold_fit, mma_fit, soft_threshold_fit
from ..risk import loss_of_fit, minimax_ratio_denominator, optimal_all_subset_risk, optimal_ma_risk
from ..spectral import MeanSpec, basis_from_svd, canonical_basis
from .dgp import CoefficientSpec, NoiseSpec, ar1_design, calibrate_sigma2, gen_coefficients, gen_noise
from .rng import coefficient_rng, design_rng, replication_rng

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "FieldError",
    "ResultRow",
    "run_experiment",
    "summarize",
    "write_result_csv",
    "read_result_csv",
    "RESULT_COLUMNS",
    "SCENARIO_METHODS",
]

log = logging.getLogger(__name__)

SCENARIO_METHODS = {
    "nested": ("mma_group", "mma_nested", "adap", "soft", "hard"),
    "all_subset": ("adap", "soft", "hard", "mma_group"),
    "pcr": ("mma_group", "adap", "soft", "hard", "lasso", "ridge"),
}

RESULT_COLUMNS = (
    "scenario", "method", "n", "p", "reps", "mean_loss",
    "denominator", "risk_ratio", "mc_se", "risk_ratio_no_offset",
)


class FieldError(ValueError):
    """Invalid configuration value; ``field`` names the config attribute."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(message)


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One experiment: a scenario swept over sample sizes.

    ``p_rule`` is ``"n"`` (p = n), ``"sqrt"`` (p = floor(sqrt n)) or
    ``"fixed"`` (every value in ``p_values``). It is ignored for ``pcr``,
    where p is the rank of the ``n x design_d`` design. Exactly one of
    ``snr`` and ``sigma2`` sets the noise level.
    """

    scenario: str
    n_values: tuple
    methods: tuple
    replications: int = 100
    master_seed: int = 0
    p_rule: str = "n"
    p_values: tuple = ()
    decay: str = "polynomial"
    alpha: float = 1.0
    order: str = "ordered"
    scale: float = 1.0
    noise: str = "gaussian"
    snr: Optional[float] = 5.0
    sigma2: Optional[float] = None
    design_d: int = 400
    design_rho: float = 0.5
    cv_folds: int = 5

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(v) for v in self.n_values))
        object.__setattr__(self, "p_values", tuple(int(v) for v in self.p_values))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.scenario not in SCENARIO_METHODS:
            raise FieldError("scenario", f"unknown scenario {self.scenario!r}; expected one of {tuple(SCENARIO_METHODS)}")
        if not self.n_values or min(self.n_values) < 4:
            raise FieldError("n_values", "need at least one n and every n must be at least 4")
        if self.replications < 1:
            raise FieldError("replications", "replications must be at least 1")
        if not self.methods:
            raise FieldError("methods", "need at least one method")
        allowed = SCENARIO_METHODS[self.scenario]
        for m in self.methods:
            if m not in allowed:
                raise FieldError("methods", f"method {m!r} is not available in scenario {self.scenario!r}; choose from {allowed}")
        if len(set(self.methods)) != len(self.methods):
            raise FieldError("methods", "methods repeat")
        if self.p_rule not in ("n", "sqrt", "fixed"):
            raise FieldError("p_rule", f"p rule must be 'n', 'sqrt' or 'fixed', got {self.p_rule!r}")
        if self.p_rule == "fixed":
            if not self.p_values:
                raise FieldError("p_values", "fixed p rule needs p values")
            if self.scenario != "pcr" and not all(1 <= p <= n for n in self.n_values for p in self.p_values):
                raise FieldError("p_values", "every p must lie in [1, n]")
        if (self.snr is None) == (self.sigma2 is None):
            raise FieldError("snr", "set exactly one of snr and sigma2")
        if self.snr is not None and not self.snr > 0:
            raise FieldError("snr", "snr must be positive")
        if self.sigma2 is not None and not self.sigma2 >= 0:
            raise FieldError("sigma2", "sigma2 must be non-negative")
        if self.decay == "hardest_cube" and self.sigma2 is None:
            raise FieldError("decay", "hardest_cube coefficients need an explicit sigma2")
        if self.master_seed < 0:
            raise FieldError("master_seed", "seed must be non-negative")
        try:
            CoefficientSpec(self.decay, 2, self.alpha, self.order, self.scale)
        except ValueError as exc:
            name = "order" if "order" in str(exc) else "alpha" if "alpha" in str(exc) else "decay"
            raise FieldError(name, str(exc)) from None
        try:
            NoiseSpec(self.noise, 1.0)
        except ValueError as exc:
            raise FieldError("noise", str(exc)) from None
        if self.scenario == "pcr":
            if self.design_d < 1:
                raise FieldError("design_d", "design width must be positive")
            if not -1 < self.design_rho < 1:
                raise FieldError("design_rho", "rho must lie in (-1, 1)")
            if not 2 <= self.cv_folds <= min(self.n_values):
                raise FieldError("cv_folds", "need 2 <= folds <= n")

    def cells(self) -> list:
        """``(n, p)`` pairs in run order (p is provisional for pcr)."""
        out = []
        for n in self.n_values:
            if self.scenario == "pcr":
                out.append((n, min(n, self.design_d)))
            elif self.p_rule == "n":
                out.append((n, n))
            elif self.p_rule == "sqrt":
                out.append((n, math.isqrt(n)))
            else:
                out.extend((n, p) for p in self.p_values)
        return out

    def at_full_scale(self) -> "ExperimentConfig":
        """1000 replications at the large sizes (nested n up to 12800, pcr n=500, d=1000)."""
        if self.scenario == "nested":
            return replace(self, replications=1000, n_values=tuple(100 * 2 ** k for k in range(8)))
        if self.scenario == "pcr":
            return replace(self, replications=1000, n_values=(500,), design_d=1000)
        return replace(self, replications=1000)


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    method: str
    n: int
    p: int
    reps: int
    mean_loss: float
    denominator: float
    risk_ratio: float
    mc_se: float
    risk_ratio_no_offset: float

    def key(self):
        return (self.scenario, self.method, self.n, self.p)


@dataclass(frozen=True)
class ExperimentResult:
    rows: tuple
    metadata: dict = field(default_factory=dict)


def _ratio(num, den):
    return num / den if den > 0 else math.nan


class _Cell:
    """Everything shared by the replications of one ``(n, p)`` cell."""

    def __init__(self, cfg: ExperimentConfig, n: int, p: int):
        self.cfg, self.n = cfg, n
        self.X = None
        if cfg.scenario == "pcr":
            self.X = ar1_design(n, cfg.design_d, cfg.design_rho, design_rng(cfg.master_seed, "pcr", n, cfg.design_d))
            self.basis = basis_from_svd(self.X)
        else:
            self.basis = canonical_basis(n, p)
        self.p = self.basis.p
        self.spec = CoefficientSpec(cfg.decay, self.p, cfg.alpha, cfg.order, cfg.scale)
        self.group = build_group_blocks(self.p) if self.p >= 2 else build_all_nested(self.p)
        self.nested = build_all_nested(self.p) if "mma_nested" in cfg.methods or cfg.scenario == "nested" else None
        self.fixed = None if self.spec.random else self._truth(None)

    def _truth(self, rng):
        cfg = self.cfg
        theta = gen_coefficients(self.spec, rng, cfg.sigma2, self.n)
        sigma2 = cfg.sigma2 if cfg.sigma2 is not None else calibrate_sigma2(theta, cfg.snr)
        mean = MeanSpec(theta, self.basis)
        if cfg.scenario == "nested":
            den = optimal_ma_risk(mean, sigma2, self.nested).risk
            return mean, sigma2, den, den
        if cfg.scenario == "all_subset":
            return mean, sigma2, minimax_ratio_denominator(theta, sigma2, self.n), \
                optimal_all_subset_risk(theta, sigma2, self.n).risk
        return mean, sigma2, 1.0, 1.0

    def _fit(self, method, y, sigma2):
        n, basis = self.n, self.basis
        if method == "mma_group":
            return mma_fit(y, basis, self.group, PenaltySpec.mallows(n), sigma2=sigma2).fitted
        if method == "mma_nested":
            return mma_fit(y, basis, self.nested, PenaltySpec.mallows(n), sigma2=sigma2).fitted
        if method == "adap":
            return adap_fit(y, basis, sigma2).fitted
        if method == "soft":
            return soft_threshold_fit(y, basis, sigma2).fitted
        if method == "hard":
            return hard_threshold_fit(y, basis, sigma2).fitted
        if method == "lasso":
            return self.X @ lasso_cv_fit(self.X, y, folds=self.cfg.cv_folds).coef
        if method == "ridge":
            return self.X @ ridge_cv_fit(self.X, y, folds=self.cfg.cv_folds).coef
        raise ValueError(f"unknown method {method!r}")

    def replicate(self, rep: int):
        cfg = self.cfg
        key = (cfg.master_seed, cfg.scenario, self.n, self.p, rep)
        if self.fixed is None:
            truth = self._truth(coefficient_rng(*key))
        else:
            truth = self.fixed
        mean, sigma2, den, den0 = truth
        mu = mean.mu()
        y = mu + gen_noise(NoiseSpec(cfg.noise, sigma2), self.n, replication_rng(*key))
        losses = [loss_of_fit(self._fit(m, y, sigma2), mu) for m in cfg.methods]
        return losses, den, den0


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """
    Run every ``(n, p, method)`` cell of ``config``.

    Replications are independent tasks keyed only by their indices, so the
    result is bit-identical for any ``threads``.
    """
    if threads < 1:
        raise ValueError("threads must be at least 1")
    rows = []
    refs = {}
    R = config.replications
    for n, p in config.cells():
        cell = _Cell(config, n, p)
        log.info("scenario=%s n=%d p=%d reps=%d", config.scenario, n, cell.p, R)
        if threads == 1:
            out = [cell.replicate(r) for r in range(R)]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                out = list(pool.map(cell.replicate, range(R)))
        losses = np.array([o[0] for o in out])
        den = float(np.mean([o[1] for o in out]))
        den0 = float(np.mean([o[2] for o in out]))
        for k, method in enumerate(config.methods):
            col = losses[:, k]
            mean_loss = float(np.mean(col))
            se = float(np.std(col, ddof=1) / math.sqrt(R)) if R > 1 else math.nan
            rows.append(ResultRow(config.scenario, method, n, cell.p, R, mean_loss, den,
                                  _ratio(mean_loss, den), se, _ratio(mean_loss, den0)))
        if config.scenario == "all_subset" and cell.p > 1:
            refs[cell.p] = 2.0 * math.log(cell.p)
    meta = {"scenario": config.scenario, "master_seed": config.master_seed, "replications": R}
    if refs:
        meta["reference_2logp"] = dict(sorted(refs.items()))
    return ExperimentResult(tuple(rows), meta)


def summarize(result) -> tuple:
    """
    Rows sorted by ``(scenario, method, n, p)`` and the reference curves.

    ``result`` may be an :class:`ExperimentResult` or a sequence of rows.
    Returns ``(rows, references)`` where ``references`` maps ``p`` to
    ``2 log p`` for every all-subset row.
    """
    rows = tuple(getattr(result, "rows", result))
    ordered = tuple(sorted(rows, key=ResultRow.key))
    refs = {r.p: 2.0 * math.log(r.p) for r in ordered if r.scenario == "all_subset" and r.p > 1}
    return ordered, dict(sorted(refs.items()))


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_result_csv(result, path) -> None:
    """Rows in stable order with every float written in round-trip form."""
    rows, _ = summarize(result)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in RESULT_COLUMNS])


def read_result_csv(path) -> tuple:
    """
    Parse a result CSV. The ``risk_ratio_no_offset`` column is optional;
    any other unknown or missing column raises ValueError.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file, expected a header")
        unknown = [h for h in header if h not in RESULT_COLUMNS]
        missing = [c for c in RESULT_COLUMNS[:-1] if c not in header]
        if unknown or missing:
            raise ValueError(f"{path}: unknown columns {unknown}, missing columns {missing}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            d = dict(zip(header, rec))
            try:
                rows.append(ResultRow(
                    d["scenario"], d["method"], int(d["n"]), int(d["p"]), int(d["reps"]),
                    float(d["mean_loss"]), float(d["denominator"]), float(d["risk_ratio"]),
                    float(d["mc_se"]), float(d.get("risk_ratio_no_offset", d["risk_ratio"])),
                ))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row ({exc})") from None
    return tuple(rows)

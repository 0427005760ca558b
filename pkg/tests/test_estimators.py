import itertools
import math
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mallows_ma.candidates import build_all_nested, build_group_blocks, custom_set, enumerate_all_subsets
from mallows_ma.estimators import (
    PenaltySpec,
    adap_criterion,
    adap_fit,
    estimate_sigma2,
    hard_threshold_fit,
    mallows_criterion,
    mma_fit,
    soft_threshold_fit,
    threshold_level,
    write_fit_csv,
    fitted_checksum,
)
from mallows_ma.simplex_qp import projectors_from_subsets
from mallows_ma.spectral import canonical_basis, reconstruct, spectral_transform

from conftest import golden_min, random_basis

def coef_data(theta_tilde):
    n = len(theta_tilde)
    b = canonical_basis(n, n)
    return reconstruct(b, np.asarray(theta_tilde, dtype=float)), b


class TestPenaltySpec:
    def test_named(self):
        assert PenaltySpec.mallows(100).lam == pytest.approx(0.1)
        assert PenaltySpec.adaptive(100, 50).lam == pytest.approx(math.sqrt(2 * math.log(50) / 100))
        assert PenaltySpec.log_n(100).lam == pytest.approx(math.sqrt(math.log(100) / 100))
        assert PenaltySpec.custom(0.3).name == "custom"

    def test_rejects(self):
        with pytest.raises(ValueError):
            PenaltySpec(-0.1)
        with pytest.raises(ValueError):
            PenaltySpec(0.1, "bic")


class TestSigmaEstimate:
    def test_zero_residual(self, rng):
        b = random_basis(rng, 10, 5)
        y = b.columns[:, :3] @ rng.standard_normal(3)
        assert estimate_sigma2(y, b, 3) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_direction(self):
        b = canonical_basis(4, 4)
        assert estimate_sigma2(b.columns[:, 1], b, 1) == pytest.approx(4 / 3)

    def test_rejects_full_dimension(self, rng):
        b = random_basis(rng, 5, 5)
        with pytest.raises(ValueError):
            estimate_sigma2(rng.standard_normal(5), b, 5)

    def test_unbiased(self, rng):
        n, k, sigma2, reps = 30, 4, 2.0, 10_000
        b = random_basis(rng, n, k)
        mu = b.columns @ rng.standard_normal(k)
        est = np.array([estimate_sigma2(mu + math.sqrt(sigma2) * rng.standard_normal(n), b, k) for _ in range(reps)])
        assert abs(est.mean() - sigma2) <= 3 * est.std(ddof=1) / math.sqrt(reps)


class TestThresholdRules:
    def test_worked_values(self):
        y, b = coef_data([0.2, -0.2, 0.05])
        kw = dict(sigma2=0.01, lam=1.0)  # lam * sigma = 0.1
        a = adap_fit(y, b, **kw)
        np.testing.assert_allclose(a.weights.w, [0.75, 0.75, 0.0])
        np.testing.assert_allclose(a.coef, [0.15, -0.15, 0.0])
        np.testing.assert_allclose(soft_threshold_fit(y, b, **kw).coef, [0.1, -0.1, 0.0])
        np.testing.assert_allclose(hard_threshold_fit(y, b, **kw).coef, [0.2, -0.2, 0.0])

    def test_boundary_is_zero(self):
        y, b = coef_data([0.5, -0.5])
        for fit in (adap_fit, soft_threshold_fit, hard_threshold_fit):
            assert np.all(fit(y, b, sigma2=0.25, lam=1.0).coef == 0.0)

    def test_zero_coefficient_with_noise(self):
        y, b = coef_data([0.0, 1.0])
        assert adap_fit(y, b, sigma2=0.1, lam=0.5).weights.w[0] == 0.0

    def test_noiseless_keeps_everything(self, rng):
        b = random_basis(rng, 8, 8)
        y = rng.standard_normal(8)
        np.testing.assert_allclose(adap_fit(y, b, 0.0).fitted, y, atol=1e-12)

    def test_default_threshold(self, rng):
        b = random_basis(rng, 100, 50)
        assert threshold_level(b, 4.0) == pytest.approx(2 * math.sqrt(2 * math.log(50) / 100))

    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=20), st.floats(0, 4), st.floats(0.01, 2))
    def test_ordering(self, th, sigma2, lam):
        y, b = coef_data(th)
        s = np.abs(soft_threshold_fit(y, b, sigma2, lam).coef)
        a = np.abs(adap_fit(y, b, sigma2, lam).coef)
        h = np.abs(hard_threshold_fit(y, b, sigma2, lam).coef)
        assert np.all(s <= a + 1e-15) and np.all(a <= h + 1e-15)

    def test_adap_matches_golden_section(self, rng):
        for _ in range(34):
            th = rng.standard_normal(3) * rng.uniform(0.01, 1)
            sigma2, lam = rng.uniform(0.01, 1), rng.uniform(0.05, 1)
            y, b = coef_data(th)
            w = adap_fit(y, b, sigma2, lam).weights.w
            pen = 2 * Decimal(lam) ** 2 * Decimal(sigma2)
            for j in range(3):
                t2 = Decimal(th[j]) ** 2
                ref = golden_min(lambda v: (1 - v) ** 2 * t2 + pen * v)
                assert w[j] == pytest.approx(ref, abs=1e-8)

    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6))
    def test_adap_beats_hypercube_grid(self, seed, p):
        rng = np.random.default_rng(seed)
        n = 3 * p + 2
        b = random_basis(rng, n, p)
        y = b.columns @ rng.standard_normal(p) * rng.uniform(0, 0.5) + rng.standard_normal(n)
        sigma2 = 1.0
        best = adap_criterion(y, b, adap_fit(y, b, sigma2).weights, sigma2)
        th = spectral_transform(b, y).theta_tilde
        lam = PenaltySpec.adaptive(n, p).lam if p > 1 else 0.0
        ticks = np.linspace(0, 1, 21)
        if p <= 3:
            W = np.array(list(itertools.product(ticks, repeat=p)))
        else:
            W = ticks[rng.integers(0, 21, size=(3000, p))]
        fits = (W * th) @ b.columns.T
        crit = ((y - fits) ** 2).sum(axis=1) / n + 2 * lam ** 2 * sigma2 * W.sum(axis=1)
        assert best <= crit.min() + 1e-12

    @given(st.integers(0, 2 ** 32 - 1))
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        b = random_basis(rng, 12, 6)
        y = rng.standard_normal(12)
        order = rng.permutation(6)
        bp = b.permuted(order)
        for fit in (adap_fit, soft_threshold_fit, hard_threshold_fit):
            f1, f2 = fit(y, b, 0.5), fit(y, bp, 0.5)
            np.testing.assert_allclose(f1.fitted, f2.fitted, rtol=0, atol=1e-12)
            np.testing.assert_allclose(f1.coef[order], f2.coef, rtol=1e-13, atol=1e-15)


class TestMMA:
    def test_single_candidate_projection(self, rng):
        b = random_basis(rng, 10, 4)
        y = rng.standard_normal(10)
        fit = mma_fit(y, b, custom_set([[1, 2, 3, 4]], 4), PenaltySpec.mallows(10), sigma2=1.0)
        Psi = b.columns
        np.testing.assert_allclose(fit.fitted, Psi @ np.linalg.lstsq(Psi, y, rcond=None)[0], atol=1e-12)

    def test_noiseless_unpenalized(self, rng):
        b = random_basis(rng, 10, 4)
        y = 2.0 * b.columns[:, 0]
        fit = mma_fit(y, b, build_all_nested(4), PenaltySpec.custom(0.0), sigma2=0.0)
        np.testing.assert_allclose(fit.fitted, y, atol=1e-12)
        assert fit.criterion == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_grid_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = 30
        b = random_basis(rng, n, 4)
        y = b.columns @ np.array([1.0, 0.5, 0.2, 0.05]) + rng.standard_normal(n)
        cs = build_all_nested(4)
        lam = PenaltySpec.mallows(n)
        fit = mma_fit(y, b, cs, lam, sigma2=1.0, solver="qp")
        crit = mallows_criterion(y, b, cs, fit.weights, lam.lam, 1.0)
        assert crit == pytest.approx(fit.criterion, abs=1e-10)
        ticks = range(21)
        for c in itertools.product(ticks, repeat=3):
            if sum(c) <= 20:
                w = np.array([*c, 20 - sum(c)]) / 20
                assert crit <= mallows_criterion(y, b, cs, w, lam.lam, 1.0) + 1e-8

    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 12))
    def test_nested_fast_path_matches_qp(self, seed, p):
        rng = np.random.default_rng(seed)
        n = 3 * p + 3
        b = random_basis(rng, n, p)
        y = b.columns @ (rng.standard_normal(p) / np.arange(1, p + 1)) + rng.standard_normal(n)
        for cs in (build_all_nested(p),) + ((build_group_blocks(p),) if p > 1 else ()):
            pen = PenaltySpec.mallows(n)
            fast = mma_fit(y, b, cs, pen, sigma2=1.0)
            slow = mma_fit(y, b, cs, pen, sigma2=1.0, solver="qp", tol=1e-13)
            assert fast.criterion <= slow.criterion + 1e-10
            assert fast.criterion == pytest.approx(mallows_criterion(y, b, cs, fast.weights, pen.lam, 1.0), abs=1e-10)

    def test_vertex_bound(self, rng):
        b = random_basis(rng, 20, 3)
        y = rng.standard_normal(20)
        cs = enumerate_all_subsets(3)
        fit = mma_fit(y, b, cs, PenaltySpec.mallows(20), sigma2="estimate")
        for m in range(len(cs)):
            v = np.eye(len(cs))[m]
            assert fit.criterion <= mallows_criterion(y, b, cs, v, fit.penalty_lambda, fit.sigma2_used) + 1e-10

    def test_projector_path_agrees(self, rng):
        b = random_basis(rng, 15, 4)
        y = rng.standard_normal(15)
        cs = enumerate_all_subsets(2)
        b2 = random_basis(rng, 15, 2)
        f1 = mma_fit(y, b2, cs, PenaltySpec.mallows(15), sigma2=0.5, solver="qp")
        f2 = mma_fit(y, None, projectors_from_subsets(b2, cs), PenaltySpec.mallows(15), sigma2=0.5)
        np.testing.assert_allclose(f1.fitted, f2.fitted, atol=1e-7)

    def test_projector_rejects_estimate(self, rng):
        b = random_basis(rng, 6, 2)
        with pytest.raises(ValueError):
            mma_fit(rng.standard_normal(6), None, projectors_from_subsets(b, build_all_nested(2)),
                    PenaltySpec.mallows(6))

    def test_deterministic(self, rng):
        b = random_basis(rng, 20, 5)
        y = rng.standard_normal(20)
        cs = enumerate_all_subsets(3)
        b3 = random_basis(rng, 20, 3)
        a = mma_fit(y, b3, cs, PenaltySpec.mallows(20), sigma2=1.0)
        c = mma_fit(y, b3, cs, PenaltySpec.mallows(20), sigma2=1.0)
        assert fitted_checksum(a.fitted) == fitted_checksum(c.fitted)


def test_fit_csv(rng, tmp_path):
    y, b = coef_data([0.2, -0.2, 0.05])
    fit = adap_fit(y, b, sigma2=0.01, lam=1.0)
    write_fit_csv(fit, tmp_path / "fit.csv")
    rows = [line.split(",") for line in (tmp_path / "fit.csv").read_text().splitlines()]
    assert rows[0] == ["field", "index", "value"]
    assert rows[1] == ["method", "", "adap"]
    assert rows[4] == ["fitted_sha256", "", fitted_checksum(fit.fitted)]
    assert [float(r[2]) for r in rows if r[0] == "weight"] == [0.75, 0.75, 0.0]
    assert [float(r[2]) for r in rows if r[0] == "coef"] == list(fit.coef)

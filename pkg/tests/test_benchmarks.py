import numpy as np
import pytest

import polysens as ps
from polysens.benchmarks import field_toy, g_function, ishigami, span_polynomial
from polysens.distributions import porous_flow_space
from polysens.gsa import (amrpc_sobol, analyze, mc_sobol_oracle,
                          variance_from_coeffs)
from polysens.qmc import qmc_design
from polysens.surrogate import fit, predict_batch


class TestGFunction:
    def test_zero_at_center_when_a_zero(self):
        gm = g_function([0.0, 3.0])
        assert gm(np.array([[0.5, 0.5]]))[0] == 0.0

    def test_symmetric_coefficients(self):
        gm = g_function([0.0, 0.0])
        assert gm.sobol_truth([1]) == pytest.approx(gm.sobol_truth([2]), rel=1e-12)

    def test_large_coefficient_suppresses(self):
        gm = g_function([0.0, 99.0])
        D1, D2 = gm.meta["D"]
        assert D1 == pytest.approx(1.0 / 3.0, rel=1e-9)
        assert D2 == pytest.approx((1.0 / 3.0) / 100.0 ** 2, rel=1e-6)
        assert gm.sobol_truth([2]) < 1e-4

    def test_quadrature_matches_formula(self):
        a = [0.0, 1.0, 4.5, 9.0]
        gm = g_function(a)
        for ai, Di in zip(a, gm.meta["D"]):
            assert Di == pytest.approx((1.0 / 3.0) / (1.0 + ai) ** 2, rel=1e-9)

    def test_negative_a_rejected(self):
        with pytest.raises(ValueError):
            g_function([-0.5])

    def test_oracle_within_ci(self, g3):
        res = mc_sobol_oracle(g3, g3.space, n=200_000, seed=8, n_boot=100)
        for i in (1, 2, 3):
            band = max(0.01, 3 * res.total_std[i - 1, 0])
            assert abs(res.total[i - 1, 0] - g3.total_truth(i)) < band


class TestIshigami:
    def test_zero_at_origin(self):
        im = ishigami()
        assert im(np.zeros((1, 3)))[0] == 0.0

    def test_variance_decomposition_sums(self):
        im = ishigami()
        assert sum(im.decomposition.values()) == pytest.approx(
            im.total_variance, rel=1e-12)

    def test_third_dim_first_order_zero(self):
        im = ishigami()
        assert im.sobol_truth([3]) == 0.0
        assert im.total_truth(3) == pytest.approx(im.sobol_truth([1, 3]),
                                                  rel=1e-12)

    def test_oracle_matches_quadrature_decomposition(self):
        im = ishigami()
        res = mc_sobol_oracle(im, im.space, n=200_000, seed=2, n_boot=100)
        assert abs(res.first_order[1, 0] - im.sobol_truth([2])) < 0.01
        # first-order effect of z3 vanishes: interaction-only parameter
        assert abs(res.first_order[2, 0]) < max(0.01, 3 * res.first_order_std[2, 0])

    def test_variance_against_mc(self):
        im = ishigami()
        from polysens.qmc import mc_points
        pts = im.space.quantile(mc_points(3, 200_000, 5))
        assert im(pts).var() == pytest.approx(im.total_variance, rel=0.02)


class TestSpanPolynomial:
    def test_two_term_variance_and_indices(self, unit_space_2d):
        design = qmc_design(unit_space_2d, 512)
        terms = {(1, 0): 3.0, (0, 1): 4.0}
        sm = span_polynomial(unit_space_2d, design, terms, level=0, order=2)
        model = fit(sm.training_set(design), level=0, order=2)
        assert variance_from_coeffs(model)[0] == pytest.approx(25.0, rel=1e-10)
        assert ps.pce_sobol(model, [1])[0] == pytest.approx(9.0 / 25.0, abs=1e-10)
        assert ps.pce_sobol(model, [2])[0] == pytest.approx(16.0 / 25.0, abs=1e-10)

    def test_fit_recovers_terms(self, unit_space_2d):
        design = qmc_design(unit_space_2d, 1024)
        terms = {(2, 0): 1.5, (1, 1): -0.5, (0, 0): 2.0}
        sm = span_polynomial(unit_space_2d, design, terms, level=0, order=2)
        model = fit(sm.training_set(design), level=0, order=2)
        resid = predict_batch(model, design.values)[:, 0] - sm(design.values)
        assert np.sqrt(np.mean(resid ** 2)) <= 1e-8
        assert np.max(np.abs(model.coeffs - sm.meta["coeffs"])) < 1e-8

    def test_term_outside_truncation_rejected(self, unit_space_2d):
        design = qmc_design(unit_space_2d, 256)
        with pytest.raises(KeyError):
            span_polynomial(unit_space_2d, design, {(3, 0): 1.0},
                            level=0, order=2)

    def test_level_one_terms(self, unit_space_2d):
        design = qmc_design(unit_space_2d, 512)
        terms = {((0, 1), (1, 0)): 2.0, ((1, 1), (0, 0)): 1.0}
        sm = span_polynomial(unit_space_2d, design, terms, level=1, order=1)
        model = fit(sm.training_set(design), level=1, order=1)
        assert np.max(np.abs(model.coeffs - sm.meta["coeffs"])) < 1e-8


class TestFieldToy:
    def test_cell_count(self):
        fm = field_toy(porous_flow_space(), grid=(6, 9))
        assert fm.P == 54
        out = fm(np.stack([porous_flow_space().quantile(
            np.full((1, 5), 0.3))[0]]))
        assert out.shape == (1, 54)

    def test_dead_band_has_zero_variance(self):
        space = porous_flow_space()
        fm = field_toy(space, grid=(10, 12))
        design = qmc_design(space, 256)
        Y = fm(design.values)
        dead = fm.meta["dead_cells"]
        assert len(dead) > 0
        assert np.all(Y[:, dead].std(axis=0) == 0.0)
        alive = np.setdiff1d(np.arange(fm.P), dead)
        assert np.all(Y[:, alive].std(axis=0) ** 2 > 1e-6)

    def test_dead_cells_excluded_from_averages(self):
        space = porous_flow_space()
        fm = field_toy(space, grid=(8, 8))
        design = qmc_design(space, 2048)
        model = fit(fm.training_set(design, grid=(8, 8)), level=0, order=2)
        rep = analyze(model)
        excluded = np.where(~rep.retained)[0]
        assert sorted(excluded.tolist()) == sorted(fm.meta["dead_cells"])

    def test_total_index_monotone_along_axis(self):
        space = porous_flow_space()
        fm = field_toy(space, grid=(10, 16))
        probes = np.arange(16)  # first grid row, varying the blend axis

        def probe_eval(X):
            return fm(X)[:, probes]

        res = mc_sobol_oracle(probe_eval, space, n=8192, seed=6, n_boot=20)
        st1 = res.total[0]  # first parameter across the 16 probe cells
        assert st1[0] > 0.95 and st1[-1] < 0.05
        assert np.all(np.diff(st1) < 0.03)  # decreasing up to oracle noise

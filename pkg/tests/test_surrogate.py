import numpy as np
import pytest

from polysens.distributions import ParameterSpace, Uniform
from polysens.multires import (build_piecewise_basis, decompose, degree_set,
                               locate_batch, subdomain_indices)
from polysens.polybasis import build_basis, eval_basis, raw_moments
from polysens.qmc import map_design, mc_points, sobol_points
from polysens.surrogate import (DataError, FitError, SurrogateModel,
                                TrainingSet, assemble_design, fit, predict,
                                predict_batch)


def unit_space(M):
    return ParameterSpace(dims=tuple(
        (f"x{j}", Uniform(0.0, 1.0)) for j in range(M)))


def qmc_unit_design(n, M, skip=1):
    return map_design(sobol_points(M, n, skip), unit_space(M))


class TestTrainingSet:
    def test_row_mismatch(self):
        d = qmc_unit_design(8, 2)
        with pytest.raises(DataError, match="8"):
            TrainingSet(design=d, outputs=np.zeros((5, 3)))

    def test_nan_rows_reported(self):
        d = qmc_unit_design(8, 2)
        Y = np.zeros((8, 2))
        Y[3, 1] = np.nan
        Y[6, 0] = np.inf
        with pytest.raises(DataError, match=r"\[3, 6\]"):
            TrainingSet(design=d, outputs=Y)

    def test_grid_consistency(self):
        d = qmc_unit_design(8, 2)
        with pytest.raises(DataError):
            TrainingSet(design=d, outputs=np.zeros((8, 5)), grid=(2, 3))


class TestAssembleDesign:
    def test_level_zero_single_block(self):
        d = qmc_unit_design(64, 3)
        dec = decompose(d, 0)
        pb = build_piecewise_basis(d, dec, 2)
        degrees = degree_set(3, 2, 1.0)
        blocks = assemble_design(pb, degrees, d)
        assert len(blocks) == 1
        rows, A = blocks[0]
        assert A.shape == (64, len(degrees))

    def test_zero_index_column_is_indicator_value(self):
        d = qmc_unit_design(128, 2)
        dec = decompose(d, 1)
        pb = build_piecewise_basis(d, dec, 1)
        degrees = degree_set(2, 1, 1.0)
        blocks = assemble_design(pb, degrees, d)
        for rows, A in blocks:
            assert np.allclose(A[:, 0], 2.0 ** (2 * 1 / 2), rtol=1e-12)

    def test_row_partition(self):
        d = qmc_unit_design(300, 2)
        dec = decompose(d, 2)
        pb = build_piecewise_basis(d, dec, 1)
        blocks = assemble_design(pb, degree_set(2, 1, 1.0), d)
        counts = sorted(len(rows) for rows, _ in blocks)
        assert sum(counts) == 300

    def test_empty_subdomain_error(self):
        # perfectly correlated columns leave off-diagonal subdomains empty
        x = np.linspace(0.01, 0.99, 64)
        d = map_design(np.column_stack([x, x]), unit_space(2))
        dec = decompose(d, 1)
        pb = build_piecewise_basis(d, dec, 1)
        with pytest.raises(FitError, match="no training rows"):
            assemble_design(pb, degree_set(2, 1, 1.0), d)


class TestFit:
    def test_constant_model(self):
        d = qmc_unit_design(256, 2)
        train = TrainingSet(design=d, outputs=np.full((256, 3), 3.0))
        model = fit(train, level=1, order=2)
        pts = mc_points(2, 50, seed=1)
        assert np.allclose(predict_batch(model, pts), 3.0, rtol=0, atol=1e-12)
        from polysens.gsa import variance_from_coeffs
        assert np.all(variance_from_coeffs(model) < 1e-20)

    def test_recovers_basis_product_coefficient(self):
        d = qmc_unit_design(512, 3)
        dec = decompose(d, 0)
        pb = build_piecewise_basis(d, dec, 2)
        v1 = pb.eval_dim(0, 0, d.values[:, 0])[:, 1]
        v2 = pb.eval_dim(1, 0, d.values[:, 1])[:, 1]
        train = TrainingSet(design=d, outputs=(v1 * v2)[:, None])
        model = fit(train, level=0, order=2)
        degrees = [tuple(a) for a in model.degrees.indices]
        target = degrees.index((1, 1, 0))
        c = model.coeffs[0, 0]
        assert c[target] == pytest.approx(1.0, abs=1e-8)
        others = np.delete(c, target)
        assert np.max(np.abs(others)) < 1e-8

    def test_level_zero_matches_plain_pce_fit(self):
        # independent dual path: tensor basis + lstsq, no subdomain code
        d = qmc_unit_design(400, 2)
        Y = np.column_stack([
            np.sin(2 * d.values[:, 0]) + d.values[:, 1] ** 2,
            np.cos(d.values[:, 0] * d.values[:, 1]),
        ])
        model = fit(TrainingSet(design=d, outputs=Y), level=0, order=3)
        bases = [build_basis(raw_moments(d.values[:, j], K=6), 3)
                 for j in range(2)]
        degrees = model.degrees.indices
        A = np.ones((400, len(degrees)))
        for j in range(2):
            V = eval_basis(bases[j], d.values[:, j])
            A *= V[:, degrees[:, j]]
        ref, *_ = np.linalg.lstsq(A, Y, rcond=None)
        assert np.max(np.abs(model.coeffs[:, 0, :].T - ref)) < 1e-12

    def test_linearity(self):
        d = qmc_unit_design(256, 2)
        y1 = np.cos(3 * d.values[:, 0:1])
        y2 = d.values[:, 1:2] ** 3
        m1 = fit(TrainingSet(design=d, outputs=y1), level=1, order=2)
        m2 = fit(TrainingSet(design=d, outputs=y2), level=1, order=2)
        m = fit(TrainingSet(design=d, outputs=2.0 * y1 - 0.5 * y2),
                level=1, order=2)
        combo = 2.0 * m1.coeffs - 0.5 * m2.coeffs
        assert np.max(np.abs(m.coeffs - combo)) < 1e-10

    def test_zero_function(self):
        d = qmc_unit_design(128, 2)
        model = fit(TrainingSet(design=d, outputs=np.zeros((128, 2))),
                    level=1, order=1)
        assert np.all(model.coeffs == 0.0)

    def test_row_permutation_invariance(self):
        d = qmc_unit_design(256, 2)
        Y = np.sin(d.values.sum(axis=1))[:, None]
        rng = np.random.Generator(np.random.Philox(key=2))
        perm = rng.permutation(256)
        dp = map_design(d.values[perm], unit_space(2))
        m1 = fit(TrainingSet(design=d, outputs=Y), level=1, order=2)
        m2 = fit(TrainingSet(design=dp, outputs=Y[perm]), level=1, order=2)
        assert np.max(np.abs(m1.coeffs - m2.coeffs)) < 1e-12

    def test_underdetermined_flagged_not_fatal(self):
        d = qmc_unit_design(40, 2)
        Y = d.values[:, 0:1]
        model = fit(TrainingSet(design=d, outputs=Y), level=2, order=2)
        assert model.diagnostics["underdetermined"]
        assert any("minimum-norm" in w for w in model.diagnostics["warnings"])

    def test_determinism_bitwise(self):
        d = qmc_unit_design(256, 3)
        Y = np.exp(-d.values.sum(axis=1))[:, None]
        m1 = fit(TrainingSet(design=d, outputs=Y), level=1, order=2)
        m2 = fit(TrainingSet(design=d, outputs=Y), level=1, order=2)
        assert m1.coeffs.tobytes() == m2.coeffs.tobytes()

    def test_exact_reproduction_in_span(self):
        d = qmc_unit_design(2048, 2)
        dec = decompose(d, 1)
        pb = build_piecewise_basis(d, dec, 2)
        degrees = degree_set(2, 2, 1.0)
        blocks = assemble_design(pb, degrees, d)
        rng = np.random.Generator(np.random.Philox(key=8))
        c_true = rng.normal(size=(4, len(degrees)))
        Y = np.zeros((2048, 1))
        for sd, (rows, A) in enumerate(blocks):
            Y[rows, 0] = A @ c_true[sd]
        model = fit(TrainingSet(design=d, outputs=Y), level=1, order=2)
        resid = predict_batch(model, d.values) - Y
        assert np.sqrt(np.mean(resid ** 2)) <= 1e-8


class TestPredict:
    def test_single_equals_batch(self):
        d = qmc_unit_design(256, 2)
        Y = np.cos(d.values @ np.array([1.0, 2.0]))[:, None]
        model = fit(TrainingSet(design=d, outputs=Y), level=1, order=2)
        x = np.array([0.3, 0.7])
        assert np.array_equal(predict(model, x), predict_batch(model, x[None, :])[0])

    def test_dual_path_full_expansion(self):
        d = qmc_unit_design(512, 2)
        Y = np.sin(5 * d.values[:, 0:1]) * d.values[:, 1:2]
        model = fit(TrainingSet(design=d, outputs=Y), level=1, order=2)
        pts = mc_points(2, 1000, seed=3)
        fast = predict_batch(model, pts)
        # slow path: explicit sum over all (subdomain, degree) pairs with
        # indicator logic
        dec = model.basis.decomposition
        bins, _ = locate_batch(dec, pts)
        slow = np.zeros_like(fast)
        sd_list = subdomain_indices(model.M, model.level)
        for code, l in enumerate(sd_list):
            inside = np.all(bins == np.asarray(l)[None, :], axis=1)
            if not np.any(inside):
                continue
            sub = pts[inside]
            vals = np.ones((sub.shape[0], len(model.degrees)))
            for j in range(model.M):
                V = model.basis.eval_dim(j, l[j], sub[:, j])
                vals *= V[:, model.degrees.indices[:, j]]
            slow[inside] = vals @ model.coeffs[:, code, :].T
        assert np.max(np.abs(fast - slow)) < 1e-12

    def test_out_of_support_clamped(self):
        d = qmc_unit_design(128, 2)
        Y = d.values[:, 0:1]
        model = fit(TrainingSet(design=d, outputs=Y), level=1, order=1)
        out, clamped = predict_batch(model, np.array([[2.0, 0.5]]),
                                     return_clamped=True)
        assert clamped == 1 and np.all(np.isfinite(out))

    def test_zero_cells(self):
        d = qmc_unit_design(64, 2)
        model = fit(TrainingSet(design=d, outputs=np.zeros((64, 0))),
                    level=0, order=1)
        assert predict(model, [0.5, 0.5]).shape == (0,)

    def test_row_order_preserved(self):
        d = qmc_unit_design(256, 2)
        Y = (d.values[:, 0:1] - d.values[:, 1:2]) ** 2
        model = fit(TrainingSet(design=d, outputs=Y), level=1, order=2)
        pts = mc_points(2, 500, seed=9)
        batch = predict_batch(model, pts)
        # permuting the input rows must permute the output rows exactly
        rng = np.random.Generator(np.random.Philox(key=10))
        perm = rng.permutation(500)
        assert np.array_equal(predict_batch(model, pts[perm]), batch[perm])
        one_by_one = np.vstack([predict(model, p) for p in pts])
        assert np.allclose(batch, one_by_one, rtol=1e-13, atol=1e-15)


class TestThreading:
    def test_thread_count_does_not_change_results(self, monkeypatch):
        d = qmc_unit_design(512, 2)
        Y = np.tanh(d.values @ np.array([2.0, -1.0]))[:, None]
        m1 = fit(TrainingSet(design=d, outputs=Y), level=2, order=1)
        monkeypatch.setenv("POLYSENS_THREADS", "4")
        m2 = fit(TrainingSet(design=d, outputs=Y), level=2, order=1)
        assert m1.coeffs.tobytes() == m2.coeffs.tobytes()

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polysens.distributions import ParameterSpace, Uniform
from polysens.multires import (DecompositionError, build_piecewise_basis,
                               coeff_count, decompose, degree_set,
                               linear_index, locate, locate_batch,
                               subdomain_indices)
from polysens.qmc import DesignMatrix, map_design, mc_points, sobol_points


def design_1d(values, name="x"):
    return DesignMatrix(values=np.asarray(values, float)[:, None],
                        names=(name,), provenance="external")


def uniform_design(n, M, seed=0):
    space = ParameterSpace(dims=tuple(
        (f"x{j}", Uniform(0.0, 1.0)) for j in range(M)))
    return map_design(mc_points(M, n, seed), space, provenance="mc")


class TestDecompose:
    def test_level_zero_single_bin(self):
        d = design_1d([3.0, 1.0, 2.0])
        dec = decompose(d, 0)
        assert dec.n_bins == 1
        assert dec.breakpoints[0, 0] == 1.0 and dec.breakpoints[0, -1] == 3.0

    def test_median_split(self):
        dec = decompose(design_1d([1.0, 2.0, 3.0, 4.0]), 1)
        assert dec.breakpoints[0, 1] == 2.5
        idx, _ = locate_batch(dec, np.array([[1.0], [2.0], [3.0], [4.0]]))
        assert idx[:, 0].tolist() == [0, 0, 1, 1]

    def test_equal_mass_on_divisible_counts(self):
        d = uniform_design(4096, 1)
        dec = decompose(d, 2)
        idx, _ = locate_batch(dec, d.values)
        counts = np.bincount(idx[:, 0], minlength=4)
        assert counts.tolist() == [1024] * 4

    def test_balance_within_one(self):
        d = uniform_design(1001, 3, seed=5)
        dec = decompose(d, 2)
        idx, _ = locate_batch(dec, d.values)
        for j in range(3):
            counts = np.bincount(idx[:, j], minlength=4)
            assert counts.max() - counts.min() <= 1

    def test_breakpoints_cover_samples(self):
        d = uniform_design(777, 2, seed=9)
        dec = decompose(d, 3)
        for j in range(2):
            col = d.values[:, j]
            assert dec.breakpoints[j, 0] <= col.min()
            assert dec.breakpoints[j, -1] >= col.max()
            assert np.all(np.diff(dec.breakpoints[j]) > 0)

    def test_too_few_distinct_values(self):
        with pytest.raises(DecompositionError, match="x"):
            decompose(design_1d([1.0, 1.0, 1.0, 1.0]), 1)

    def test_tie_warning(self):
        vals = [1.0, 2.0, 2.0, 2.0, 2.0, 3.0, 4.0, 5.0]
        dec = decompose(design_1d(vals), 1)
        assert any("uneven" in w for w in dec.warnings)

    def test_negative_level(self):
        with pytest.raises(DecompositionError):
            decompose(design_1d([1.0, 2.0]), -1)


class TestLocate:
    def test_level_zero(self):
        dec = decompose(uniform_design(16, 3), 0)
        assert locate(dec, [0.3, 0.9, -5.0]) == (0, 0, 0)

    def test_breakpoint_goes_up(self):
        dec = decompose(design_1d([1.0, 2.0, 3.0, 4.0]), 1)
        assert locate(dec, [2.5]) == (1,)

    def test_matches_exhaustive_scan(self):
        d = uniform_design(512, 2, seed=1)
        dec = decompose(d, 2)
        pts = mc_points(2, 10_000, seed=2)
        idx, _ = locate_batch(dec, pts)
        edges = dec.breakpoints
        for t in range(0, 10_000, 997):
            x = pts[t]
            for j in range(2):
                brute = 0
                for l in range(dec.n_bins):
                    left, right = edges[j, l], edges[j, l + 1]
                    last = l == dec.n_bins - 1
                    if (x[j] >= left or l == 0) and (x[j] < right or last):
                        brute = l
                        break
                assert idx[t, j] == brute

    def test_clamp_flag(self):
        dec = decompose(design_1d([1.0, 2.0, 3.0, 4.0]), 1)
        _, clamped = locate_batch(dec, np.array([[0.0], [2.0], [9.0]]))
        assert clamped.tolist() == [True, False, True]


class TestDegreeSet:
    def test_total_degree_count(self):
        assert len(degree_set(5, 2, 1.0)) == 21

    def test_hyperbolic_drops_mixed(self):
        full = {tuple(a) for a in degree_set(2, 2, 1.0).indices}
        sparse = {tuple(a) for a in degree_set(2, 2, 0.75).indices}
        assert (1, 1) in full
        # ||(1,1)||_0.75 = 2^(4/3) > 2, so the mixed index must drop out
        assert (1, 1) not in sparse and sparse == full - {(1, 1)}

    def test_order_zero(self):
        ds = degree_set(4, 0, 0.5)
        assert ds.indices.tolist() == [[0, 0, 0, 0]]

    def test_invalid_q(self):
        with pytest.raises(ValueError):
            degree_set(2, 2, 0.0)
        with pytest.raises(ValueError):
            degree_set(2, 2, 1.5)

    @pytest.mark.parametrize("M", [1, 2, 3, 4, 5, 6])
    @pytest.mark.parametrize("order", [0, 1, 2, 3, 4, 5, 6])
    def test_q1_equals_total_degree(self, M, order):
        got = {tuple(a) for a in degree_set(M, order, 1.0).indices}
        brute = set()

        def rec(prefix, remaining):
            if len(prefix) == M:
                brute.add(tuple(prefix))
                return
            for v in range(remaining + 1):
                rec(prefix + [v], remaining - v)

        rec([], order)
        assert got == brute
        assert len(got) == math.comb(order + M, M)

    @given(q1=st.floats(0.3, 1.0), q2=st.floats(0.3, 1.0))
    @settings(max_examples=30, deadline=None)
    def test_monotone_in_q(self, q1, q2):
        lo_q, hi_q = min(q1, q2), max(q1, q2)
        small = {tuple(a) for a in degree_set(3, 4, lo_q).indices}
        big = {tuple(a) for a in degree_set(3, 4, hi_q).indices}
        assert small <= big

    def test_monotone_in_order(self):
        for order in range(5):
            a = {tuple(x) for x in degree_set(3, order, 0.8).indices}
            b = {tuple(x) for x in degree_set(3, order + 1, 0.8).indices}
            assert a <= b

    def test_graded_lex_sorted(self):
        rows = [tuple(a) for a in degree_set(3, 3, 1.0).indices]
        assert rows == sorted(rows, key=lambda a: (sum(a), a))

    def test_norm_bound_never_exceeded(self):
        q = 0.75
        for order in (2, 3, 4):
            for alpha in degree_set(5, order, q).indices:
                assert sum(a ** q for a in alpha) <= order ** q * (1 + 1e-9)


class TestCoeffCount:
    def test_paper_configuration(self):
        assert coeff_count(5, 1, 2) == 672

    def test_single_domain(self):
        assert coeff_count(5, 0, 2) == 21

    def test_trivial(self):
        assert coeff_count(1, 0, 0) == 1

    def test_matches_set_size(self):
        assert coeff_count(3, 2, 4) == (2 ** 6) * len(degree_set(3, 4, 1.0))


class TestSubdomainIndexing:
    def test_linearization_bijective(self):
        sd = subdomain_indices(3, 2)
        codes = [linear_index(l, 2) for l in sd]
        assert codes == list(range(4 ** 3))

    def test_dimension_one_least_significant(self):
        assert linear_index((1, 0, 0), 1) == 1
        assert linear_index((0, 1, 0), 1) == 2
        assert linear_index((0, 0, 1), 1) == 4


class TestPiecewiseBasis:
    def test_level_zero_matches_plain_basis(self):
        from polysens.polybasis import build_basis, eval_basis, raw_moments
        d = uniform_design(256, 1, seed=3)
        dec = decompose(d, 0)
        pb = build_piecewise_basis(d, dec, 2)
        plain = build_basis(raw_moments(d.values[:, 0], K=4), 2)
        xs = np.linspace(0.05, 0.95, 20)
        assert np.allclose(pb.eval_dim(0, 0, xs), eval_basis(plain, xs),
                           rtol=0, atol=1e-13)

    def test_zero_degree_is_normalized_indicator(self):
        d = uniform_design(512, 2, seed=4)
        dec = decompose(d, 1)
        pb = build_piecewise_basis(d, dec, 1)
        x = d.values[7]
        l = locate(dec, x)
        prod = 1.0
        for j in range(2):
            prod *= pb.eval_dim(j, l[j], x[j])[0]
        assert prod == pytest.approx(2.0 ** (2 * 1 / 2), rel=1e-12)

    def test_partition_of_unity(self):
        d = uniform_design(1000, 2, seed=6)
        dec = decompose(d, 2)
        idx, _ = locate_batch(dec, d.values)
        codes = idx[:, 0] + idx[:, 1] * 4
        counts = np.bincount(codes, minlength=16)
        assert counts.sum() == 1000

    def test_global_gram_decays_with_n(self):
        from polysens.multires import degree_set as ds
        from polysens.surrogate import assemble_design
        space = ParameterSpace(dims=(("a", Uniform(0, 1)), ("b", Uniform(0, 1))))
        devs = {}
        for n in (8192, 65536):
            d = map_design(sobol_points(2, n, 1), space)
            dec = decompose(d, 1)
            pb = build_piecewise_basis(d, dec, 2)
            blocks = assemble_design(pb, ds(2, 2, 1.0), d)
            I = np.eye(6)
            devs[n] = max(np.max(np.abs(A.T @ A / n - I)) for _, A in blocks)
        assert devs[8192] < 5e-2
        assert devs[65536] < 5e-3

    def test_error_carries_dim_and_bin(self):
        from polysens.polybasis import BasisConstructionError
        vals = np.concatenate([np.linspace(0, 1, 32),
                               np.full(32, 5.0)])  # upper bin constant
        d = design_1d(vals)
        dec = decompose(d, 1)
        with pytest.raises(BasisConstructionError, match="bin 1"):
            build_piecewise_basis(d, dec, 2)

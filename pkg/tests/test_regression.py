import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dalpce.errors import DimensionMismatch, LeverageOne, RankDeficient
from dalpce.polybasis import Box, design_matrix, total_degree_basis
from dalpce.regression import (MAX_ERROR, lars_path_sets, lars_select, loo_error, ols_fit)


def brute_force_q2(design, y):
    """Oracle: refit N times, each time without one point."""
    n = len(y)
    errs = np.empty(n)
    for i in range(n):
        keep = np.arange(n) != i
        beta, *_ = np.linalg.lstsq(design[keep], y[keep], rcond=None)
        errs[i] = y[i] - design[i] @ beta
    return np.mean(errs ** 2) / np.var(y)


def linear_problem(n=5):
    xi = np.linspace(0.0, 1.0, n)[:, None]
    psi = design_matrix(xi, total_degree_basis(1, 1), Box.unit(1))
    return psi, 2.0 + 3.0 * xi[:, 0]


class TestOls:
    def test_linear_example(self):
        psi, y = linear_problem()
        fit = ols_fit(psi, y)
        np.testing.assert_allclose(fit.coefficients, [3.5, 0.8660254037844386], atol=1e-12)
        # normal-equations oracle
        np.testing.assert_allclose(fit.coefficients, np.linalg.solve(psi.T @ psi, psi.T @ y), rtol=1e-12)
        assert fit.q2 < 1e-10

    def test_zero_response(self):
        psi, _ = linear_problem()
        fit = ols_fit(psi, np.zeros(5))
        np.testing.assert_array_equal(fit.coefficients, 0.0)
        assert fit.q2 == 0.0

    def test_constant_response(self, rng):
        x = rng.random((12, 2))
        psi = design_matrix(x, total_degree_basis(2, 2), Box.unit(2))
        fit = ols_fit(psi, np.full(12, 4.25))
        assert fit.coefficients[0] == pytest.approx(4.25, abs=1e-10)
        np.testing.assert_allclose(fit.coefficients[1:], 0.0, atol=1e-10)

    def test_residual_orthogonal(self, rng):
        psi = rng.standard_normal((30, 6))
        y = rng.standard_normal(30)
        fit = ols_fit(psi, y)
        r = y - psi @ fit.coefficients
        assert np.max(np.abs(psi.T @ r)) <= 1e-8 * np.linalg.norm(psi) * np.linalg.norm(y)

    def test_perturbation_never_improves(self, rng):
        psi = rng.standard_normal((25, 5))
        y = rng.standard_normal(25)
        beta = ols_fit(psi, y).coefficients
        rss = np.sum((y - psi @ beta) ** 2)
        for j in range(5):
            for d in (-1e-3, 1e-3):
                b = beta.copy()
                b[j] += d
                assert np.sum((y - psi @ b) ** 2) >= rss

    def test_rank_deficient(self, rng):
        psi = rng.standard_normal((10, 3))
        psi = np.column_stack([psi, psi[:, 1] + psi[:, 2]])
        with pytest.raises(RankDeficient):
            ols_fit(psi, rng.standard_normal(10))

    @pytest.mark.parametrize("shape_y", [(4,), (6,)])
    def test_dimension_mismatch(self, rng, shape_y):
        with pytest.raises(DimensionMismatch):
            ols_fit(rng.standard_normal((5, 3)) if shape_y == (4,) else rng.standard_normal((6, 7)),
                    rng.standard_normal(shape_y))

    def test_interpolation_gives_max_error(self, rng):
        psi = rng.standard_normal((4, 4))
        fit = ols_fit(psi, rng.standard_normal(4))
        assert fit.q2 == MAX_ERROR


class TestLoo:
    def test_exact_polynomial(self):
        psi, y = linear_problem(9)
        beta = ols_fit(psi, y).coefficients
        q2, h = loo_error(psi, y, beta)
        assert q2 < 1e-10
        assert h.sum() == pytest.approx(2.0, abs=1e-8)

    def test_interpolation_raises(self, rng):
        psi = rng.standard_normal((3, 3))
        y = rng.standard_normal(3)
        with pytest.raises(LeverageOne):
            loo_error(psi, y, np.linalg.solve(psi, y))

    def test_constant_response_sentinel(self):
        psi = np.ones((5, 1))
        assert loo_error(psi, np.full(5, 2.0), [2.0])[0] == 0.0
        assert loo_error(psi, np.full(5, 2.0), [2.5])[0] == MAX_ERROR

    @given(st.integers(0, 2**32 - 1))
    def test_brute_force_equivalence(self, seed):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(1, 11))
        n = int(rng.integers(p + 2, 51))
        psi = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        fit = ols_fit(psi, y)
        assert fit.q2 == pytest.approx(brute_force_q2(psi, y), rel=1e-8)
        assert np.all(fit.h_diag >= -1e-10) and np.all(fit.h_diag <= 1 + 1e-10)
        assert fit.h_diag.sum() == pytest.approx(p, abs=1e-8)


class TestLars:
    def test_sparse_recovery(self, rng):
        x = rng.random((20, 2))
        basis = total_degree_basis(2, 2)
        psi = design_matrix(x, basis, Box.unit(2))
        y = 1.0 + 2.0 * x[:, 0]
        fit = lars_select(psi, y)
        assert [basis.as_tuples()[j] for j in fit.selected] == [(0, 0), (1, 0)]
        assert fit.q2 < 1e-10
        # exhaustive subset-OLS oracle: no subset containing the intercept does better
        best = min(ols_fit(psi[:, [0, *s]], y).q2
                   for k in range(0, 6) for s in itertools.combinations(range(1, 6), k)
                   if k + 1 < 20)
        assert fit.q2 <= best + 1e-12

    def test_constant_response(self, rng):
        psi = design_matrix(rng.random((10, 2)), total_degree_basis(2, 2), Box.unit(2))
        fit = lars_select(psi, np.full(10, 3.0))
        assert fit.selected.tolist() == [0]
        assert fit.q2 == 0.0

    def test_single_term_budget(self, rng):
        psi = design_matrix(rng.random((8, 1)), total_degree_basis(1, 3), Box.unit(1))
        y = rng.standard_normal(8)
        fit = lars_select(psi, y, max_terms=1)
        assert fit.selected.tolist() == [0]
        # normalised LOO error of the mean predictor: residuals scale by N/(N-1)
        expected = np.mean(((y - y.mean()) * 8 / 7) ** 2) / np.var(y)
        assert fit.q2 == pytest.approx(expected, rel=1e-12)

    @given(st.integers(0, 2**32 - 1))
    def test_path_properties(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(8, 40))
        psi = design_matrix(rng.random((n, 2)), total_degree_basis(2, 3), Box.unit(2))
        y = np.sin(5 * psi[:, 1]) + 0.1 * rng.standard_normal(n)
        fit = lars_select(psi, y)
        sets = lars_path_sets(psi, y)
        for a, b in zip(sets, sets[1:]):
            assert set(a) < set(b)
        assert all(s[0] == 0 for s in sets)
        q2s = []
        for s in sets:
            try:
                q2s.append(ols_fit(psi[:, np.sort(s)], y).q2)
            except RankDeficient:
                pass
        assert fit.q2 <= min(q2s) * (1 + 1e-9) + 1e-15
        unselected = np.setdiff1d(np.arange(psi.shape[1]), fit.selected)
        assert np.all(fit.coefficients[unselected] == 0.0)
        assert 0 in fit.selected

    def test_max_terms_bounds(self, rng):
        psi = rng.standard_normal((5, 8))
        y = rng.standard_normal(5)
        with pytest.raises(ValueError):
            lars_select(psi, y, max_terms=5)
        with pytest.raises(ValueError):
            lars_select(psi, y, max_terms=0)

    def test_too_few_points(self):
        with pytest.raises(DimensionMismatch):
            lars_select(np.ones((1, 1)), np.ones(1))

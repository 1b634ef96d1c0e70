import numpy as np
import pytest
from hypothesis import given, strategies as st

from dalpce.domain import Decomposition, global_predict, locate, split
from dalpce.errors import DegenerateEdge, DomainError, MissingPce
from dalpce.polybasis import Box, total_degree_basis
from dalpce.surrogate import LocalPCE, fit_pce


def half_open_members(box, x):
    """Oracle: brute-force half-open membership, closed on the global upper face."""
    upper_ok = (x < box.upper) | ((box.upper == 1.0) & (x <= 1.0))
    return np.all((x >= box.lower) & upper_ok, axis=1)


def random_decomposition(rng, dim, n_splits, pce=None):
    pce = pce or LocalPCE.constant(Box.unit(dim), 0.0)
    dec = Decomposition(dim, pce)
    for _ in range(n_splits):
        sid = int(rng.integers(len(dec)))
        box = dec[sid].box
        decisive = box.lower + rng.random(dim) * box.edges
        try:
            dec.split(sid, int(rng.integers(dim)), decisive, np.zeros((0, dim)))
        except DegenerateEdge:
            pass
    return dec


def refit_all(dec, f, rng, degree=1, n=12):
    for sid, s in enumerate(dec):
        x = s.box.lower + rng.random((n, dec.dim)) * s.box.edges
        dec.set_pce(sid, fit_pce(x, f(x), s.box, degree, method="ols"))


class TestLocate:
    def test_single(self):
        dec = Decomposition(2, LocalPCE.constant(Box.unit(2), 1.0))
        assert locate(dec, [0.3, 0.9]) == 0

    def test_half_open(self):
        dec = Decomposition(2, LocalPCE.constant(Box.unit(2), 1.0))
        _, right = split(dec, 0, 0, [0.2, 0.5], np.zeros((0, 2)))
        assert locate(dec, [0.5, 0.2]) == right
        assert dec[right].box.lower[0] == 0.5

    def test_upper_corner(self, rng):
        dec = random_decomposition(rng, 2, 40)
        sid = locate(dec, [1.0, 1.0])
        np.testing.assert_array_equal(dec[sid].box.upper, [1.0, 1.0])

    def test_outside(self):
        dec = Decomposition(1, LocalPCE.constant(Box.unit(1), 1.0))
        with pytest.raises(DomainError):
            dec.locate([1.5])

    def test_partition_after_many_splits(self, rng):
        dec = random_decomposition(rng, 3, 500)
        assert abs(dec.volumes.sum() - 1.0) < 1e-12
        x = rng.random((10**4, 3))
        x[:50] = np.round(x[:50] * 4) / 4  # points on cut planes
        ids = dec.locate(x)
        hits = np.zeros(len(x), dtype=int)
        for sid, s in enumerate(dec):
            inside = half_open_members(s.box, x)
            hits += inside
            assert np.all(ids[inside] == sid)
        assert np.all(hits == 1)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 4))
    def test_partition_property(self, seed, dim):
        rng = np.random.default_rng(seed)
        dec = random_decomposition(rng, dim, 30)
        assert abs(dec.volumes.sum() - 1.0) < 1e-12
        x = rng.random((200, dim))
        ids = dec.locate(x)
        for i in range(len(x)):
            assert dec[ids[i]].box.contains(x[i])[0]


class TestSplit:
    def test_midpoint_example(self):
        dec = Decomposition(2, LocalPCE.constant(Box.unit(2), 1.0))
        refine, inherit = dec.split(0, 0, [0.2, 0.5], np.zeros((0, 2)))
        assert dec[refine].box == Box([0.0, 0.0], [0.5, 1.0])
        assert dec[inherit].box == Box([0.5, 0.0], [1.0, 1.0])
        assert dec[refine].volume == dec[inherit].volume == 0.5

    def test_decisive_in_upper_half(self):
        dec = Decomposition(1, LocalPCE.constant(Box.unit(1), 1.0))
        refine, inherit = dec.split(0, 0, [0.9], np.zeros((0, 1)))
        assert dec[refine].box.lower[0] == 0.5 and inherit == 0

    def test_members_repartitioned(self, rng):
        pts = rng.random((9, 2))
        pts[0] = [0.5, 0.3]
        dec = Decomposition(2, LocalPCE.constant(Box.unit(2), 1.0), np.arange(9))
        dec.split(0, 0, [0.1, 0.1], pts)
        for sid, s in enumerate(dec):
            np.testing.assert_array_equal(np.sort(s.member_ids),
                                          np.flatnonzero(half_open_members(s.box, pts)))
            np.testing.assert_array_equal(dec.locate(pts[s.member_ids]), sid)

    def test_inheritance_shares_pce(self, rng):
        pce = LocalPCE(Box.unit(2), total_degree_basis(2, 2), rng.standard_normal(6), q2=0.3)
        dec = Decomposition(2, pce)
        a, b = dec.split(0, 1, [0.4, 0.4], np.zeros((0, 2)))
        assert dec[a].pce is pce and dec[b].pce is pce
        assert dec[a].inherited and dec[b].inherited
        assert dec[b].q2 == 0.3

    @given(st.integers(0, 2**32 - 1))
    def test_inheritance_invariance(self, seed):
        rng = np.random.default_rng(seed)
        dec = random_decomposition(rng, 2, 6)
        refit_all(dec, lambda x: np.sin(3 * x[:, 0]) + x[:, 1] ** 2, rng, degree=2)
        probe = rng.random((10**3, 2))
        before = dec.global_predict(probe)
        sid = int(rng.integers(len(dec)))
        parent_pce = dec[sid].pce
        box = dec[sid].box
        _, inherit = dec.split(sid, int(rng.integers(2)), box.center, np.zeros((0, 2)))
        after = dec.global_predict(probe)
        np.testing.assert_array_equal(after, before)
        assert np.array_equal(dec[inherit].pce.coefficients, parent_pce.coefficients)

    def test_degenerate_edge(self):
        dec = Decomposition(1, LocalPCE.constant(Box.unit(1), 1.0))
        with pytest.raises(DegenerateEdge):
            dec.split(0, 0, [0.5], np.zeros((0, 1)), min_edge=2.0)

    def test_decisive_outside_parent(self):
        dec = Decomposition(1, LocalPCE.constant(Box.unit(1), 1.0))
        dec.split(0, 0, [0.2], np.zeros((0, 1)))
        with pytest.raises(DomainError):
            dec.split(0, 0, [0.9], np.zeros((0, 1)))

    def test_missing_pce(self):
        dec = Decomposition(1)
        with pytest.raises(MissingPce):
            dec.split(0, 0, [0.5], np.zeros((0, 1)))


class TestGlobalPredict:
    def test_constant(self):
        dec = Decomposition(2, LocalPCE.constant(Box.unit(2), 2.5))
        assert global_predict(dec, [0.1, 0.7]) == 2.5

    def test_piecewise_constant(self):
        dec = Decomposition(1, LocalPCE.constant(Box.unit(1), 1.0))
        a, b = dec.split(0, 0, [0.2], np.zeros((0, 1)))
        dec.set_pce(b, LocalPCE.constant(dec[b].box, 3.0))
        np.testing.assert_array_equal(dec.global_predict(np.array([[0.1], [0.49], [0.5], [1.0]])),
                                      [1.0, 1.0, 3.0, 3.0])

    def test_exact_polynomial_pieces(self, rng):
        dec = random_decomposition(rng, 1, 7)
        refit_all(dec, lambda x: 2 + 3 * x[:, 0], rng)
        x = np.linspace(0, 1, 1001)[:, None]
        np.testing.assert_allclose(dec.global_predict(x), 2 + 3 * x[:, 0], atol=1e-8)


class TestAggregates:
    def halves(self, a, b):
        dec = Decomposition(1, LocalPCE.constant(Box.unit(1), 0.0))
        dec.split(0, 0, [0.2], np.zeros((0, 1)))
        dec.set_pce(0, a)
        dec.set_pce(1, b)
        return dec

    def test_mean_of_halves(self):
        dec = self.halves(LocalPCE.constant(Box([0.0], [0.5]), 1.0), LocalPCE.constant(Box([0.5], [1.0]), 3.0))
        assert dec.aggregate_mean() == 2.0

    def test_variance_of_halves(self):
        basis = total_degree_basis(1, 1)
        dec = self.halves(LocalPCE(Box([0.0], [0.5]), basis, [0.0, 1.0]),
                          LocalPCE(Box([0.5], [1.0]), basis, [0.0, np.sqrt(3.0)]))
        assert dec.aggregate_variance() == pytest.approx(2.0)

    def test_exact_variance_linear(self, rng):
        dec = Decomposition(1, LocalPCE.constant(Box.unit(1), 0.0))
        dec.split(0, 0, [0.1], np.zeros((0, 1)))
        dec.split(0, 0, [0.1], np.zeros((0, 1)))
        dec.split(1, 0, [0.9], np.zeros((0, 1)))
        refit_all(dec, lambda x: 2 + 3 * x[:, 0], rng)
        assert dec.exact_variance() == pytest.approx(0.75, abs=1e-8)
        assert dec.aggregate_variance() == pytest.approx(0.75 / 16, abs=1e-8)
        assert dec.aggregate_variance() < dec.exact_variance()
        assert dec.aggregate_mean() == pytest.approx(3.5, abs=1e-10)

    def test_mean_matches_monte_carlo(self, rng):
        dec = random_decomposition(rng, 2, 25)
        refit_all(dec, lambda x: np.exp(x[:, 0]) * np.sin(4 * x[:, 1]), rng, degree=2, n=15)
        vals = dec.global_predict(rng.random((10**6, 2)))
        err = 3 * vals.std() / np.sqrt(len(vals))
        assert abs(dec.aggregate_mean() - vals.mean()) < err
        assert dec.exact_variance() == pytest.approx(vals.var(), rel=1e-2)

    def test_sobol_single_domain(self, rng):
        pce = LocalPCE(Box.unit(3), total_degree_basis(3, 2), rng.standard_normal(10))
        dec = Decomposition(3, pce)
        np.testing.assert_allclose(dec.aggregate_sobol(), pce.sobol_first_order()[0], atol=1e-14)

    def test_sobol_single_input(self, rng):
        dec = random_decomposition(rng, 2, 12)
        refit_all(dec, lambda x: x[:, 0] ** 2 - x[:, 0], rng, degree=2)
        np.testing.assert_allclose(dec.aggregate_sobol(), [1.0, 0.0], atol=1e-8)

    def test_sobol_identical_pces(self, rng):
        pce = LocalPCE(Box.unit(2), total_degree_basis(2, 2), rng.standard_normal(6))
        dec = Decomposition(2, pce)
        dec.split(0, 1, [0.3, 0.3], np.zeros((0, 2)))
        np.testing.assert_allclose(dec.aggregate_sobol(), pce.sobol_first_order()[0], atol=1e-14)

    def test_q2(self):
        dec = self.halves(LocalPCE.constant(Box([0.0], [0.5]), 1.0, q2=0.2),
                          LocalPCE.constant(Box([0.5], [1.0]), 1.0, q2=0.4))
        assert dec.aggregate_q2() == pytest.approx(0.3)
        zero = self.halves(LocalPCE.constant(Box([0.0], [0.5]), 1.0), LocalPCE.constant(Box([0.5], [1.0]), 1.0))
        assert zero.aggregate_q2() == 0.0

    def test_q2_bookkeeping(self, rng):
        dec = random_decomposition(rng, 2, 10)
        refit_all(dec, lambda x: np.sin(5 * x[:, 0] * x[:, 1]), rng, degree=2, n=10)
        direct = sum(s.box.volume * min(max(s.pce.q2, 0.0), 1e6) for s in dec)
        assert dec.aggregate_q2() == pytest.approx(direct, rel=1e-14)

    def test_q2_reference_variance(self):
        a = LocalPCE(Box([0.0], [0.5]), total_degree_basis(1, 0), [1.0], q2=0.5, y_var=2.0)
        b = LocalPCE(Box([0.5], [1.0]), total_degree_basis(1, 0), [1.0], q2=0.1, y_var=4.0)
        dec = self.halves(a, b)
        assert dec.aggregate_q2(reference_variance=8.0) == pytest.approx((0.5 * 0.5 * 2 + 0.5 * 0.1 * 4) / 8)

    def test_missing_pce(self):
        with pytest.raises(MissingPce):
            Decomposition(1).aggregate_mean()

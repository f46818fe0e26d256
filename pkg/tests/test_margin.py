import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from secmargin.margin import (
    ContinuousSource,
    MomentStats,
    NonInvertibleCdfWarning,
    coupling_cdf,
    hoeffding_coupling,
    load_tabulated_source,
    mallows_decomposition,
    quantize_pair,
    security_margin,
    security_margin_linf,
    sm_continuous,
    sm_same_class,
    sm_same_class_sources,
    sm_upper_bound,
)
from secmargin.pmf import Pmf, bernoulli
from secmargin.transport import CostSpec, emd, map_cost

from conftest import pmf_pairs

G = ContinuousSource.gaussian
L = ContinuousSource.laplacian


def gaussian_table(mu=0.0, sigma=1.0, n=4001):
    x = np.linspace(mu - 10 * sigma, mu + 10 * sigma, n)
    return ContinuousSource.tabulated(x, stats.norm.pdf(x, mu, sigma))


class TestDiscrete:
    def test_examples(self):
        r = security_margin(bernoulli(0.7), bernoulli(0.4), CostSpec.hamming())
        assert r.value == pytest.approx(0.3, abs=1e-12)
        p = Pmf(0, [0.2, 0.3, 0.5])
        assert security_margin(p, p, CostSpec.lp(2)).value == 0
        r = security_margin(Pmf(0, [0.5, 0.5, 0]), Pmf(0, [0, 0.5, 0.5]), CostSpec.lp(2))
        assert r.value == pytest.approx(1.0)
        assert map_cost(r.witness_map, CostSpec.lp(2)) == pytest.approx(r.value, abs=1e-9)

    def test_linf_examples(self):
        p = Pmf(0, [0.2, 0.3, 0.5])
        assert security_margin_linf(p, p).value == 0
        assert security_margin_linf(Pmf(0, [1, 0, 0]), Pmf(0, [0, 0, 1])).value == 2
        assert security_margin_linf(Pmf(0, [0.5, 0.5, 0]), Pmf(0, [0, 0.5, 0.5])).value == 1

    @given(pmf_pairs(max_size=8), st.sampled_from(["lp1", "lp2", "hamming"]))
    @settings(max_examples=100, deadline=None)
    def test_symmetric_for_symmetric_costs(self, pq, name):
        p, q = pq
        c = {"lp1": CostSpec.lp(1), "lp2": CostSpec.lp(2), "hamming": CostSpec.hamming()}[name]
        a, b = security_margin(p, q, c), security_margin(q, p, c)
        assert a.value == pytest.approx(b.value, abs=1e-9)
        assert a.value >= 0
        assert map_cost(a.witness_map, c) == pytest.approx(a.value, abs=1e-9)

    @given(pmf_pairs(max_size=8))
    @settings(max_examples=100, deadline=None)
    def test_linf_is_bounded_integer(self, pq):
        p, q = pq
        v = security_margin_linf(p, q).value
        assert isinstance(v, int)
        assert 0 <= v <= p.size - 1

    def test_report_dict(self):
        d = security_margin(bernoulli(0.7), bernoulli(0.4), CostSpec.hamming()).to_dict()
        assert set(d) == {"value", "metric", "method", "map"}


class TestSources:
    def test_validation(self):
        with pytest.raises(ValueError):
            G(0, 0)
        with pytest.raises(ValueError):
            ContinuousSource("cauchy", 0, 1)
        with pytest.raises(ValueError):
            ContinuousSource.tabulated([0, 1, 2], [1, 1, 1])
        with pytest.raises(ValueError):
            ContinuousSource.tabulated([0, 1, 2], [-0.5, 1.0, 1.5])

    def test_laplacian_scale(self):
        x = L(1.0, 2.0)
        xs = x.ppf(np.linspace(1e-6, 1 - 1e-6, 200001))
        assert np.std(xs) == pytest.approx(2.0, rel=1e-2)

    def test_tabulated_moments_and_quantiles(self):
        t = gaussian_table(1.0, 2.0)
        assert t.mu == pytest.approx(1.0, abs=1e-6)
        assert t.sigma == pytest.approx(2.0, abs=1e-4)
        u = np.array([0.1, 0.5, 0.9])
        assert np.allclose(t.ppf(u), stats.norm.ppf(u, 1, 2), atol=1e-3)

    def test_flat_region_uses_left_endpoint(self):
        t = ContinuousSource.tabulated([0, 1, 2, 3], [1, 0, 0, 1])
        with pytest.warns(NonInvertibleCdfWarning):
            assert t.ppf(0.5) == pytest.approx(1.0)

    def test_csv(self, tmp_path):
        x = np.linspace(-8, 8, 801)
        f = stats.norm.pdf(x)
        (tmp_path / "t.csv").write_text("grid_point,density\n" + "".join(f"{a},{b}\n" for a, b in zip(x, f)))
        t = load_tabulated_source(tmp_path / "t.csv")
        assert t.family == "tabulated" and t.grid.size == 801


class TestCoupling:
    def test_identical(self):
        xs, ys = hoeffding_coupling(G(0, 1), G(0, 1), 1000)
        assert np.array_equal(xs, ys)

    def test_uniform_shift(self):
        u0 = ContinuousSource.tabulated([0, 1], [1, 1])
        u1 = ContinuousSource.tabulated([1, 2], [1, 1])
        xs, ys = hoeffding_coupling(u0, u1, 1000)
        assert np.allclose(ys - xs, 1.0, atol=1e-12)
        assert np.allclose(xs, (np.arange(1000) + 0.5) / 1000, atol=1e-12)

    def test_cumulative_is_min_of_marginals(self):
        x, y = G(0, 1), G(1, 2)
        grid = 2000
        xs, ys = hoeffding_coupling(x, y, grid)
        pts = np.linspace(-3, 4, 41)
        X, Y = np.meshgrid(pts, pts)
        got = coupling_cdf(xs, ys, X.ravel(), Y.ravel())
        want = np.minimum(x.cdf(X.ravel()), y.cdf(Y.ravel()))
        assert np.max(np.abs(got - want)) <= 2 / grid

    def test_discrete_pmfs_accepted(self):
        xs, ys = hoeffding_coupling(Pmf(0, [0.5, 0.5]), Pmf(0, [0.0, 1.0]), 4)
        assert xs.tolist() == [0, 0, 1, 1]
        assert ys.tolist() == [1, 1, 1, 1]


def _quad_w2(x, y):
    f = lambda u: (x.ppf(u) - y.ppf(u)) ** 2
    return integrate.quad(f, 0, 1, limit=500, epsabs=1e-12)[0]


class TestContinuous:
    def test_identical(self):
        assert sm_continuous(G(1, 2), G(1, 2)).value == 0.0

    def test_gaussian_pair(self):
        assert sm_continuous(G(0, 1), G(2, 3), 2, 100_000).value == pytest.approx(8.0, rel=1e-3)
        assert sm_continuous(G(0, 1), G(2, 3), 2, 1_000_000).value == pytest.approx(8.0, rel=1e-4)

    def test_mixed_pair_against_fine_quadrature(self):
        ref = sm_continuous(G(0, 1), L(0, 1), 2, 1_000_000).value
        assert 0 < ref < sm_upper_bound(0, 1, 0, 1)
        assert ref == pytest.approx(_quad_w2(G(0, 1), L(0, 1)), rel=1e-3)
        assert sm_continuous(G(0, 1), L(0, 1), 2, 100_000).value == pytest.approx(ref, rel=1e-2)

    def test_grid_floor(self):
        with pytest.raises(ValueError):
            sm_continuous(G(), G(), grid=999)

    @given(
        st.sampled_from(["gaussian", "laplacian"]),
        st.floats(-5, 5), st.floats(0.2, 4), st.floats(-5, 5), st.floats(0.2, 4),
    )
    @settings(max_examples=40, deadline=None)
    def test_same_family_matches_closed_form(self, fam, m1, s1, m2, s2):
        x, y = ContinuousSource(fam, m1, s1), ContinuousSource(fam, m2, s2)
        want = sm_same_class(m1, s1, m2, s2)
        got = sm_continuous(x, y).value
        assert got == pytest.approx(want, rel=1e-2, abs=1e-9)
        assert sm_same_class_sources(x, y).value == want

    @given(
        st.sampled_from(["gaussian", "laplacian", "tabulated"]),
        st.sampled_from(["gaussian", "laplacian", "tabulated"]),
        st.floats(-3, 3), st.floats(0.3, 3), st.floats(-3, 3), st.floats(0.3, 3),
    )
    @settings(max_examples=40, deadline=None)
    def test_upper_bound(self, f1, f2, m1, s1, m2, s2):
        mk = lambda f, m, s: gaussian_table(m, s) if f == "tabulated" else ContinuousSource(f, m, s)
        x, y = mk(f1, m1, s1), mk(f2, m2, s2)
        v = sm_continuous(x, y).value
        assert v <= sm_upper_bound(x.mu, x.sigma, y.mu, y.sigma) + 1e-6

    def test_discrete_consistency(self):
        x, y = G(0, 1), G(2, 3)
        p, q, h, _ = quantize_pair(x, y, bins=600)
        discrete = emd(p, q, CostSpec.lp(2)) * h**2
        assert discrete == pytest.approx(sm_continuous(x, y).value, rel=2e-2)


class TestClosedForms:
    def test_same_class(self):
        assert sm_same_class(1, 2, 1, 2) == 0
        assert sm_same_class(0, 1, 2, 3) == 8
        assert sm_same_class(1, 2, 1, 5) == 9
        with pytest.raises(ValueError):
            sm_same_class(0, 0, 0, 1)

    def test_same_class_rejects_mixed_or_tabulated(self):
        with pytest.raises(ValueError):
            sm_same_class_sources(G(), L())
        with pytest.raises(ValueError):
            sm_same_class_sources(gaussian_table(), gaussian_table())

    def test_upper_bound(self):
        assert sm_upper_bound(0, 1, 0, 1) == 2
        assert sm_upper_bound(0, 1, 2, 3) == 14
        assert sm_upper_bound(0, 1, 2, 3) >= sm_same_class(0, 1, 2, 3)
        assert sm_upper_bound(1, 0, 4, 0) == 9


class TestMallows:
    def test_comonotone(self):
        assert mallows_decomposition(MomentStats(0, 1, 1, 2, 2))[2] == 0

    def test_independent_equals_bound(self):
        s = MomentStats(0, 2, 1, 3, 0.0)
        assert sum(mallows_decomposition(s)) == pytest.approx(sm_upper_bound(0, 1, 2, 3))

    def test_cauchy_schwarz(self):
        with pytest.raises(ValueError):
            MomentStats(0, 0, 1, 1, 1.5)

    def test_reconstructs_expectation_from_coupling(self):
        xs, ys = hoeffding_coupling(G(0, 1), G(2, 3), 100_000)
        terms = mallows_decomposition(MomentStats.from_samples(xs, ys))
        assert all(t >= 0 for t in terms)
        assert sum(terms) == pytest.approx(np.mean((xs - ys) ** 2), abs=1e-6)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_terms_nonnegative_and_sum(self, seed):
        rng = np.random.default_rng(seed)
        xs = rng.normal(size=500)
        ys = rng.random() * xs + rng.normal(size=500)
        terms = mallows_decomposition(MomentStats.from_samples(xs, ys))
        assert all(t >= 0 for t in terms)
        assert sum(terms) == pytest.approx(np.mean((xs - ys) ** 2), abs=1e-9)

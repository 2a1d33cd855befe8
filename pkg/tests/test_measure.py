import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, stats

from gausscorr import measure as gm
from gausscorr import quadrule, sets, streams
from gausscorr.errors import BudgetError, DomainError, SingularDensityError


def test_pair_density_peak():
    pm = gm.PairMeasure(1, 0.0)
    assert gm.density_pair(pm, np.zeros(1), np.zeros(1)) == pytest.approx(1.0 / (2 * np.pi))


def test_pair_density_direct_formula():
    # direct evaluation at n=1, lam=0.5, x=y=1
    pm = gm.PairMeasure(1, 0.5)
    want = 1.0 / (2 * np.pi * np.sqrt(0.75)) * np.exp(-(2.0 - 1.0) / 1.5)
    assert gm.density_pair(pm, np.ones(1), np.ones(1)) == pytest.approx(want, rel=1e-12)


def test_pair_density_symmetric_in_arguments():
    rng = np.random.default_rng(0)
    pm = gm.PairMeasure(2, 0.3)
    x, y = rng.standard_normal((2, 100, 2))
    assert_allclose(gm.density_pair(pm, x, y), gm.density_pair(pm, y, x), rtol=1e-13)


def test_density_errors():
    with pytest.raises(SingularDensityError):
        gm.density_pair(gm.PairMeasure(1, 1.0), np.zeros(1), np.zeros(1))
    with pytest.raises(DomainError):
        gm.PairMeasure(1, 1.5)


def test_sample_pair_moments():
    rng = streams.stream(0, "test-pair")
    pm = gm.PairMeasure(2, 0.5)
    x, y = gm.sample_pair(pm, rng, 300_000)
    dots = np.einsum("ij,ij->i", x, y)
    se = dots.std(ddof=1) / np.sqrt(len(dots))
    assert abs(dots.mean() - 0.5 * 2) < 4 * se
    x1, y1 = gm.sample_pair(gm.PairMeasure(3, 1.0), rng, 10)
    assert np.array_equal(x1, y1)


def test_sample_density_agreement_1d():
    # moment matching of samples against the closed-form density at n=1
    rng = streams.stream(1, "kde")
    pm = gm.PairMeasure(1, 0.6)
    x, y = gm.sample_pair(pm, rng, 400_000)
    for m_x, m_y, want in [(1, 1, 0.6), (2, 0, 1.0), (0, 2, 1.0), (2, 2, 1 + 2 * 0.6**2)]:
        emp = np.mean(x[:, 0] ** m_x * y[:, 0] ** m_y)
        se = np.std(x[:, 0] ** m_x * y[:, 0] ** m_y, ddof=1) / np.sqrt(len(x))
        assert abs(emp - want) < 5 * se


def test_quadrature_grid_moments_and_budget():
    pts, wts = gm.gaussian_quadrature_grid(1, 2)
    assert np.sum(wts * pts[:, 0] ** 2) == pytest.approx(1.0, abs=1e-12)
    pts, wts = gm.gaussian_quadrature_grid(2, 3)
    assert np.sum(wts * (pts**2).sum(axis=1) ** 2) == pytest.approx(8.0, abs=1e-10)
    assert np.sum(wts) == pytest.approx(1.0, abs=1e-13)
    with pytest.raises(BudgetError):
        gm.gaussian_quadrature_grid(8, 100)


def test_measure_fullspace_and_ball():
    assert gm.measure(sets.FullSpace(3)).value == 1.0
    est = gm.measure(sets.Ball(3, np.sqrt(3.0)))
    assert est.value > 0.5
    assert est.std_error == 0.0


def test_measure_slab_quadrature_vs_adaptive_oracle():
    s = sets.Slab(1, np.array([1.0]), 1.96)
    est = gm.measure(s, method="quadrature")
    oracle, _ = integrate.quad(lambda t: np.exp(-t * t / 2) / np.sqrt(2 * np.pi), -1.96, 1.96)
    assert abs(est.value - oracle) < 1e-4
    assert est.value == pytest.approx(0.95, abs=1e-3)


def test_measure_monotone_under_inclusion():
    small = gm.measure(sets.Ball(2, 1.0)).value
    large = gm.measure(sets.Ball(2, 2.0)).value
    assert small < large


def test_measure_degenerate_is_zero():
    assert gm.measure(sets.Slab(2, np.array([1.0, 0.0]), 0.0)).value == 0.0


def test_measure_mc_matches_exact():
    est = gm.measure(sets.Ball(2, 1.0), method="mc", samples=200_000, seed=3)
    exact = stats.chi2.cdf(1.0, 2)
    assert abs(est.value - exact) < 4 * est.std_error
    assert est.method == "mc"
    assert est.std_error > 0


def test_measure_mc_worker_count_invariance():
    # block-keyed streams: the estimate is a pure function of (seed, paths)
    a = gm.measure(sets.Ball(2, 1.0), method="mc", samples=150_000, seed=9)
    b = gm.measure(sets.Ball(2, 1.0), method="mc", samples=150_000, seed=9)
    assert a.value == b.value


def test_gaussian_factor_measure_reduction():
    # integral of exp(-alpha|x|^2/2) over the ball equals the scaled-chi2 form
    alpha, r = 0.5, 1.2
    est = gm.gaussian_factor_measure(sets.Ball(2, r), alpha)
    want = (1 + alpha) ** -1 * stats.chi2.cdf((1 + alpha) * r * r, 2)
    assert est.value == pytest.approx(want, rel=1e-12)


def test_sphere_surface_measure():
    assert gm.sphere_surface_measure(2, 1.0) == pytest.approx(2 * np.pi)
    assert gm.sphere_surface_measure(3, 1.0) == pytest.approx(4 * np.pi)
    assert gm.sphere_surface_measure(4, 0.0) == 0.0
    with pytest.raises(DomainError):
        gm.sphere_surface_measure(0, 1.0)


def test_tail_bound_values():
    lhs, rhs = gm.gaussian_tail_bound_check(1.0)
    assert lhs == pytest.approx(0.1587, abs=2e-4)
    assert rhs == pytest.approx(0.2420, abs=2e-4)
    lhs3, rhs3 = gm.gaussian_tail_bound_check(3.0)
    assert lhs3 == pytest.approx(0.00135, abs=2e-5)
    assert rhs3 == pytest.approx(0.00148, abs=2e-5)
    ratios = [gm.gaussian_tail_bound_check(s)[0] / gm.gaussian_tail_bound_check(s)[1] for s in (2, 4, 6)]
    assert ratios[0] < ratios[1] < ratios[2]


def test_estimate_tags():
    assert gm.Estimate(1.0, 0.0, "quadrature", 32).tag() == "quadrature(order=32)"
    assert gm.Estimate(1.0, 0.1, "mc", 100).tag() == "mc(samples=100)"
    # deterministic estimates have zero error, stochastic ones do not
    q = gm.measure(sets.Ball(2, 1.0), method="quadrature")
    assert q.std_error == 0.0


def test_stream_stability():
    a = streams.stream(7, "x", 0).standard_normal(4)
    b = streams.stream(7, "x", 0).standard_normal(4)
    c = streams.stream(7, "x", 1).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert streams.block_sizes(100_001, 50_000) == [50_000, 50_000, 1]


def test_tanh_sinh_endpoint_singularity():
    # spectral accuracy for an endpoint sqrt kink
    x, w = quadrule.panel_rule(0.0, 1.0, half_nodes=26)
    assert abs(np.sum(w * np.sqrt(x)) - 2.0 / 3.0) < 1e-12

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gausscorr import functional as fn
from gausscorr import logconcave as lc
from gausscorr import semigroup as sg
from gausscorr import sets
from gausscorr.errors import DomainError, ResolutionError


def closed_form_smoothed_gaussian(alpha, n, t, x):
    s = 1.0 - np.exp(-t)
    return (1 + alpha * s) ** (-n / 2) * np.exp(
        -alpha * np.exp(-t) * (x @ x) / (2 * (1 + alpha * s))
    )


def test_apply_gaussian_closed_form():
    rng = np.random.default_rng(0)
    u = lc.GaussianFactor(2, 0.7)
    for _ in range(20):
        t = rng.uniform(0.05, 3.0)
        x = rng.standard_normal(2) * 2
        assert sg.apply(u, t, x) == pytest.approx(
            closed_form_smoothed_gaussian(0.7, 2, t, x), abs=1e-12
        )


def test_apply_identity_at_zero():
    u = lc.Indicator(sets.Ball(2, 1.0))
    x = np.array([0.3, 0.2])
    assert sg.apply(u, 0.0, x) == u(x)


def test_apply_mixes_to_mean():
    u = lc.Indicator(sets.Ball(2, 1.3))
    mean = fn.mu_expectation([u], 2)
    assert sg.apply(u, 40.0, np.array([1.0, -2.0])) == pytest.approx(mean, abs=1e-9)


def test_smoothed_value_range():
    u = lc.GaussianFactor(2, 1.0)
    rng = np.random.default_rng(1)
    for _ in range(10):
        val = sg.apply(u, rng.uniform(0.1, 2), rng.standard_normal(2))
        assert 0.0 < val <= 1.0


def test_grad_hess_gaussian_closed_form():
    alpha, t = 0.7, 1.0
    u = lc.GaussianFactor(2, alpha)
    x = np.array([0.7, -1.2])
    g, h = sg.log_potential_grad_hess(u, t, x)
    a_t = alpha * np.exp(-t) / (1 + alpha * (1 - np.exp(-t)))
    assert_allclose(g, a_t * x, atol=1e-10)
    assert_allclose(h, a_t * np.eye(2), atol=1e-10)


def test_grad_hess_quadratic_curvature_bound():
    # hessian of the evolved potential stays below e^{-t} C for quadratic bases
    alpha = 1.5
    u = lc.GaussianFactor(2, alpha)
    for t in (0.2, 1.0, 2.5):
        _, _, h = sg.grad_hess_many(u, t, np.array([[0.5, 0.5]]))
        assert np.linalg.eigvalsh(h[0]).max() <= np.exp(-t) * alpha + 1e-10


def test_hessian_window_indicator():
    u = lc.Indicator(sets.Ball(2, 1.0))
    rng = np.random.default_rng(2)
    for t in (0.3, 1.0, 2.0):
        xs = rng.standard_normal((10, 2))
        _, _, hess = sg.grad_hess_many(u, t, xs)
        eigs = np.linalg.eigvalsh(hess)
        assert eigs.min() >= -1e-8
        assert eigs.max() <= 2.0 / min(1.0, t) * np.exp(-t) + 1e-8


def test_hessian_matches_fd_of_gradient():
    u = lc.Indicator(sets.Ball(2, 1.0))
    x = np.array([0.7, -1.2])
    _, h = sg.log_potential_grad_hess(u, 0.5, x)
    step = 1e-5
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = step
        gp, _ = sg.log_potential_grad_hess(u, 0.5, x + e)
        gm_, _ = sg.log_potential_grad_hess(u, 0.5, x - e)
        assert_allclose(h[:, axis], (gp - gm_) / (2 * step), atol=1e-7)


def test_indicator_resolution_guard():
    u = lc.Indicator(sets.Ball(2, 1.0))
    with pytest.raises(ResolutionError):
        sg.log_potential_grad_hess(u, 0.01, np.zeros(2))


def test_d3_gaussian_vanishes():
    u = lc.GaussianFactor(2, 0.8)
    x = np.array([0.4, 0.9])
    for idx in ((0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1)):
        assert abs(sg.log_potential_d3(u, 1.0, x, idx)) < 1e-9


def test_d3_matches_fd_of_hessian():
    from gausscorr import surrogate as sr

    su = sr.Surrogate(sets.Ball(2, 1.0), 0.5)
    x, t, h = np.array([0.6, -0.3]), 1.0, 1e-3
    for idx, axis, entry in [((0, 0, 0), 0, (0, 0)), ((0, 0, 1), 1, (0, 0)), ((0, 1, 1), 0, (1, 1))]:
        d3 = sg.log_potential_d3(su, t, x, idx)
        e = np.zeros(2)
        e[axis] = h
        _, hp = sg.log_potential_grad_hess(su, t, x + e)
        _, hm = sg.log_potential_grad_hess(su, t, x - e)
        assert d3 == pytest.approx((hp[entry] - hm[entry]) / (2 * h), abs=1e-4)


def test_d3_index_symmetry():
    from gausscorr import surrogate as sr

    su = sr.Surrogate(sets.Ball(2, 1.0), 0.5)
    x = np.array([0.5, 0.2])
    vals = [sg.log_potential_d3(su, 1.0, x, idx) for idx in ((0, 0, 1), (0, 1, 0), (1, 0, 0))]
    assert max(vals) - min(vals) < 1e-12


def test_semigroup_law_and_self_adjointness():
    u = lc.Indicator(sets.Ball(2, 1.5))
    x = np.array([0.4, -0.6])
    for s, t in [(0.3, 0.7), (1.0, 1.0)]:
        ev = sg.EvolvedPotential(u, s)
        assert sg.apply(ev, t, x) == pytest.approx(sg.apply(u, s + t, x), abs=1e-7)
    v = lc.GaussianFactor(2, 0.7)
    t = 0.8
    lhs = fn.mu_expectation([sg.EvolvedPotential(u, t), v], 2)
    rhs = fn.mu_expectation([u, sg.EvolvedPotential(v, t)], 2)
    mix = fn.phi(u, v, t, method="quadrature").value
    assert lhs == pytest.approx(rhs, abs=1e-7)
    assert lhs == pytest.approx(mix, abs=1e-7)


def test_time_derivative_gradient_form():
    u, v = lc.GaussianFactor(2, 1.0), lc.GaussianFactor(2, 0.5)
    fd, integral = sg.time_derivative_check(u, v, 0.8)
    assert fd == pytest.approx(integral, abs=1e-5)


def test_gradient_commutation_gaussian():
    u = lc.GaussianFactor(2, 1.0)
    t, x, h = 0.8, np.array([0.4, -0.2]), 1e-5
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = h
        left = (sg.apply(u, t, x + e) - sg.apply(u, t, x - e)) / (2 * h)
        comp = lc.CustomFunction(lambda pts, a=axis: u.gradient(pts)[:, a], 2)
        right = np.exp(-t / 2) * sg.apply(comp, t, x)
        assert left == pytest.approx(right, abs=1e-7)


def test_curvature_identity_gaussian_pairs():
    u1 = lc.GaussianFactor(1, 1.0)
    lhs, rhs = sg.phi_curvature_identity(u1, u1, 1.0)
    assert lhs == pytest.approx(rhs, rel=1e-3)
    lhs2, rhs2 = sg.phi_curvature_identity(lc.GaussianFactor(2, 0.5), lc.GaussianFactor(2, 2.0), 0.5)
    assert lhs2 == pytest.approx(rhs2, rel=1e-3)


def test_curvature_identity_trivial_constant():
    # constant function: phi is constant and both sides vanish
    one = lc.Indicator(sets.FullSpace(2))
    lhs, rhs = sg.phi_curvature_identity(one, one, 1.0)
    assert abs(lhs) < 1e-10 and abs(rhs) < 1e-10


def test_time_derivative_with_bump():
    u, v = lc.GaussianFactor(1, 1.0), lc.SmoothBump(1, 2.0)
    fd, integral = sg.time_derivative_check(u, v, 0.8)
    assert fd == pytest.approx(integral, abs=1e-4)


def test_curvature_identity_guards():
    u = lc.GaussianFactor(1, 1.0)
    with pytest.raises(DomainError):
        sg.phi_curvature_identity(u, u, 0.0)
    with pytest.raises(DomainError):
        sg.phi_curvature_identity(u, u, 0.03, h=0.02)


def test_log_concavity_preserved_on_samples():
    rng = np.random.default_rng(4)
    for base in (lc.Indicator(sets.Ball(2, 1.0)), lc.GaussianFactor(2, 1.3)):
        for _ in range(10):
            t = rng.uniform(0.06, 2.0)
            x = rng.standard_normal((1, 2)) * 1.5
            _, _, hess = sg.grad_hess_many(base, t, x)
            assert np.linalg.eigvalsh(hess[0]).min() >= -1e-8


def test_evolved_potential_descriptor():
    u = lc.Indicator(sets.Ball(2, 1.0))
    ev = sg.EvolvedPotential(u, 0.5)
    assert ev.is_radial
    pot = ev.potential(np.array([0.2, 0.1]))
    assert pot == pytest.approx(-np.log(sg.apply(u, 0.5, np.array([0.2, 0.1]))), abs=1e-12)
    ev0 = sg.EvolvedPotential(u, 0.0)
    assert ev0(np.array([0.0, 0.0])) == 1.0

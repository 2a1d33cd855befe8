import numpy as np
import pytest

from gausscorr import logconcave as lc
from gausscorr import sets, streams
from gausscorr.errors import DimensionError, DomainError, EvennessError


def test_indicator_range_and_set_hints():
    u = lc.Indicator(sets.Ball(2, 1.0))
    rng = streams.stream(0, "ind")
    vals = u(rng.standard_normal((500, 2)))
    assert np.all((vals == 0.0) | (vals == 1.0))
    assert u.is_radial
    assert u.radial_breaks() == (1.0,)
    assert u.support_radius() == 1.0


def test_gaussian_factor_positive_and_gradient():
    g = lc.GaussianFactor(3, 0.8)
    rng = streams.stream(1, "gf")
    x = rng.standard_normal((200, 3))
    assert np.all(g(x) > 0)
    step = 1e-6
    e = np.zeros(3)
    e[1] = step
    fd = (g(x + e) - g(x - e)) / (2 * step)
    assert np.allclose(g.gradient(x)[:, 1], fd, atol=1e-6)
    with pytest.raises(DomainError):
        lc.GaussianFactor(2, -1.0)


def test_bump_support_and_smoothness():
    b = lc.SmoothBump(2, 1.5)
    assert b(np.zeros(2)) == 1.0
    assert b(np.array([1.5, 0.0])) == 0.0
    assert b(np.array([10.0, 0.0])) == 0.0
    # gradient vanishes smoothly at the support boundary
    g = b.gradient(np.array([[1.499999, 0.0], [0.5, 0.5]]))
    assert abs(g[0, 0]) < 1e-6
    assert np.linalg.norm(g[1]) > 0


def test_bump_evenness_contract():
    lc.SmoothBump(1, 1.0).require_even()
    with pytest.raises(EvennessError):
        lc.SmoothBump(1, 1.0, center=[0.2]).require_even()


def test_log_concavity_spot_checks():
    rng = streams.stream(2, "lcc")
    for f in (
        lc.GaussianFactor(2, 1.0),
        lc.SmoothBump(2, 2.0),
        lc.Indicator(sets.Ball(2, 1.0)),
        lc.PointwiseProduct([lc.GaussianFactor(2, 0.5), lc.Indicator(sets.Ball(2, 1.2))]),
    ):
        lc.spot_check_even(f, rng)
        assert lc.spot_check_log_concave(f, rng)


def test_product_hints_combine():
    p = lc.PointwiseProduct(
        [lc.Indicator(sets.Ball(2, 1.0)), lc.GaussianFactor(2, 0.5), lc.SmoothBump(2, 2.0)]
    )
    assert p.is_radial
    assert set(p.radial_breaks()) == {1.0, 2.0}
    assert p.support_radius() == 1.0
    assert p.indicator_set is not None
    with pytest.raises(DimensionError):
        lc.PointwiseProduct([lc.GaussianFactor(1, 1.0), lc.GaussianFactor(2, 1.0)])


def test_custom_function_adapter():
    f = lc.CustomFunction(lambda pts: pts[:, 0] ** 2, 2, axis_break_lists={0: (0.0,)})
    assert f(np.array([2.0, 1.0])) == 4.0
    assert f.axis_breaks(0) == (0.0,)
    assert f.axis_breaks(1) == ()

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from gausscorr import sets
from gausscorr.errors import ConvergenceError, DimensionError, DomainError


def box2(b1=1.0, b2=1.0):
    return sets.Intersection(
        [sets.Slab(2, np.array([1.0, 0.0]), b1), sets.Slab(2, np.array([0.0, 1.0]), b2)]
    )


SHAPES = [
    sets.Ball(2, 1.0),
    sets.Ellipsoid(2, [[1.0, 0.3], [0.3, 2.0]]),
    sets.Slab(2, np.array([0.6, 0.8]), 0.9),
    sets.Polytope(2, [(np.array([1.0, 0.0]), 1.0), (np.array([1.0, 1.0]), 1.2)]),
    box2(),
    sets.Product([sets.Slab(1, np.array([1.0]), 1.0), sets.Ball(1, 0.7)]),
    sets.Rotated(sets.rotation_2d(0.7), sets.Slab(2, np.array([1.0, 0.0]), 1.0)),
    sets.FullSpace(2),
]


def test_origin_in_every_shape():
    for s in SHAPES:
        assert s.contains(np.zeros(s.dim))


def test_contains_examples():
    assert sets.Ball(2, 1.0).contains(np.array([0.0, 0.0]))
    assert not sets.Slab(2, np.array([1.0, 0.0]), 1.0).contains(np.array([1.5, 0.0]))
    assert box2().contains(np.array([0.5, -0.5]))


def test_dimension_mismatch_raises():
    with pytest.raises(DimensionError):
        sets.Ball(2, 1.0).contains(np.array([1.0, 2.0, 3.0]))
    with pytest.raises(DimensionError):
        sets.is_unlinked(sets.Ball(2, 1.0), sets.Ball(3, 1.0))


def test_membership_even_and_convex():
    rng = np.random.default_rng(0)
    for s in SHAPES:
        x = rng.standard_normal((300, s.dim)) * 1.5
        assert np.array_equal(s.contains(x), s.contains(-x))
        inside = x[s.contains(x)]
        if len(inside) >= 2:
            t = rng.uniform(0, 1, len(inside) - 1)[:, None]
            mid = t * inside[:-1] + (1 - t) * inside[1:]
            assert np.all(s.contains(mid))


def test_distance_closed_forms():
    assert sets.Ball(2, 1.0).distance(np.array([2.0, 0.0])) == pytest.approx(1.0)
    assert sets.Slab(2, np.array([1.0, 0.0]), 1.0).distance(np.array([3.0, 4.0])) == pytest.approx(2.0)
    prod = sets.Product([sets.Slab(1, np.array([1.0]), 1.0), sets.Slab(1, np.array([1.0]), 1.0)])
    assert prod.distance(np.array([2.0, 2.0])) == pytest.approx(np.sqrt(2.0))


def test_polytope_distance_matches_grid_search():
    poly = sets.Polytope(2, [(np.array([1.0, 0.0]), 1.0), (np.array([1.0, 1.0]), np.sqrt(2.0))])
    x = np.array([3.0, 3.0])
    got = poly.distance(x)

    # brute-force oracle: coarse grid over the body, then local refinement
    def best_on_grid(center, half, steps):
        g0 = np.linspace(center[0] - half, center[0] + half, steps)
        g1 = np.linspace(center[1] - half, center[1] + half, steps)
        gx, gy = np.meshgrid(g0, g1, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        inside = pts[poly.contains(pts)]
        dists = np.linalg.norm(inside - x, axis=1)
        k = np.argmin(dists)
        return inside[k], float(dists[k])

    best, want = best_on_grid(np.zeros(2), 6.0, 301)
    for half in (0.05, 0.002, 1e-4):
        best, want = best_on_grid(best, half, 201)
    assert abs(got - want) < 1e-6
    # projection point itself must be feasible
    proj = poly.project(x)
    assert poly.distance(proj) < 1e-9


def test_ellipsoid_projection_newton():
    ell = sets.Ellipsoid(2, [[1.0, 0.0], [0.0, 4.0]])
    x = np.array([3.0, 3.0])
    proj = ell.project(x)
    assert_allclose(proj @ ell.sigma @ proj, 1.0, atol=1e-10)
    # stationarity: x - proj parallel to the outward normal Sigma*proj
    normal = ell.sigma @ proj
    cross = (x - proj)[0] * normal[1] - (x - proj)[1] * normal[0]
    assert abs(cross) < 1e-8


@settings(max_examples=60, deadline=None)
@given(st.integers(0, len(SHAPES) - 1), st.integers(0, 10_000))
def test_distance_membership_consistency(idx, seed):
    s = SHAPES[idx]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(s.dim) * 2.0
    d = s.distance(x)
    if s.contains(x):
        assert d == 0.0
    else:
        assert d > 0.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, len(SHAPES) - 1), st.integers(0, 10_000))
def test_distance_lipschitz_and_even(idx, seed):
    s = SHAPES[idx]
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, s.dim)) * 2.0
    dx, dy = s.distance(x), s.distance(y)
    assert abs(dx - dy) <= np.linalg.norm(x - y) + 1e-10
    assert abs(dx - s.distance(-x)) <= 1e-10


def test_dykstra_convergence_error_has_residual():
    err = ConvergenceError("no", residual=0.5)
    assert err.residual == 0.5


def test_rotation_validation():
    with pytest.raises(DomainError):
        sets.Rotated(np.array([[1.0, 0.1], [0.0, 1.0]]), sets.Ball(2, 1.0))


def test_degenerate_flags():
    assert sets.Slab(2, np.array([1.0, 0.0]), 0.0).degenerate
    assert not sets.Ball(2, 1.0).degenerate
    assert sets.Intersection([sets.Ball(2, 1.0), sets.Slab(2, np.array([1.0, 0.0]), 0.0)]).degenerate


def test_sections_match_membership():
    rng = np.random.default_rng(3)
    for s in SHAPES:
        if s.dim != 2:
            continue
        for x1 in rng.uniform(-2, 2, 8):
            lo, hi = s.last_interval(np.array([x1]))
            if lo > hi:
                assert not s.contains(np.array([x1, 0.0])) or True
                continue
            for t, expect in [(0.5 * (lo + hi), True)] + (
                [(hi + 0.05, False), (lo - 0.05, False)] if np.isfinite(hi) else []
            ):
                assert s.contains(np.array([x1, t])) == expect


def test_section_batch_agrees_with_scalar():
    xs = np.linspace(-1.8, 1.8, 41)[:, None]
    for s in SHAPES:
        if s.dim != 2:
            continue
        lo_b, hi_b = s.section_batch(xs)
        for k, x1 in enumerate(xs[:, 0]):
            lo, hi = s.last_interval(np.array([x1]))
            if lo > hi:
                assert lo_b[k] > hi_b[k]
            else:
                assert_allclose([lo_b[k], hi_b[k]], [lo, hi], atol=1e-12)


def test_unlinked_recognizer_examples():
    e1 = sets.Slab(2, np.array([1.0, 0.0]), 1.0)
    e2 = sets.Slab(2, np.array([0.0, 1.0]), 1.0)
    assert sets.is_unlinked(e1, e2) == sets.UNLINKED
    assert sets.is_unlinked(e1, sets.Slab(2, np.array([1.0, 0.0]), 2.0)) == sets.LINKED
    assert sets.is_unlinked(sets.Ball(2, 1.0), box2()) == sets.UNKNOWN
    assert sets.is_unlinked(sets.FullSpace(2), sets.Ball(2, 1.0)) == sets.UNLINKED
    diag = sets.Slab(2, np.array([1.0, 1.0]) / np.sqrt(2), 1.0)
    assert sets.is_unlinked(e1, diag) == sets.LINKED
    q = sets.rotation_2d(0.4)
    assert sets.is_unlinked(sets.Rotated(q, e1), sets.Rotated(q, e2)) == sets.UNLINKED


def test_json_round_trip():
    for s in SHAPES:
        doc = s.to_json()
        back = sets.from_json(doc)
        rng = np.random.default_rng(5)
        x = rng.standard_normal((200, s.dim)) * 2
        assert np.array_equal(s.contains(x), back.contains(x))


def test_scale_set():
    rng = np.random.default_rng(7)
    for s in SHAPES:
        scaled = sets.scale_set(s, 2.0)
        x = rng.standard_normal((200, s.dim))
        assert np.array_equal(s.contains(x), scaled.contains(2.0 * x))


def test_axis_box_intervals():
    assert sets.axis_box_intervals(box2(1.0, 0.8)) == [(-1.0, 1.0), (-0.8, 0.8)]
    assert sets.axis_box_intervals(sets.Ball(2, 1.0)) is None
    prod = sets.Product([sets.Slab(1, np.array([1.0]), 1.2)] * 3)
    assert sets.axis_box_intervals(prod) == [(-1.2, 1.2)] * 3


def test_first_axis_extent():
    assert sets.first_axis_extent(sets.Ball(2, 1.3)) == pytest.approx(1.3, abs=1e-9)
    assert sets.first_axis_extent(box2(0.7, 2.0)) == pytest.approx(0.7, abs=1e-9)
    assert sets.first_axis_extent(sets.Slab(2, np.array([0.0, 1.0]), 1.0)) == pytest.approx(9.5)

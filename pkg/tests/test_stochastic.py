import numpy as np
import pytest

from gausscorr import sets, stochastic as st, streams
from gausscorr.errors import DomainError, PreconditionError, TailStarvationError


def interval(b=1.0):
    return sets.Slab(1, np.array([1.0]), b)


def test_fullspace_never_exits():
    times, _ = st.simulate_exit_times(sets.FullSpace(2), 1e-2, 0.5, 100, seed=0)
    assert np.all(np.isinf(times))


def test_exit_points_lie_outside():
    ball = sets.Ball(2, 1.0)
    times, pos = st.simulate_exit_times(ball, 1e-3, 3.0, 500, seed=1, want_positions=True)
    exited = np.isfinite(times)
    assert np.any(exited)
    assert not np.any(ball.contains(pos[exited], strict=True))


def test_mean_exit_time_interval():
    # E tau from the center of (-1,1) is 1; bias shrinks with dt
    times, _ = st.simulate_exit_times(interval(), 2e-4, 30.0, 20_000, seed=2)
    mean = float(np.mean(times[np.isfinite(times)]))
    assert mean == pytest.approx(1.0, abs=0.05)


def test_survival_curve_invariants():
    times, _ = st.simulate_exit_times(interval(), 1e-3, 2.0, 5_000, seed=3)
    curve = st.survival_curve(times, 2.0)
    assert curve.survivors[0] == curve.total
    assert np.all(np.diff(curve.survivors) <= 0)
    mid = (curve.survivors > 0) & (curve.survivors < curve.total)
    assert np.all(curve.ci_halfwidth[mid] > 0)
    merged = st.SurvivalCurve.merge([curve, curve])
    assert merged.total == 2 * curve.total
    assert np.array_equal(merged.survivors, 2 * curve.survivors)


def test_spectral_gap_interval_coarse():
    est = st.spectral_gap(interval(), paths=30_000, dt=5e-4, t_max=4.0, seed=4)
    target = np.pi**2 / 8
    assert abs(est.value - target) / target < 0.08
    assert est.std_error > 0


def test_spectral_gap_fullspace_flag():
    est = st.spectral_gap(sets.FullSpace(1), paths=500, dt=1e-2, t_max=0.5, seed=5)
    assert est.value == 0.0 and est.flag == "no_decay"


def test_spectral_gap_tail_starvation():
    with pytest.raises(TailStarvationError) as exc:
        st.spectral_gap(interval(0.2), paths=2_000, dt=1e-3, t_max=4.0, seed=6)
    assert exc.value.suggestion


def test_worker_count_invariance():
    a = st.spectral_gap(interval(), paths=30_000, dt=1e-3, t_max=3.0, seed=7, threads=1)
    b = st.spectral_gap(interval(), paths=30_000, dt=1e-3, t_max=3.0, seed=7, threads=3)
    assert a.value == b.value
    assert np.array_equal(a.curve.survivors, b.curve.survivors)


def test_gap_subadditivity_trivial_self():
    a = interval()
    ga, gb, gab, holds = st.gap_subadditivity_check(
        a, a, paths=20_000, dt=5e-4, t_max=3.5, seed=8
    )
    assert holds
    assert gab.value <= ga.value + gb.value


def test_subadditivity_rejects_fullspace():
    with pytest.raises(DomainError):
        st.gap_subadditivity_check(sets.FullSpace(1), interval(), paths=10, dt=1e-2)


def test_drift_only_subordinator_exact():
    rng = streams.stream(0, "drift")
    path = st.sample_subordinator(st.SubordinatorSpec(drift=1.0), np.array([0.5, 1.0, 2.0]), rng, 4)
    assert np.allclose(path, np.tile([0.5, 1.0, 2.0], (4, 1)))


def test_subordinator_grid_validation():
    rng = streams.stream(0, "bad")
    with pytest.raises(DomainError):
        st.sample_subordinator(st.SubordinatorSpec(drift=1.0), np.array([0.5, 0.4]), rng)
    with pytest.raises(DomainError):
        st.SubordinatorSpec(jump=("stable", 1.2))


def test_stable_increments_laplace():
    rows = st.laplace_transform_check(
        st.SubordinatorSpec(jump=("stable", 0.5)), [0.5, 1.0, 2.0], draws=150_000, seed=9
    )
    assert all(r["holds"] for r in rows)


def test_stable_half_matches_inverse_gaussian_moment():
    # beta = 1/2 one-sided stable is 1/(2 G^2) in law for standard normal G
    rng = streams.stream(1, "half")
    x = st.stable_increments(rng, 0.5, 1.0, 200_000)
    g = streams.stream(2, "ref").standard_normal(200_000)
    ref = 1.0 / (2.0 * g**2)
    # compare Laplace transforms at a few points (moments diverge)
    for lam in (0.5, 1.5):
        a, b = np.exp(-lam * x), np.exp(-lam * ref)
        se = np.sqrt(a.var() / len(a) + b.var() / len(b))
        assert abs(a.mean() - b.mean()) < 5 * se


def test_poisson_subordinator_nondecreasing_and_exponent():
    spec = st.SubordinatorSpec(drift=0.2, jump=("poisson", 1.5, ("exp", 0.7)))
    rng = streams.stream(3, "cp")
    path = st.sample_subordinator(spec, np.linspace(0.2, 2.0, 10), rng, 200)
    assert np.all(np.diff(path, axis=1) >= 0)
    lam = np.linspace(0.1, 4, 25)
    psi = spec.laplace_exponent(lam)
    assert np.all(psi >= 0) and np.all(np.diff(psi) >= 0) and np.all(np.diff(psi, 2) <= 1e-12)
    rows = st.laplace_transform_check(spec, [0.8], draws=120_000, seed=10)
    assert rows[0]["holds"]


def box2(b1, b2):
    return sets.Intersection(
        [sets.Slab(2, np.array([1.0, 0.0]), b1), sets.Slab(2, np.array([0.0, 1.0]), b2)]
    )


def test_sbm_correlation_self_pair():
    spec = st.SubordinatorSpec(jump=("stable", 0.5))
    a = box2(1.0, 1.0)
    p_ab, p_prod, holds, diag = st.sbm_correlation_check(
        a, a, spec, [0.5, 1.0], 1, paths=100_000, seed=11
    )
    assert holds
    assert p_ab == pytest.approx(diag["p_a"], abs=1e-12)
    assert p_ab >= p_prod


def test_sbm_drift_only_independent_slabs():
    # slabs on the first observation and on the increment are independent events
    spec = st.SubordinatorSpec(drift=1.0)
    a = sets.Slab(2, np.array([1.0, 0.0]), 1.0)
    b = sets.Slab(2, np.array([-1.0, 1.0]), 1.0)
    p_ab, p_prod, holds, diag = st.sbm_correlation_check(
        a, b, spec, [0.5, 1.0], 1, paths=150_000, seed=12
    )
    assert holds
    assert abs(p_ab - p_prod) <= 4 * diag["std_error"] + 1e-9
    # gaussian oracle for the product side
    from scipy.special import ndtr
    p_a = 2 * ndtr(1.0 / np.sqrt(0.5)) - 1
    p_b = 2 * ndtr(1.0 / np.sqrt(0.5)) - 1
    assert p_prod == pytest.approx(p_a * p_b, abs=0.01)


def test_fkg_examples():
    f = st.CoordFn(0)
    e_fg, e_prod, holds = st.fkg_check(f, f, [("normal",)])
    assert holds and e_fg == pytest.approx(1.0, abs=1e-9) and e_prod == pytest.approx(0.0, abs=1e-9)
    g = st.MinWithConstFn(st.CoordFn(0), 2.0)
    assert st.fkg_check(st.AffineFn([1.0, 1.0]), g, [("normal",), ("normal",)])[2]
    e_fg, e_prod, holds = st.fkg_check(st.AffineFn([1.0, 0.5]), st.ConstFn(3.0), [("normal",), ("normal",)])
    assert holds and e_fg == pytest.approx(e_prod, abs=1e-9)


def test_fkg_monotonicity_guard():
    class Decreasing(st.MonotoneFn):
        def __call__(self, pts):
            return -np.atleast_2d(pts)[:, 0]

    with pytest.raises(PreconditionError):
        st.fkg_check(Decreasing(), st.CoordFn(0), [("normal",)])
    with pytest.raises(PreconditionError):
        st.AffineFn([-1.0])


def test_exit_scaling_ks():
    from scipy import stats as sps

    r = 1.4
    t1, _ = st.simulate_exit_times(sets.Ball(2, 1.0), 1e-3, 3.0, 8_000, seed=13, label="s1")
    t2, _ = st.simulate_exit_times(sets.Ball(2, r), 1e-3 * r**2, 3.0 * r**2, 8_000, seed=13, label="s2")
    stat, pval = sps.ks_2samp(t1[np.isfinite(t1)], t2[np.isfinite(t2)] / r**2)
    assert pval > 0.01

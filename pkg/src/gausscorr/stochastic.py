"""Path simulation: Brownian exit times, spectral gaps, subordinate motion.

The spectral gap of an open convex domain is estimated operationally as the
exponential decay rate of the Brownian survival probability,

    gap(D) = -lim_{t->inf} (1/t) ln P(tau_D > t),

for a standard (unit-speed) Brownian motion, so the interval (-a, a) has gap
pi^2 / (8 a^2).  Walks use Euler steps with exact Gaussian increments; exit
is checked on the grid and the O(sqrt(dt)) discretization bias is controlled
by step-halving rather than bridge corrections.

Work shards into fixed-size path blocks, each drawing from its own
counter-based stream, so results are bit-identical for a given seed no
matter how many workers run the blocks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import sets, streams
from .errors import DomainError, PreconditionError, TailStarvationError

PATH_BLOCK = 16_384
STEP_CHUNK = 256


@dataclass
class SurvivalCurve:
    """Empirical survivor counts of an exit time over a time grid."""

    times: np.ndarray
    survivors: np.ndarray
    total: int
    ci_halfwidth: np.ndarray = field(default=None)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.survivors = np.asarray(self.survivors, dtype=int)
        if self.ci_halfwidth is None:
            self.ci_halfwidth = wilson_halfwidth(self.survivors, self.total)

    def probabilities(self):
        return self.survivors / self.total

    @staticmethod
    def merge(curves):
        base = curves[0]
        surv = np.sum([c.survivors for c in curves], axis=0)
        total = sum(c.total for c in curves)
        return SurvivalCurve(base.times, surv, total)


def wilson_halfwidth(count, total, z=1.96):
    p = np.asarray(count, dtype=float) / total
    denom = 1.0 + z * z / total
    return z * np.sqrt(p * (1.0 - p) / total + z * z / (4.0 * total * total)) / denom


# ---------------------------------------------------------------------------
# Brownian exit times


def _walk_block(domain, dt, n_steps, size, rng, want_positions):
    """Exit step index per path (0 = exited at first step; -1 = censored)."""
    n = domain.dim
    pos = np.zeros((size, n))
    alive = np.arange(size)
    exit_step = np.full(size, -1, dtype=np.int64)
    exit_pos = np.zeros((size, n)) if want_positions else None
    sq = np.sqrt(dt)
    step = 0
    while step < n_steps and alive.size:
        k = min(STEP_CHUNK, n_steps - step)
        incr = rng.standard_normal((k, alive.size, n)) * sq
        live_slots = np.arange(alive.size)
        for j in range(k):
            cur = alive[live_slots]
            pos[cur] += incr[j][live_slots]
            inside = domain.contains(pos[cur], strict=True)
            if not np.all(inside):
                exited = cur[~inside]
                exit_step[exited] = step + j + 1
                if want_positions:
                    exit_pos[exited] = pos[exited]
                live_slots = live_slots[inside]
            if live_slots.size == 0:
                break
        alive = alive[live_slots]
        step += k
    return exit_step, exit_pos


def simulate_exit_times(
    domain,
    dt,
    t_max,
    paths,
    seed=0,
    label="exit",
    threads=1,
    want_positions=False,
):
    """Exit times of Brownian paths from an open domain; censored values are +inf.

    Boundary membership counts as exit.  Returns (times, positions or None).
    """
    if dt <= 0 or t_max <= 0:
        raise DomainError("dt and t_max must be > 0")
    n_steps = int(round(t_max / dt))
    sizes = streams.block_sizes(paths, PATH_BLOCK)

    def run(b_size):
        b, size = b_size
        rng = streams.stream(seed, label, domain.shape, b)
        return _walk_block(domain, dt, n_steps, size, rng, want_positions)

    jobs = list(enumerate(sizes))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    steps = np.concatenate([r[0] for r in results])
    times = np.where(steps < 0, np.inf, steps * dt)
    positions = np.concatenate([r[1] for r in results]) if want_positions else None
    return times, positions


def survival_curve(exit_times, t_max, grid_points=200):
    grid = np.linspace(0.0, t_max, grid_points + 1)
    surv = np.array([(exit_times > t).sum() for t in grid])
    return SurvivalCurve(grid, surv, len(exit_times))


# ---------------------------------------------------------------------------
# spectral gap


@dataclass
class GapEstimate:
    value: float
    std_error: float
    curve: SurvivalCurve
    fit_window: tuple
    n_used: int
    flag: str = ""


def spectral_gap(
    domain,
    paths=100_000,
    dt=1e-4,
    t_max=4.0,
    fit_window=None,
    seed=0,
    label="gap",
    threads=1,
    min_tail=100,
):
    """Decay-rate fit of ln P(tau > t) by weighted least squares.

    The fit window defaults to [0.35 t_max, 0.95 t_max]; the window must keep
    at least ``min_tail`` surviving paths at its right edge.
    """
    times, _ = simulate_exit_times(domain, dt, t_max, paths, seed, label, threads)
    curve = survival_curve(times, t_max)
    if curve.survivors[-1] == curve.total:
        return GapEstimate(0.0, 0.0, curve, (0.0, t_max), paths, flag="no_decay")
    lo, hi = fit_window if fit_window is not None else (0.35 * t_max, 0.95 * t_max)
    sel = (curve.times >= lo) & (curve.times <= hi) & (curve.survivors > 0)
    if not np.any(sel) or curve.survivors[sel][-1] < min_tail:
        tail = int(curve.survivors[sel][-1]) if np.any(sel) else 0
        raise TailStarvationError(
            f"only {tail} paths survive at the fit-window edge (need {min_tail})",
            suggestion="increase paths or shorten t_max / the fit window",
        )
    t = curve.times[sel]
    p = curve.survivors[sel] / curve.total
    y = np.log(p)
    # survival points share paths: Cov(ln S_s, ln S_t) = (1 - S_min)/(S_min N)
    # with S_min the survival at the earlier time; fit by GLS under that
    # covariance so the slope error is not understated
    ratio = (1.0 - p) / (p * curve.total)
    cov_y = np.minimum.outer(ratio, ratio)
    cov_y[np.diag_indices_from(cov_y)] = ratio
    design = np.stack([np.ones_like(t), t], axis=1)
    from scipy.linalg import solve_triangular

    jitter = 1e-14 * np.max(ratio)
    chol = np.linalg.cholesky(cov_y + jitter * np.eye(len(t)))
    dx = solve_triangular(chol, design, lower=True)
    dy = solve_triangular(chol, y, lower=True)
    gram_inv = np.linalg.inv(dx.T @ dx)
    coef = gram_inv @ (dx.T @ dy)
    slope_se = float(np.sqrt(gram_inv[1, 1]))
    return GapEstimate(float(-coef[1]), slope_se, curve, (float(lo), float(hi)), paths)


def gap_subadditivity_check(a_set, b_set, sigma_factor=3.0, **kwargs):
    """gap(A and B) <= gap(A) + gap(B) within combined fit error."""
    if isinstance(a_set.simplified(), sets.FullSpace) or isinstance(
        b_set.simplified(), sets.FullSpace
    ):
        raise DomainError("both domains must be proper subsets")
    inter = sets.Intersection([a_set, b_set])
    ga = spectral_gap(a_set, label="gapA", **kwargs)
    gb = spectral_gap(b_set, label="gapB", **kwargs)
    gab = spectral_gap(inter, label="gapAB", **kwargs)
    slack = sigma_factor * (ga.std_error + gb.std_error + gab.std_error)
    holds = gab.value <= ga.value + gb.value + slack
    return ga, gb, gab, bool(holds)


# ---------------------------------------------------------------------------
# subordinators


@dataclass(frozen=True)
class SubordinatorSpec:
    """Nondecreasing Levy time change: drift plus one jump mechanism.

    ``jump`` is None, ("stable", beta) with beta in (0, 1), or
    ("poisson", rate, ("exp", mean) | ("const", size)).
    """

    drift: float = 0.0
    jump: tuple = None

    def __post_init__(self):
        if self.drift < 0:
            raise DomainError("drift must be >= 0")
        if self.jump is not None:
            kind = self.jump[0]
            if kind == "stable":
                beta = self.jump[1]
                if not 0.0 < beta < 1.0:
                    raise DomainError("stable index must lie in (0, 1)")
            elif kind == "poisson":
                if self.jump[1] < 0:
                    raise DomainError("jump rate must be >= 0")
            else:
                raise DomainError(f"unknown jump mechanism {kind!r}")

    def laplace_exponent(self, lam):
        """Psi(lam) = a lam + integral (1 - e^{-lam x}) jump measure(dx)."""
        lam = np.asarray(lam, dtype=float)
        out = self.drift * lam
        if self.jump is None:
            return out
        if self.jump[0] == "stable":
            return out + lam ** self.jump[1]
        _, rate, dist = self.jump
        if dist[0] == "exp":
            mean = dist[1]
            return out + rate * lam * mean / (1.0 + lam * mean)
        size = dist[1]
        return out + rate * (1.0 - np.exp(-lam * size))


def stable_increments(rng, beta, dt, size):
    """One-sided stable(beta) increments with E exp(-lam X) = exp(-dt lam^beta)."""
    u = rng.uniform(0.0, 1.0, size)
    e = rng.exponential(1.0, size)
    pu = np.pi * u
    a = (
        np.sin(beta * pu) ** (beta / (1.0 - beta))
        * np.sin((1.0 - beta) * pu)
        / np.sin(pu) ** (1.0 / (1.0 - beta))
    )
    return dt ** (1.0 / beta) * (a / e) ** ((1.0 - beta) / beta)


def sample_subordinator(spec, grid, rng, paths=1):
    """Paths of the subordinator on a strictly increasing time grid from 0.

    Returns (paths, len(grid)) nondecreasing values X_{t_k} with X_0 = 0 at
    an implicit time 0 (the grid must be positive and increasing).
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0) or grid[0] <= 0:
        raise DomainError("time grid must be strictly increasing and positive")
    deltas = np.diff(np.concatenate([[0.0], grid]))
    out = np.zeros((paths, len(grid)))
    acc = np.zeros(paths)
    for k, d in enumerate(deltas):
        incr = np.full(paths, spec.drift * d)
        if spec.jump is not None:
            if spec.jump[0] == "stable":
                incr = incr + stable_increments(rng, spec.jump[1], d, paths)
            else:
                _, rate, dist = spec.jump
                counts = rng.poisson(rate * d, paths)
                if dist[0] == "exp":
                    total = np.array(
                        [rng.exponential(dist[1], c).sum() if c else 0.0 for c in counts]
                    )
                else:
                    total = counts * dist[1]
                incr = incr + total
        acc = acc + incr
        out[:, k] = acc
    return out


def laplace_transform_check(spec, lam_values, draws=1_000_000, seed=0, sigma_factor=4.0):
    """MC Laplace transform of X_1 against exp(-Psi(lam)), one row per lam."""
    rows = []
    for lam in lam_values:
        total = 0.0
        total_sq = 0.0
        count = 0
        for b, size in enumerate(streams.block_sizes(draws)):
            rng = streams.stream(seed, "laplace", f"{lam}", b)
            x1 = sample_subordinator(spec, np.array([1.0]), rng, paths=size)[:, 0]
            vals = np.exp(-lam * x1)
            total += vals.sum()
            total_sq += (vals * vals).sum()
            count += size
        mean = total / count
        se = np.sqrt(max(total_sq / count - mean * mean, 0.0) / count)
        want = float(np.exp(-spec.laplace_exponent(lam)))
        rows.append(
            {
                "lam": float(lam),
                "estimate": float(mean),
                "std_error": float(se),
                "target": want,
                "holds": bool(abs(mean - want) <= sigma_factor * se),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# subordinate Brownian correlation


def sbm_correlation_check(
    a_set,
    b_set,
    spec,
    time_points,
    n_space,
    paths=200_000,
    seed=0,
    sigma_factor=3.0,
):
    """Positive correlation of two symmetric convex events of the time-changed motion.

    The motion is B_{X_t} observed at the given times and stacked into
    R^{n*m}; both probabilities and their product are estimated on shared
    paths.  Returns (p_joint, p_product, holds, diagnostics).
    """
    m = len(time_points)
    dim = n_space * m
    if a_set.dim != dim or b_set.dim != dim:
        raise DimensionError("sets must live in the stacked space R^(n*m)")
    grid = np.asarray(time_points, dtype=float)
    sums = np.zeros(3)  # a, b, ab
    sq = np.zeros((3, 3))
    count = 0
    for blk, size in enumerate(streams.block_sizes(paths)):
        rng = streams.stream(seed, "sbm", blk)
        x = sample_subordinator(spec, grid, rng, paths=size)  # (size, m)
        deltas = np.diff(np.concatenate([np.zeros((size, 1)), x], axis=1), axis=1)
        incr = rng.standard_normal((size, m, n_space)) * np.sqrt(deltas)[:, :, None]
        stacked = np.cumsum(incr, axis=1).reshape(size, dim)
        ia = a_set.contains(stacked).astype(float)
        ib = b_set.contains(stacked).astype(float)
        vec = np.stack([ia, ib, ia * ib], axis=1)
        sums += vec.sum(axis=0)
        sq += vec.T @ vec
        count += size
    mean = sums / count
    cov = sq / count - np.outer(mean, mean)
    p_a, p_b, p_ab = mean
    product = p_a * p_b
    grad = np.array([-p_b, -p_a, 1.0])
    var_diff = float(grad @ cov @ grad) / count
    se = np.sqrt(max(var_diff, 0.0))
    holds = p_ab >= product - sigma_factor * se
    return (
        float(p_ab),
        float(product),
        bool(holds),
        {"p_a": float(p_a), "p_b": float(p_b), "std_error": float(se), "paths": count},
    )


# ---------------------------------------------------------------------------
# FKG positive correlation for nondecreasing functions


class MonotoneFn:
    """Coordinatewise nondecreasing function descriptors."""

    def __call__(self, pts):
        raise NotImplementedError


class CoordFn(MonotoneFn):
    def __init__(self, axis):
        self.axis = axis

    def __call__(self, pts):
        return np.atleast_2d(pts)[:, self.axis]


class AffineFn(MonotoneFn):
    """<w, x> + c with nonnegative weights."""

    def __init__(self, weights, const=0.0):
        self.weights = np.asarray(weights, dtype=float)
        if np.any(self.weights < 0):
            raise PreconditionError("affine weights must be nonnegative to be nondecreasing")
        self.const = float(const)

    def __call__(self, pts):
        return np.atleast_2d(pts) @ self.weights + self.const


class MinWithConstFn(MonotoneFn):
    def __init__(self, inner, cap):
        self.inner, self.cap = inner, float(cap)

    def __call__(self, pts):
        return np.minimum(self.inner(pts), self.cap)


class ConstFn(MonotoneFn):
    def __init__(self, value):
        self.value = float(value)

    def __call__(self, pts):
        return np.full(len(np.atleast_2d(pts)), self.value)


def _spot_check_monotone(fn, n, rng, samples=256):
    x = rng.standard_normal((samples, n))
    y = x + rng.uniform(0.0, 1.0, (samples, n))
    if np.any(fn(y) < fn(x) - 1e-12):
        raise PreconditionError("function is not coordinatewise nondecreasing on samples")


def fkg_check(f, g, marginals, tol=1e-9, order=80, seed=0):
    """E[f g] >= E[f] E[g] under a product of one-dimensional measures.

    ``marginals`` is a list of ("normal",) or ("uniform", a, b) tuples; both
    functions are spot-checked for monotonicity first.
    """
    from . import quadrule

    n = len(marginals)
    rng = streams.stream(seed, "fkg")
    _spot_check_monotone(f, n, rng)
    _spot_check_monotone(g, n, rng)
    rules = []
    for spec_1d in marginals:
        if spec_1d[0] == "normal":
            rules.append(quadrule.gauss_hermite(order))
        elif spec_1d[0] == "uniform":
            a, b = spec_1d[1], spec_1d[2]
            x, w = np.polynomial.legendre.leggauss(order)
            rules.append((0.5 * (b - a) * x + 0.5 * (a + b), w / 2.0))
        else:
            raise DomainError(f"unknown marginal {spec_1d[0]!r}")
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    pts = np.stack([grid.ravel() for grid in grids], axis=1)
    wts = np.ones(pts.shape[0])
    idx = np.meshgrid(*[np.arange(len(r[0])) for r in rules], indexing="ij")
    for axis, r in enumerate(rules):
        wts *= r[1][idx[axis].ravel()]
    f_vals, g_vals = f(pts), g(pts)
    e_fg = float(np.sum(wts * f_vals * g_vals))
    e_f_e_g = float(np.sum(wts * f_vals) * np.sum(wts * g_vals))
    return e_fg, e_f_e_g, bool(e_fg >= e_f_e_g - tol)

"""Distance-penalized log-concave stand-ins for set indicators.

The surrogate for a set A with Gaussian weight alpha and penalty strength m
(defaulting to the ambient dimension) is

    h(x) = exp{ -alpha |x|^2 / 2 - m rho_A(x) },

where rho_A is the Euclidean distance to A.  It dominates the indicator
times the Gaussian factor, agrees with it exactly on A, and is even and
log-concave.  Derivative-based operations use a Moreau-regularized distance
(quadratic inf-convolution), which is the Huber transform of rho_A:

    rho_eps(x) = rho^2/(2 eps)   if rho <= eps,   rho - eps/2 otherwise,

continuously differentiable with |grad| <= 1.

This module also hosts the variance (Poincare) and enlargement
(isoperimetric) checks for log-concave perturbations exp(-U) d mu_n.
"""

from __future__ import annotations

import numpy as np

from . import functional as fn
from . import logconcave as lc
from . import measure as gm
from . import quadrule, semigroup, sets
from .errors import BoundaryGradientError, DomainError

EPS_DEFAULT = 1e-3


def sandwich_lower_rate(alpha):
    """The evolved-Hessian lower constant min(e^{-3} alpha, 2^{-6} e^{-3})."""
    return min(np.exp(-3.0) * alpha, 2.0**-6 * np.exp(-3.0))


class Surrogate(lc.LogConcaveFunction):
    """exp(-alpha |x|^2/2 - strength * rho_A(x)), optionally Moreau-smoothed."""

    def __init__(self, convex_set, alpha, strength=None, eps=0.0):
        if alpha < 0:
            raise DomainError("alpha must be >= 0")
        if eps < 0:
            raise DomainError("smoothing radius must be >= 0")
        self.set = convex_set
        self.dim = convex_set.dim
        self.alpha = float(alpha)
        self.strength = float(strength if strength is not None else convex_set.dim)
        self.eps = float(eps)

    def _smoothed_rho(self, rho):
        if self.eps == 0.0:
            return rho
        return np.where(rho <= self.eps, rho**2 / (2.0 * self.eps), rho - self.eps / 2.0)

    def potential(self, x):
        """alpha |x|^2 / 2 + strength * (smoothed) distance."""
        pts, scalar = sets._as_points(x, self.dim)
        rho = self._smoothed_rho(self.set.distance(pts))
        out = 0.5 * self.alpha * np.einsum("ij,ij->i", pts, pts) + self.strength * rho
        return float(out[0]) if scalar else out

    def _values(self, pts):
        return np.exp(-self.potential(pts))

    def gradient(self, x):
        """Gradient of the surrogate value; needs smoothing or points off the boundary."""
        pts, scalar = sets._as_points(x, self.dim)
        rho = self.set.distance(pts)
        if self.eps == 0.0 and np.any(np.abs(rho) < 1e-12) and not np.all(rho == 0.0):
            on_boundary = (rho < 1e-12) & ~self.set.contains(pts, strict=True)
            if np.any(on_boundary):
                raise BoundaryGradientError(
                    "distance gradient undefined on the boundary; set a smoothing radius"
                )
        proj = self.set.project(pts)
        diff = pts - proj
        norm = np.maximum(rho, 1e-300)
        slope = np.ones_like(rho) if self.eps == 0.0 else np.minimum(rho / self.eps, 1.0)
        grad_rho = np.where(rho[:, None] > 0.0, slope[:, None] * diff / norm[:, None], 0.0)
        grad_h = self.alpha * pts + self.strength * grad_rho
        out = -grad_h * self._values(pts)[:, None]
        return out[0] if scalar else out

    def potential_gradient(self, x):
        """Gradient of the exponent alpha x + strength * grad rho."""
        pts, scalar = sets._as_points(x, self.dim)
        rho = self.set.distance(pts)
        proj = self.set.project(pts)
        norm = np.maximum(rho, 1e-300)
        slope = np.ones_like(rho) if self.eps == 0.0 else np.minimum(rho / self.eps, 1.0)
        grad_rho = np.where(rho[:, None] > 0.0, slope[:, None] * (pts - proj) / norm[:, None], 0.0)
        out = self.alpha * pts + self.strength * grad_rho
        return out[0] if scalar else out

    @property
    def is_radial(self):
        core = self.set.simplified()
        return isinstance(core, (sets.Ball, sets.FullSpace))

    def radial_breaks(self):
        core = self.set.simplified()
        if isinstance(core, sets.Ball):
            r = core.radius
            return (r, r + self.eps) if self.eps > 0 else (r,)
        return ()

    def axis_breaks(self, axis):
        box = sets.axis_box_intervals(self.set)
        if box is None:
            return ()
        lo, hi = box[axis]
        if not np.isfinite(hi):
            return ()
        edges = [lo, hi]
        if self.eps > 0:
            edges += [lo - self.eps, hi + self.eps]
        return tuple(edges)


class LevelSet:
    """Bounded sublevel membership oracle {x : potential(x) <= r}."""

    def __init__(self, surrogate, r):
        if r < 0:
            raise DomainError("level must be >= 0")
        self.surrogate = surrogate
        self.r = float(r)
        self.dim = surrogate.dim

    def contains(self, x):
        pot = self.surrogate.potential(x)
        return pot <= self.r

    def bounding_radius(self):
        # alpha |x|^2/2 <= r alone bounds the level set when alpha > 0;
        # otherwise strength * (|x| - R_A) <= r does
        s = self.surrogate
        if s.alpha > 0:
            return float(np.sqrt(2.0 * self.r / s.alpha))
        base = s.set.bounding_radius()
        return float(base + self.r / s.strength + s.eps)


# ---------------------------------------------------------------------------
# sandwich checks


def hessian_sandwich_check(surrogate, t, points, tol=1e-3, half_nodes=22, gh_order=48):
    """Eigenvalue window check for the evolved surrogate potential.

    For each point, the Hessian of -ln P_t h must have eigenvalues inside
    [C(alpha) e^{-t}, 2 (1 ^ t)^{-1} e^{-t}] up to ``tol``; C(alpha) =
    min(e^{-3} alpha, 2^{-6} e^{-3}).  Returns a list of row dicts.
    """
    if t <= 0:
        raise DomainError("t must be > 0")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lower = sandwich_lower_rate(surrogate.alpha) * np.exp(-t)
    upper = 2.0 / min(1.0, t) * np.exp(-t)
    _, _, hess = semigroup.grad_hess_many(surrogate, t, pts, half_nodes, gh_order)
    rows = []
    for x, h in zip(pts, hess):
        eigs = np.linalg.eigvalsh(h)
        rows.append(
            {
                "x": x.copy(),
                "potential": float(surrogate.potential(x)),
                "min_eig": float(eigs[0]),
                "max_eig": float(eigs[-1]),
                "lower_bound": float(lower),
                "upper_bound": float(upper),
                "ok": bool(eigs[0] >= lower - tol and eigs[-1] <= upper + tol),
            }
        )
    return rows


def indicator_sandwich_check(convex_set, alpha, u=None, tol=1e-9, half_nodes=26):
    """Surrogate-vs-indicator integral sandwich against a log-concave weight.

    Asserts the lower bound

        integral(h u d mu)  >=  (1 + 2 alpha)^{-n/2} integral(I_A u d mu),

    valid in every dimension, and reports the upper ratio
    integral(h u)/integral(I_A u) together with whether it is <= 4 (that
    companion bound only kicks in for large dimension, so it stays a
    diagnostic here).
    """
    n = convex_set.dim
    h = Surrogate(convex_set, alpha)
    factors_h = [h] if u is None else [h, u]
    lhs = fn.mu_expectation(factors_h, n, half_nodes=half_nodes)
    if u is None:
        base = gm.gaussian_factor_measure(convex_set, 0.0).value
    else:
        alpha_u, ind_u, smooth_u = fn._unwrap(u)
        if ind_u is None and not smooth_u:
            base = gm.gaussian_factor_measure(convex_set, alpha_u).value
        else:
            base = fn.mu_expectation([lc.Indicator(convex_set), u], n, half_nodes=half_nodes)
    lower = (1.0 + 2.0 * alpha) ** (-n / 2.0) * base
    ratio = lhs / base if base > 0 else np.inf
    return {
        "lhs": lhs,
        "indicator_integral": base,
        "lower_bound": lower,
        "holds": bool(lhs >= lower - tol),
        "upper_ratio": float(ratio),
        "upper_within_4": bool(ratio <= 4.0),
    }


def smoothed_indicator_sandwich_check(a_set, b_set, alpha, t, tol=1e-9, **kwargs):
    """Time-smoothed companion: surrogate correlation dominates the indicator one.

    Checks  phi_t(h_A, h_B) >= (1 + 2 alpha)^{-n} phi_t(I_A, I_B)  and reports
    the diagnostic upper ratio against 2^4 phi_t(I_A, I_B).
    """
    ha, hb = Surrogate(a_set, alpha), Surrogate(b_set, alpha)
    n = a_set.dim
    smooth = fn.phi(ha, hb, t, **kwargs).value
    plain = fn.phi(lc.Indicator(a_set), lc.Indicator(b_set), t, **kwargs).value
    lower = (1.0 + 2.0 * alpha) ** (-n) * plain
    return {
        "smoothed": smooth,
        "indicator": plain,
        "lower_bound": lower,
        "holds": bool(smooth >= lower - tol),
        "upper_ratio": float(smooth / plain) if plain > 0 else np.inf,
        "upper_within_16": bool(smooth <= 16.0 * plain + tol),
    }


def small_scale_smoothing_check(convex_set, r0, t0, trials=20, seed=0, tol=1e-9):
    """Two-sided bound on P_t of an indicator near the origin.

    For |x| <= r0 sqrt(n) and r0, t0 in (0, 1]:
    exp(-n r0^2 / t0) P_{t0} I_A(0) <= P_{t0} I_A(x) <= P_{t0} I_A(0).
    """
    n = convex_set.dim
    u = lc.Indicator(convex_set)
    rng = np.random.default_rng(seed)
    center = semigroup.apply(u, t0, np.zeros(n))
    lo_factor = np.exp(-(r0**2) * n / t0)
    xs = rng.standard_normal((trials, n))
    xs = xs / np.linalg.norm(xs, axis=1)[:, None] * (
        rng.uniform(0, r0 * np.sqrt(n), trials)[:, None]
    )
    vals = semigroup.apply_many(u, t0, xs)
    ok = np.all(vals <= center + tol) and np.all(vals >= lo_factor * center - tol)
    return {"center": center, "min": float(vals.min()), "max": float(vals.max()), "holds": bool(ok)}


# ---------------------------------------------------------------------------
# Poincare and isoperimetric checks for exp(-U) d mu_n


class HalfSpace:
    """One-sided constraint {<a, x> <= b}; not symmetric, used by the enlargement check."""

    shape = "halfspace"
    degenerate = False

    def __init__(self, dim, direction, offset):
        self.dim = int(dim)
        self.direction = np.asarray(direction, dtype=float)
        unit = np.linalg.norm(self.direction)
        if unit == 0:
            raise DomainError("direction must be nonzero")
        self._unit = self.direction / unit
        self.offset = float(offset) / unit  # offset in euclidean units

    def simplified(self):
        return self

    def contains(self, x, strict=False):
        pts, scalar = sets._as_points(x, self.dim)
        s = pts @ self._unit
        out = s < self.offset if strict else s <= self.offset
        return bool(out[0]) if scalar else out

    def distance(self, x):
        pts, scalar = sets._as_points(x, self.dim)
        d = np.maximum(pts @ self._unit - self.offset, 0.0)
        return float(d[0]) if scalar else d

    def bounding_radius(self):
        return np.inf

    def last_interval(self, prefix):
        k = self.dim - 1
        head = float(self._unit[:k] @ np.asarray(prefix, dtype=float))
        ak = self._unit[k]
        if abs(ak) > 1e-300:
            bound = (self.offset - head) / ak
            return (-np.inf, bound) if ak > 0 else (bound, np.inf)
        return (-np.inf, np.inf) if head <= self.offset else (1.0, -1.0)

    def first_axis_breakpoints(self):
        if self.dim >= 2 and np.all(self._unit[1:] == 0.0):
            return np.array([self.offset / self._unit[0]])
        return np.array([])

    def section_batch(self, prefixes):
        prefixes = np.atleast_2d(np.asarray(prefixes, dtype=float))
        out = np.array([self.last_interval(p) for p in prefixes])
        return out[:, 0], out[:, 1]

    def enlarged(self, r):
        return HalfSpace(self.dim, self._unit, self.offset + r)


def enlarged_set(convex_set, r):
    """The r-enlargement {x : rho_A(x) <= r} as a section-capable oracle."""
    if r < 0:
        raise DomainError("enlargement radius must be >= 0")
    if r == 0:
        return convex_set
    if isinstance(convex_set, HalfSpace):
        return convex_set.enlarged(r)
    s = convex_set.simplified()
    if isinstance(s, sets.Ball):
        return sets.Ball(s.dim, s.radius + r)
    if isinstance(s, sets.Slab):
        return sets.Slab(s.dim, s.direction, s.half_width + r * np.linalg.norm(s.direction))
    if isinstance(s, sets.FullSpace):
        return s
    return _Enlarged(s, r)


class _Enlarged:
    """Generic enlargement with sections found by convex bisection on the distance.

    Axis boxes get closed-form sections: the distance to a box is the
    euclidean norm of the per-axis overshoots, so the last coordinate solves
    a one-variable quadratic.
    """

    shape = "enlarged"
    degenerate = False

    def __init__(self, base, r):
        self.base = base
        self.r = float(r)
        self.dim = base.dim
        self._box = sets.axis_box_intervals(base)

    def simplified(self):
        return self

    def contains(self, x, strict=False):
        d = self.base.distance(x)
        return d < self.r if strict else d <= self.r

    def distance(self, x):
        return np.maximum(self.base.distance(x) - self.r, 0.0)

    def bounding_radius(self):
        return self.base.bounding_radius() + self.r

    def first_axis_breakpoints(self):
        if self._box is not None:
            lo, hi = self._box[0]
            if np.isfinite(hi):
                return np.array([lo - self.r, lo, hi, hi + self.r])
        return np.array([])

    def section_batch(self, prefixes):
        prefixes = np.atleast_2d(np.asarray(prefixes, dtype=float))
        if self._box is None:
            out = np.array([self._last_interval_search(p) for p in prefixes])
            return out[:, 0], out[:, 1]
        excess_sq = np.zeros(len(prefixes))
        for axis, (lo, hi) in enumerate(self._box[:-1]):
            over = np.maximum(prefixes[:, axis] - hi, 0.0) + np.maximum(lo - prefixes[:, axis], 0.0)
            excess_sq += over**2
        budget = self.r**2 - excess_sq
        lo_n, hi_n = self._box[-1]
        room = np.sqrt(np.maximum(budget, 0.0))
        lo_out = np.where(budget >= 0, lo_n - room, 1.0)
        hi_out = np.where(budget >= 0, hi_n + room, -1.0)
        return lo_out, hi_out

    def last_interval(self, prefix):
        if self._box is not None:
            lo, hi = self.section_batch(np.atleast_2d(prefix))
            return (float(lo[0]), float(hi[0]))
        return self._last_interval_search(prefix)

    def _last_interval_search(self, prefix):
        # g(t) = rho_base((prefix, t)) - r is convex in t; find its sublevel interval
        prefix = np.asarray(prefix, dtype=float)

        def g(t):
            return float(self.base.distance(np.concatenate([prefix, [t]]))) - self.r

        span = min(self.bounding_radius(), 40.0)
        lo_t, hi_t = -span, span
        # locate a feasible center by golden-section on the convex g
        a, b = lo_t, hi_t
        gr = 0.5 * (np.sqrt(5.0) - 1.0)
        c, d = b - gr * (b - a), a + gr * (b - a)
        gc, gd = g(c), g(d)
        for _ in range(120):
            if gc <= gd:
                b, d, gd = d, c, gc
                c = b - gr * (b - a)
                gc = g(c)
            else:
                a, c, gc = c, d, gd
                d = a + gr * (b - a)
                gd = g(d)
            if b - a < 1e-12:
                break
        center = 0.5 * (a + b)
        if g(center) > 0:
            return (1.0, -1.0)
        lo = _bisect_edge(g, center, lo_t)
        hi = _bisect_edge(g, center, hi_t)
        return (lo, hi)


def _bisect_edge(g, inside, outside):
    if g(outside) <= 0:
        return outside
    a, b = inside, outside
    for _ in range(80):
        mid = 0.5 * (a + b)
        if g(mid) <= 0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def _weight_nodes(weight, n, half_nodes=26):
    """Nodes/weights for integrating against exp(-U) d mu_n (unnormalized)."""
    factors = [] if weight is None else [weight]
    pts, wts = fn.mu_nodes(factors, n, half_nodes=half_nodes)
    vals = wts.copy()
    for f in factors:
        if f.indicator_set is None:
            vals *= f(pts)
    return pts, vals


def poincare_check(weight, test_fn, n, tol=1e-9, half_nodes=26):
    """Variance of the test function against its gradient energy under nu.

    nu is exp(-U) d mu_n normalized; ``weight`` is e^{-U} as a log-concave
    descriptor (None for U = 0).  Requires var(H) <= E|grad H|^2 + tol.
    """
    pts, wts = _weight_nodes(weight, n, half_nodes)
    z = float(np.sum(wts))
    hvals = test_fn(pts)
    mean = float(np.sum(wts * hvals)) / z
    variance = float(np.sum(wts * (hvals - mean) ** 2)) / z
    grads = test_fn.gradient(pts)
    energy = float(np.sum(wts * np.einsum("ij,ij->i", grads, grads))) / z
    return variance, energy, bool(variance <= energy + tol)


def nu_measure(weight, region, n, half_nodes=26):
    """nu(region) for nu = exp(-U) d mu_n normalized; region enters the panel layout."""
    factors = [lc.Indicator(region)] if weight is None else [lc.Indicator(region), weight]
    raw = fn.mu_expectation(factors, n, half_nodes=half_nodes)
    if weight is None:
        return raw
    z = fn.mu_expectation([weight], n, half_nodes=half_nodes)
    return raw / z


def isoperimetric_check(weight, region, r, n, tol=1e-9, half_nodes=26):
    """Gaussian-type enlargement bound nu(A[r]) >= Phi(a + r), a = Phi^{-1}(nu(A))."""
    if r < 0:
        raise DomainError("r must be >= 0")
    nu_a = nu_measure(weight, region, n, half_nodes)
    a = float(_norm_ppf(nu_a))
    lhs = nu_measure(weight, enlarged_set(region, r), n, half_nodes)
    rhs = float(quadrule.norm_cdf(a + r))
    return lhs, rhs, bool(lhs >= rhs - tol)


def _norm_ppf(p):
    from scipy.special import ndtri

    return ndtri(np.clip(p, 1e-300, 1 - 1e-16))


# test functions for the variance check -------------------------------------


class CoordinateFn:
    """H(x) = x_i."""

    def __init__(self, dim, axis=0):
        self.dim, self.axis = dim, axis

    def __call__(self, pts):
        return np.atleast_2d(pts)[:, self.axis]

    def gradient(self, pts):
        g = np.zeros_like(np.atleast_2d(pts))
        g[:, self.axis] = 1.0
        return g


class SquaredNormFn:
    """H(x) = |x|^2."""

    def __init__(self, dim):
        self.dim = dim

    def __call__(self, pts):
        pts = np.atleast_2d(pts)
        return np.einsum("ij,ij->i", pts, pts)

    def gradient(self, pts):
        return 2.0 * np.atleast_2d(pts)

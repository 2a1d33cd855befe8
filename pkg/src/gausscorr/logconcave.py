"""Evaluable even log-concave functions.

Descriptors carry quadrature hints alongside evaluation: indicator functions
expose their set, radial functions expose the radii where they kink, and
axis-aligned kinks are exposed per coordinate.  The hints let integration
routines place panel edges exactly on the non-smooth locus.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, DomainError, EvennessError
from . import sets as sets_mod


class LogConcaveFunction:
    """Base class: an even log-concave function on R^n."""

    dim: int

    def __call__(self, x):
        pts, scalar = sets_mod._as_points(x, self.dim)
        vals = self._values(pts)
        return float(vals[0]) if scalar else vals

    def _values(self, pts):
        raise NotImplementedError

    # quadrature hints ------------------------------------------------------

    @property
    def indicator_set(self):
        """The underlying set when this function is an indicator, else None."""
        return None

    @property
    def is_radial(self):
        return False

    def radial_breaks(self):
        """Radii where a radial descriptor is non-smooth."""
        return ()

    def axis_breaks(self, axis):
        """Kink positions along a coordinate axis (for axis-aligned kinks)."""
        return ()

    def support_radius(self):
        """Radius of a centered ball containing the support (inf if full)."""
        return np.inf


class Indicator(LogConcaveFunction):
    def __init__(self, convex_set):
        self.set = convex_set
        self.dim = convex_set.dim

    def _values(self, pts):
        return self.set.contains(pts).astype(float)

    @property
    def indicator_set(self):
        return self.set

    @property
    def is_radial(self):
        return isinstance(self.set.simplified(), (sets_mod.Ball, sets_mod.FullSpace))

    def radial_breaks(self):
        s = self.set.simplified()
        return (s.radius,) if isinstance(s, sets_mod.Ball) else ()

    def axis_breaks(self, axis):
        s = self.set.simplified()
        if axis == 0:
            return tuple(s.first_axis_breakpoints())
        return ()

    def support_radius(self):
        return self.set.bounding_radius()


class GaussianFactor(LogConcaveFunction):
    """exp(-alpha |x|^2 / 2) for alpha > 0."""

    def __init__(self, dim, alpha):
        if alpha <= 0:
            raise DomainError("alpha must be > 0")
        self.dim = int(dim)
        self.alpha = float(alpha)

    def _values(self, pts):
        return np.exp(-0.5 * self.alpha * np.einsum("ij,ij->i", pts, pts))

    def gradient(self, x):
        pts, scalar = sets_mod._as_points(x, self.dim)
        g = -self.alpha * pts * self._values(pts)[:, None]
        return g[0] if scalar else g

    @property
    def is_radial(self):
        return True


class SmoothBump(LogConcaveFunction):
    """Compactly supported even mollifier-type bump.

    Value exp(1 - 1/(1 - |x/R|^2)) inside the centered ball of radius R and 0
    outside; smooth everywhere, log-concave, peak value 1 at the origin.  A
    nonzero ``center`` breaks evenness and is rejected by routines that
    require it.
    """

    def __init__(self, dim, radius, center=None):
        if radius <= 0:
            raise DomainError("bump radius must be > 0")
        self.dim = int(dim)
        self.radius = float(radius)
        self.center = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        if self.center.shape != (self.dim,):
            raise DimensionError("bump center must have length dim")

    @property
    def is_even(self):
        return bool(np.all(self.center == 0.0))

    def require_even(self):
        if not self.is_even:
            raise EvennessError("bump is shifted off the origin and is not even")

    def _values(self, pts):
        d = pts - self.center
        s = np.einsum("ij,ij->i", d, d) / self.radius**2
        out = np.zeros(len(pts))
        inside = s < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside]))
        return out

    def gradient(self, x):
        pts, scalar = sets_mod._as_points(x, self.dim)
        d = pts - self.center
        s = np.einsum("ij,ij->i", d, d) / self.radius**2
        out = np.zeros_like(pts)
        inside = s < 1.0
        vals = np.exp(1.0 - 1.0 / (1.0 - s[inside]))
        coef = -2.0 / self.radius**2 / (1.0 - s[inside]) ** 2 * vals
        out[inside] = coef[:, None] * d[inside]
        return out[0] if scalar else out

    @property
    def is_radial(self):
        return self.is_even

    def radial_breaks(self):
        return (self.radius,)

    def support_radius(self):
        return self.radius + float(np.linalg.norm(self.center))


class PointwiseProduct(LogConcaveFunction):
    """Pointwise product of log-concave factors (itself log-concave)."""

    def __init__(self, factors):
        dims = {f.dim for f in factors}
        if len(dims) != 1:
            raise DimensionError("product factors must share one dimension")
        self.factors = list(factors)
        self.dim = factors[0].dim

    def _values(self, pts):
        out = np.ones(len(pts))
        for f in self.factors:
            out *= f._values(pts)
        return out

    @property
    def indicator_set(self):
        indicator_sets = [f.indicator_set for f in self.factors if f.indicator_set is not None]
        if not indicator_sets:
            return None
        if len(indicator_sets) == 1:
            return indicator_sets[0]
        return sets_mod.Intersection(indicator_sets)

    @property
    def is_radial(self):
        return all(f.is_radial for f in self.factors)

    def radial_breaks(self):
        return tuple(b for f in self.factors for b in f.radial_breaks())

    def axis_breaks(self, axis):
        return tuple(b for f in self.factors for b in f.axis_breaks(axis))

    def support_radius(self):
        return min(f.support_radius() for f in self.factors)


class CustomFunction(LogConcaveFunction):
    """Adapter exposing a raw vectorized callable with quadrature hints.

    Used internally to push auxiliary integrands (gradient components,
    capped quadratics) through the smoothing machinery; the callable need
    not itself be log-concave.
    """

    def __init__(self, fn, dim, radial=False, radial_break_list=(), axis_break_lists=None,
                 support=np.inf):
        self._fn = fn
        self.dim = int(dim)
        self._radial = radial
        self._radial_breaks = tuple(radial_break_list)
        self._axis_breaks = axis_break_lists or {}
        self._support = support

    def _values(self, pts):
        return np.asarray(self._fn(pts), dtype=float)

    @property
    def is_radial(self):
        return self._radial

    def radial_breaks(self):
        return self._radial_breaks

    def axis_breaks(self, axis):
        return tuple(self._axis_breaks.get(axis, ()))

    def support_radius(self):
        return self._support


def spot_check_even(fn, rng, samples=64, tol=1e-10):
    """Raise EvennessError unless fn(x) == fn(-x) on sampled points."""
    x = rng.standard_normal((samples, fn.dim))
    if np.max(np.abs(fn(x) - fn(-x))) > tol:
        raise EvennessError("function is not even on sampled points")


def spot_check_log_concave(fn, rng, samples=128, tol=1e-10):
    """Sampled check of f(t x + (1-t) y) >= f(x)^t f(y)^(1-t).

    A zero endpoint value makes the right side zero, so those triples hold
    trivially and are skipped before taking logs.
    """
    x = rng.standard_normal((samples, fn.dim))
    y = rng.standard_normal((samples, fn.dim))
    t = rng.uniform(0.05, 0.95, samples)
    fx, fy = fn(x), fn(y)
    mid = fn(t[:, None] * x + (1.0 - t[:, None]) * y)
    active = (fx > 0) & (fy > 0)
    lhs = np.log(np.maximum(mid[active], 1e-300))
    rhs = t[active] * np.log(fx[active]) + (1.0 - t[active]) * np.log(fy[active])
    return bool(np.all(mid >= 0) and np.all(lhs >= rhs - tol))

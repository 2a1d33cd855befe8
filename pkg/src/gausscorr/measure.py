"""Standard Gaussian measure, the correlated pair density, and estimators.

The pair density on R^{2n} with mixing parameter lam in [0, 1) is

    f(x, y; lam) = (2 pi)^{-n} (1-lam^2)^{-n/2}
                   exp{-(|x|^2 + |y|^2 - 2 lam <x,y>) / (2 (1-lam^2))},

whose marginals are standard Gaussian and whose coordinatewise correlation
is lam.  Sampling uses the linear mixing representation Y = lam X + sqrt(1 -
lam^2) Z with X, Z independent standard normal, which is exact and O(n) per
draw.  lam = 1 is the singular diagonal limit Y = X and is never pushed
through the density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln

from . import quadrule, sets, streams
from .errors import BudgetError, DomainError, SingularDensityError

MC_DEFAULT = 200_000


@dataclass(frozen=True)
class Estimate:
    """Numeric result with provenance.

    ``std_error`` is zero exactly when the value came from a deterministic
    grid; for Monte Carlo it is the sample standard deviation over sqrt(n).
    """

    value: float
    std_error: float
    method: str  # "quadrature" | "mc" | "exact"
    n_used: int

    def tag(self):
        if self.method == "mc":
            return f"mc(samples={self.n_used})"
        if self.method == "quadrature":
            return f"quadrature(order={self.n_used})"
        return self.method


@dataclass(frozen=True)
class PairMeasure:
    """Correlated standard-Gaussian pair on R^n x R^n."""

    n: int
    lam: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise DomainError("mixing parameter must lie in [0, 1]")


def density_pair(pm, x, y):
    """Joint density of the correlated pair at (x, y); lam must be < 1."""
    if pm.lam >= 1.0:
        raise SingularDensityError("density is singular at lam = 1; use the diagonal path")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != pm.n or y.shape[-1] != pm.n:
        raise DomainError("points must have length n")
    lam = pm.lam
    one = 1.0 - lam * lam
    quad = (
        np.sum(x * x, axis=-1) + np.sum(y * y, axis=-1) - 2.0 * lam * np.sum(x * y, axis=-1)
    )
    return np.exp(-quad / (2.0 * one)) / ((2.0 * np.pi) ** pm.n * one ** (pm.n / 2.0))


def sample_pair(pm, rng, size=1):
    """Draw (X, Y) pairs; shapes (size, n)."""
    x = rng.standard_normal((size, pm.n))
    if pm.lam >= 1.0:
        return x, x.copy()
    z = rng.standard_normal((size, pm.n))
    y = pm.lam * x + np.sqrt(1.0 - pm.lam**2) * z
    return x, y


def gaussian_quadrature_grid(n, order, budget=quadrule.NODE_BUDGET):
    """Tensor Gauss-Hermite grid against mu_n; raises BudgetError when order^n is too big."""
    return quadrule.gauss_hermite_grid(n, order, budget)


# ---------------------------------------------------------------------------
# set measure


def measure(convex_set, method="auto", samples=MC_DEFAULT, seed=0, half_nodes=26):
    """Estimate mu_n of a symmetric convex set.

    ``method`` is one of "auto", "exact", "quadrature", "mc".  The automatic
    path uses closed forms where the descriptor admits one (balls via the
    chi-square law, slabs via the normal CDF, products multiplicatively),
    sectioned panel quadrature for dim <= 2, and Monte Carlo above that.
    """
    s = convex_set.simplified()
    if s.degenerate:
        return Estimate(0.0, 0.0, "exact", 0)
    if method in ("auto", "exact"):
        val = _measure_closed_form(s)
        if val is not None:
            return Estimate(val, 0.0, "exact", 0)
        if method == "exact":
            raise DomainError(f"no closed-form measure for shape {s.shape!r}")
    if method in ("auto", "quadrature") and s.dim <= 2:
        pts, wts = quadrule.region_nodes(s, half_nodes=half_nodes)
        return Estimate(float(np.sum(wts)), 0.0, "quadrature", len(wts))
    if method == "quadrature":
        raise BudgetError("sectioned quadrature supports dim <= 2; use mc")
    return _measure_mc(s, samples, seed)


def _measure_closed_form(s):
    if isinstance(s, sets.FullSpace):
        return 1.0
    if isinstance(s, sets.Ball):
        return float(stats.chi2.cdf(s.radius**2, df=s.dim))
    if isinstance(s, sets.Slab):
        width = s.half_width / np.linalg.norm(s.direction)
        return float(2.0 * quadrule.norm_cdf(width) - 1.0)
    if isinstance(s, sets.Product):
        vals = [_measure_closed_form(f) for f in s.factors]
        if any(v is None for v in vals):
            return None
        return float(np.prod(vals))
    if isinstance(s, sets.Rotated):
        return _measure_closed_form(s.inner)
    return None


def _measure_mc(s, samples, seed):
    hits = 0
    total = 0
    acc = 0.0
    for b, size in enumerate(streams.block_sizes(samples)):
        rng = streams.stream(seed, "measure", s.shape, b)
        x = rng.standard_normal((size, s.dim))
        inside = s.contains(x)
        hits += int(np.sum(inside))
        total += size
        acc += float(np.sum(inside))
    p = hits / total
    se = np.sqrt(max(p * (1.0 - p), 1e-300) / total)
    return Estimate(p, se, "mc", total)


def gaussian_factor_measure(convex_set, alpha, **kwargs):
    """Integral of exp(-alpha |x|^2 / 2) over the set against mu_n.

    Reduces exactly to (1 + alpha)^{-n/2} * mu_n(sqrt(1 + alpha) * set).
    """
    if alpha < 0:
        raise DomainError("alpha must be >= 0")
    n = convex_set.dim
    scaled = sets.scale_set(convex_set, np.sqrt(1.0 + alpha))
    base = measure(scaled, **kwargs)
    factor = (1.0 + alpha) ** (-n / 2.0)
    return Estimate(factor * base.value, factor * base.std_error, base.method, base.n_used)


# ---------------------------------------------------------------------------
# closed forms and checks


def sphere_surface_measure(n, r):
    """Surface measure of the sphere of radius r in R^n: 2 pi^{n/2} / Gamma(n/2) * r^{n-1}."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if r < 0:
        raise DomainError("r must be >= 0")
    if r == 0.0:
        return 0.0
    return float(2.0 * np.pi ** (n / 2.0) / np.exp(gammaln(n / 2.0)) * r ** (n - 1))


def gaussian_tail_bound_check(s):
    """One-sided tail mass mu_1([s, inf)) against the classical bound.

    Returns (tail, bound) with tail <= bound = (2 pi)^{-1/2} s^{-1} e^{-s^2/2}.
    """
    if s <= 0:
        raise DomainError("s must be > 0")
    tail = float(quadrule.norm_cdf(-s))
    bound = float(np.exp(-0.5 * s * s) / (s * np.sqrt(2.0 * np.pi)))
    return tail, bound

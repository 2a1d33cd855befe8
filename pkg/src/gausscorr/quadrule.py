"""Quadrature building blocks.

Three node families cover every deterministic integral in the package:

* tensor Gauss-Hermite grids for smooth integrands against the standard
  Gaussian measure;
* composite tanh-sinh (double-exponential) panels between descriptor
  breakpoints, which keep spectral accuracy even when a panel endpoint
  carries a square-root kink (ball sections do);
* closed-form truncated-normal moment tables, so the innermost coordinate
  of every sectioned integral is integrated exactly.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import ndtr  # Phi, vectorized and accurate in the tails

from .errors import BudgetError

TRUNC = 9.3  # |x| beyond this carries ~1e-20 of standard normal mass
NODE_BUDGET = 10_000_000


def norm_pdf(x):
    return np.exp(-0.5 * np.square(x)) / np.sqrt(2.0 * np.pi)


def norm_cdf(x):
    return ndtr(x)


# ---------------------------------------------------------------------------
# Gauss-Hermite (probabilists', weight = standard normal density)


@lru_cache(maxsize=64)
def gauss_hermite(order):
    """Nodes and weights integrating exactly against N(0,1) up to degree 2*order-1."""
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    return nodes * np.sqrt(2.0), weights / np.sqrt(np.pi)


def gauss_hermite_grid(n, order, budget=NODE_BUDGET):
    """Tensor Gauss-Hermite grid on R^n: points (order^n, n), weights summing to 1."""
    if order < 1:
        raise BudgetError("quadrature order must be >= 1")
    total = order**n
    if total > budget:
        raise BudgetError(
            f"tensor grid would need {total} nodes (> budget {budget}); use the MC path"
        )
    x, w = gauss_hermite(order)
    grids = np.meshgrid(*([x] * n), indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.ones(total)
    for axis in range(n):
        weights *= w[np.meshgrid(*([np.arange(order)] * n), indexing="ij")[axis].ravel()]
    return points, weights


# ---------------------------------------------------------------------------
# tanh-sinh panels


@lru_cache(maxsize=8)
def _tanh_sinh_unit(half_nodes):
    h = 3.25 / half_nodes
    t = h * np.arange(-half_nodes, half_nodes + 1)
    u = 0.5 * np.pi * np.sinh(t)
    x = np.tanh(u)
    w = h * 0.5 * np.pi * np.cosh(t) / np.cosh(u) ** 2
    keep = 1.0 - np.abs(x) > 1e-17
    return x[keep], w[keep]


def panel_rule(a, b, half_nodes=26):
    """tanh-sinh nodes/weights on [a, b]; robust to endpoint kinks."""
    x, w = _tanh_sinh_unit(half_nodes)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def split_panels(edges, max_width):
    """Refine a sorted edge list so no panel is wider than max_width."""
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a <= 1e-15:
            continue
        pieces = max(1, int(np.ceil((b - a) / max_width)))
        out.extend(np.linspace(a, b, pieces + 1)[:-1])
    out.append(edges[-1])
    return np.asarray(out)


def composite_rule(lo, hi, breakpoints=(), max_width=np.inf, half_nodes=26):
    """Composite tanh-sinh rule on [lo, hi] with panel edges at the breakpoints."""
    if hi <= lo:
        return np.array([]), np.array([])
    edges = [lo, hi]
    for bp in np.atleast_1d(breakpoints):
        if lo < bp < hi:
            edges.append(float(bp))
    edges = split_panels(np.unique(edges), max_width)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = panel_rule(a, b, half_nodes)
        xs.append(x)
        ws.append(w)
    if not xs:
        return np.array([]), np.array([])
    return np.concatenate(xs), np.concatenate(ws)


# ---------------------------------------------------------------------------
# truncated-normal moments
#
# I_k(a, b) = integral of t^k phi(t) dt over [a, b], exact for k <= 4.


def _phi_terms(t):
    p = norm_pdf(t)
    return p, t * p, (t * t + 2.0) * p, (t**3 + 3.0 * t) * p


def truncated_std_moments(a, b, max_deg):
    """I_k(a, b) for k = 0..max_deg (max 4), vectorized over a, b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a_c = np.clip(a, -TRUNC - 2, TRUNC + 2)
    b_c = np.clip(b, -TRUNC - 2, TRUNC + 2)
    pa0, pa1, pa2, pa3 = _phi_terms(a_c)
    pb0, pb1, pb2, pb3 = _phi_terms(b_c)
    cdf = norm_cdf(b_c) - norm_cdf(a_c)
    out = [cdf]
    if max_deg >= 1:
        out.append(pa0 - pb0)
    if max_deg >= 2:
        out.append(cdf + pa1 - pb1)
    if max_deg >= 3:
        out.append(pa2 - pb2)
    if max_deg >= 4:
        out.append(3.0 * cdf + pa3 - pb3)
    empty = b <= a
    table = np.stack(out, axis=-1)
    table[empty] = 0.0
    return table


def normal_interval_moments(lo, hi, mean, sd, max_deg):
    """E[Y^k 1{lo <= Y <= hi}] for Y ~ N(mean, sd^2), k = 0..max_deg (max 4)."""
    lo_s = (np.asarray(lo, dtype=float) - mean) / sd
    hi_s = (np.asarray(hi, dtype=float) - mean) / sd
    base = truncated_std_moments(lo_s, hi_s, max_deg)
    # binomial expansion of (mean + sd*t)^k
    shape = np.broadcast_shapes(np.shape(mean), base.shape[:-1])
    out = np.zeros(shape + (max_deg + 1,))
    mean_b = np.broadcast_to(mean, shape)
    for k in range(max_deg + 1):
        acc = np.zeros(shape)
        for j in range(k + 1):
            coef = _binom(k, j) * mean_b ** (k - j) * sd**j
            acc = acc + coef * base[..., j]
        out[..., k] = acc
    return out


@lru_cache(maxsize=32)
def _binom(n, k):
    from math import comb

    return float(comb(n, k))


def gaussian_moments_1d(mean, var, max_deg):
    """Raw moments E[Y^k] of N(mean, var) for k = 0..max_deg (max 4)."""
    m, v = np.asarray(mean, dtype=float), var
    out = [np.ones_like(m)]
    if max_deg >= 1:
        out.append(m)
    if max_deg >= 2:
        out.append(m**2 + v)
    if max_deg >= 3:
        out.append(m**3 + 3 * m * v)
    if max_deg >= 4:
        out.append(m**4 + 6 * m**2 * v + 3 * v**2)
    return np.stack(out, axis=-1)


# ---------------------------------------------------------------------------
# nodes over a sectioned convex region, weighted by the Gaussian density
#
# In one dimension the set is an interval; in two dimensions the outer
# coordinate runs over descriptor panels while the section in the inner
# coordinate is itself panelled.  Weights include the Gaussian density, so
# summing f(points) * weights approximates the integral of f over the set
# against mu_n.


def region_nodes(convex_set, half_nodes=26, max_width=None, extra_breaks0=(), extra_breaks1=()):
    n = convex_set.dim
    if n == 1:
        lo, hi = convex_set.last_interval(np.empty(0))
        lo, hi = max(lo, -TRUNC), min(hi, TRUNC)
        if hi <= lo:
            return np.zeros((0, 1)), np.zeros(0)
        bps = np.concatenate([convex_set.first_axis_breakpoints(), np.atleast_1d(extra_breaks0)])
        x, w = composite_rule(lo, hi, bps, max_width or np.inf, half_nodes)
        return x[:, None], w * norm_pdf(x)
    if n == 2:
        return _region_nodes_2d(convex_set, half_nodes, max_width, extra_breaks0, extra_breaks1)
    raise BudgetError("sectioned region nodes support dim <= 2")


def _region_nodes_2d(convex_set, half_nodes, max_width, extra_breaks0, extra_breaks1):
    from . import sets as sets_mod

    extent = min(sets_mod.first_axis_extent(convex_set), TRUNC)
    bps = np.concatenate([convex_set.first_axis_breakpoints(), np.atleast_1d(extra_breaks0)])
    x1, w1 = composite_rule(-extent, extent, bps, max_width or 3.0, half_nodes)
    if len(x1) == 0:
        return np.zeros((0, 2)), np.zeros(0)
    lo_all, hi_all = convex_set.section_batch(x1[:, None])
    lo_all = np.maximum(lo_all, -TRUNC)
    hi_all = np.minimum(hi_all, TRUNC)
    pts, wts = [], []
    for xi, wi, lo, hi in zip(x1, w1, lo_all, hi_all):
        if hi <= lo:
            continue
        x2, w2 = composite_rule(lo, hi, extra_breaks1, max_width or 3.0, half_nodes)
        pts.append(np.stack([np.full_like(x2, xi), x2], axis=1))
        wts.append(wi * norm_pdf(xi) * w2 * norm_pdf(x2))
    if not pts:
        return np.zeros((0, 2)), np.zeros(0)
    return np.concatenate(pts), np.concatenate(wts)


def box_region_nodes(intervals, half_nodes=26, max_width=3.0, extra_breaks=None):
    """Tensor panel nodes over an axis-aligned box with Gaussian weight (any small n)."""
    rules = []
    total = 1
    for axis, (lo, hi) in enumerate(intervals):
        lo, hi = max(lo, -TRUNC), min(hi, TRUNC)
        if hi <= lo:
            n = len(intervals)
            return np.zeros((0, n)), np.zeros(0)
        bps = () if extra_breaks is None else extra_breaks[axis]
        x, w = composite_rule(lo, hi, bps, max_width, half_nodes)
        rules.append((x, w * norm_pdf(x)))
        total *= len(x)
    if total > NODE_BUDGET:
        raise BudgetError(f"box grid would need {total} nodes")
    xs = [r[0] for r in rules]
    ws = [r[1] for r in rules]
    grids = np.meshgrid(*xs, indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.ones(points.shape[0])
    idx = np.meshgrid(*[np.arange(len(x)) for x in xs], indexing="ij")
    for axis, w in enumerate(ws):
        weights *= w[idx[axis].ravel()]
    return points, weights


def polar_nodes(radial_breaks, r_max=TRUNC, half_nodes=26, n_theta=96, max_width=1.2):
    """Polar grid on R^2 with Gaussian weight, panel edges at the given radii."""
    edges = [0.0] + [float(r) for r in np.atleast_1d(radial_breaks) if 0 < r < r_max] + [r_max]
    edges = split_panels(np.unique(edges), max_width)
    r, wr = np.array([]), np.array([])
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = panel_rule(a, b, half_nodes)
        r, wr = np.concatenate([r, x]), np.concatenate([wr, w])
    theta = (np.arange(n_theta) + 0.5) * (2 * np.pi / n_theta)
    wt = 2 * np.pi / n_theta
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    pts = np.stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()], axis=1)
    dens = rr.ravel() * np.exp(-0.5 * rr.ravel() ** 2) / (2 * np.pi)
    wts = np.repeat(wr, n_theta) * wt * dens
    return pts, wts


def axis_panel_nodes(breaks_per_axis, half_nodes=26, max_width=3.0):
    """Tensor tanh-sinh panels over R^n (n small) with Gaussian weight."""
    rules = []
    for bps in breaks_per_axis:
        x, w = composite_rule(-TRUNC, TRUNC, bps, max_width, half_nodes)
        rules.append((x, w * norm_pdf(x)))
    if len(rules) == 1:
        return rules[0][0][:, None], rules[0][1]
    xs = [r[0] for r in rules]
    ws = [r[1] for r in rules]
    grids = np.meshgrid(*xs, indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.ones(points.shape[0])
    idx = np.meshgrid(*[np.arange(len(x)) for x in xs], indexing="ij")
    for axis, w in enumerate(ws):
        weights *= w[idx[axis].ravel()]
    return points, weights

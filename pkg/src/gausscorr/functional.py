"""The two-point correlation functional and its mixing-parameter derivatives.

For even log-concave u, v on R^n and lam in [0, 1), the functional is

    psi(u, v; lam) = E[ u(X) v(Y) ],   (X, Y) the lam-correlated Gaussian pair,

with the diagonal limit psi(u, v; 1) = E[ u(X) v(X) ].  The time
parametrization is phi(u, v; t) = psi(u, v; e^{-t/2}).

Quadrature evaluates the mixing representation Y = lam X + s Z, s =
sqrt(1 - lam^2): an outer integral over X against mu_n and an inner Gaussian
smoothing of v around lam X.  The inner integral is closed form whenever v is
an indicator with section structure (truncated-normal moments) or carries
Gaussian factors (conjugate tilt), so the engine stays accurate arbitrarily
close to the diagonal.  Derivatives in lam integrate the same representation
against polynomial weights in y:

    d/dlam   weight: (-lam(|x|^2+|y|^2) + (1+lam^2)<x,y> + n lam(1-lam^2)) / (1-lam^2)^2
    d2/dlam2 weight: (first)^2 + (-(1+3lam^2)(|x|^2+|y|^2) + 2lam(3+lam^2)<x,y>
                      + n(1-lam^4)) / (1-lam^2)^3
"""

from __future__ import annotations

import numpy as np

from . import logconcave as lc
from . import measure as gm
from . import quadrule, sets, streams
from .errors import (
    BudgetError,
    DegenerateSetError,
    DimensionError,
    DomainError,
    ResolutionError,
)

# ---------------------------------------------------------------------------
# polynomials in y with per-outer-node coefficients


def poly_one(n):
    return {(0,) * n: 1.0}


def poly_mul(p1, p2):
    out = {}
    for e1, c1 in p1.items():
        for e2, c2 in p2.items():
            key = tuple(a + b for a, b in zip(e1, e2))
            term = c1 * c2
            out[key] = out.get(key, 0.0) + term
    return out


def poly_add(p1, p2):
    out = dict(p1)
    for e, c in p2.items():
        out[e] = out.get(e, 0.0) + c
    return out


def _axis_exponent(n, axis, power):
    e = [0] * n
    e[axis] = power
    return tuple(e)


def dlambda_weight_poly(n, lam, x):
    """First-derivative weight as a polynomial in y; coefficients per x row."""
    one = 1.0 - lam * lam
    denom = one * one
    xsq = np.einsum("ij,ij->i", x, x)
    poly = {(0,) * n: (-lam * xsq + n * lam * one) / denom}
    for i in range(n):
        poly[_axis_exponent(n, i, 1)] = (1.0 + lam * lam) * x[:, i] / denom
        poly[_axis_exponent(n, i, 2)] = np.full(len(x), -lam / denom)
    return poly


def d2lambda_weight_poly(n, lam, x):
    """Second-derivative weight: (first weight)^2 + its lam-derivative."""
    one = 1.0 - lam * lam
    xsq = np.einsum("ij,ij->i", x, x)
    h = dlambda_weight_poly(n, lam, x)
    dh = {(0,) * n: (-(1.0 + 3 * lam**2) * xsq + n * (1.0 - lam**4)) / one**3}
    for i in range(n):
        dh[_axis_exponent(n, i, 1)] = 2 * lam * (3 + lam * lam) * x[:, i] / one**3
        dh[_axis_exponent(n, i, 2)] = np.full(len(x), -(1.0 + 3 * lam**2) / one**3)
    return poly_add(poly_mul(h, h), dh)


def eval_poly(poly, y):
    """Evaluate a y-polynomial at sample points y of shape (..., n)."""
    out = 0.0
    for exps, coef in poly.items():
        term = np.ones(y.shape[:-1])
        for axis, p in enumerate(exps):
            if p:
                term = term * y[..., axis] ** p
        out = out + coef * term
    return out


# ---------------------------------------------------------------------------
# inner smoothing: E[ v(Y) * poly(Y) ] for Y ~ N(center, s^2 I)


def _unwrap(v):
    """Split v into (total gaussian-factor alpha, indicator set, leftover smooth factors)."""
    alpha = 0.0
    ind_sets = []
    smooth = []
    stack = [v]
    while stack:
        f = stack.pop()
        if isinstance(f, lc.PointwiseProduct):
            stack.extend(f.factors)
        elif isinstance(f, lc.GaussianFactor):
            alpha += f.alpha
        elif isinstance(f, lc.Indicator):
            ind_sets.append(f.set)
        else:
            smooth.append(f)
    ind = None
    if len(ind_sets) == 1:
        ind = ind_sets[0]
    elif len(ind_sets) > 1:
        ind = sets.Intersection(ind_sets)
    if ind is not None and isinstance(ind.simplified(), sets.FullSpace):
        ind = None
    return alpha, ind, smooth


def smoothed_polys(v, centers, s, polys, half_nodes=18, gh_order=48):
    """E[v(Y) poly(Y)] for Y ~ N(center, s^2 I), for several y-polynomials at once.

    ``polys`` maps names to polynomials; returns a dict of arrays over center
    rows.  The moment tables (closed-form for indicators with sections and
    for Gaussian factors, shared break-aligned grids otherwise) are built once
    and reused across the polynomials.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    n = centers.shape[1]
    if v.dim != n:
        raise DimensionError("function dimension does not match centers")
    deg = max((sum(e) for poly in polys.values() for e in poly), default=0)
    alpha, ind, smooth = _unwrap(v)

    if smooth:
        return _smoothed_numeric_polys(v, centers, s, polys, half_nodes, gh_order)

    # conjugate gaussian tilt
    if alpha > 0.0:
        shrink = 1.0 + alpha * s * s
        mass = shrink ** (-n / 2.0) * np.exp(
            -0.5 * alpha * np.einsum("ij,ij->i", centers, centers) / shrink
        )
        tilted = centers / shrink
        s_eff = s / np.sqrt(shrink)
    else:
        mass = np.ones(len(centers))
        tilted = centers
        s_eff = s

    if ind is None:
        tables = quadrule.gaussian_moments_1d(tilted, s_eff**2, deg)  # (M, n, deg+1)
        return {k: mass * _assemble_separable(p, tables) for k, p in polys.items()}

    box = sets.axis_box_intervals(ind)
    if box is not None:
        tables = np.stack(
            [
                quadrule.normal_interval_moments(lo, hi, tilted[:, i], s_eff, deg)
                for i, (lo, hi) in enumerate(box)
            ],
            axis=1,
        )
        return {k: mass * _assemble_separable(p, tables) for k, p in polys.items()}

    if n == 1:
        lo, hi = ind.last_interval(np.empty(0))
        table = quadrule.normal_interval_moments(lo, hi, tilted[:, 0], s_eff, deg)
        out = {}
        for k, poly in polys.items():
            vals = np.zeros(len(centers))
            for (p,), coef in poly.items():
                vals += coef * table[:, p]
            out[k] = mass * vals
        return out

    if n == 2:
        tabled = _sectioned_tables_2d(ind, tilted, s_eff, polys, half_nodes)
        return {k: mass * vals for k, vals in tabled.items()}

    return _smoothed_numeric_polys(v, centers, s, polys, half_nodes, gh_order)


def smoothed_expectation(v, centers, s, poly=None, half_nodes=18, gh_order=48):
    """E[v(Y) poly(Y)] for Y ~ N(center, s^2 I), vectorized over center rows."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    poly = poly if poly is not None else poly_one(centers.shape[1])
    return smoothed_polys(v, centers, s, {"_": poly}, half_nodes, gh_order)["_"]


def _assemble_separable(poly, tables):
    """Combine per-coordinate moment tables (M, n, deg+1) under a y-polynomial."""
    m = tables.shape[0]
    out = np.zeros(m)
    for exps, coef in poly.items():
        term = np.ones(m)
        for axis, p in enumerate(exps):
            term = term * tables[:, axis, p]
        out += coef * term
    return out


def _sectioned_tables_2d(ind, centers, s, polys, half_nodes):
    """Joint moments E[y1^p y2^q; Y in set] via panels in y1, exact in y2."""
    deg = max((sum(e) for poly in polys.values() for e in poly), default=0)
    extent = min(sets.first_axis_extent(ind), quadrule.TRUNC + np.max(np.abs(centers)))
    # snap the window and panel width to a fixed lattice so the layout is
    # stable under tiny parameter perturbations (finite differences rely on it)
    snap = 0.125
    lo_glob = max(np.floor((np.min(centers[:, 0]) - quadrule.TRUNC * s) / snap) * snap, -extent)
    hi_glob = min(np.ceil((np.max(centers[:, 0]) + quadrule.TRUNC * s) / snap) * snap, extent)
    out = {k: np.zeros(len(centers)) for k in polys}
    if hi_glob <= lo_glob:
        return out
    width_raw = max(4.0 * s, 0.05)
    width = 0.0625 * 2.0 ** np.ceil(np.log2(width_raw / 0.0625))
    y1, w1 = quadrule.composite_rule(
        lo_glob, hi_glob, ind.first_axis_breakpoints(), max_width=width, half_nodes=half_nodes
    )
    sec_lo, sec_hi = ind.section_batch(y1[:, None])
    section = np.stack([sec_lo, sec_hi], axis=1)
    keep = section[:, 0] <= section[:, 1]
    y1, w1, section = y1[keep], w1[keep], section[keep]
    if len(y1) == 0:
        return out
    powers = np.stack([y1**p for p in range(deg + 1)], axis=1)  # (K, deg+1)
    chunk = max(64, int(8e6 / max(len(y1), 1)))
    for start in range(0, len(centers), chunk):
        sl = slice(start, min(start + chunk, len(centers)))
        c = centers[sl]
        dens = w1[None, :] * quadrule.norm_pdf((y1[None, :] - c[:, 0:1]) / s) / s  # (m, K)
        mom2 = quadrule.normal_interval_moments(
            section[None, :, 0], section[None, :, 1], c[:, 1:2], s, deg
        )  # (m, K, deg+1)
        table = np.einsum("mk,kp,mkq->mpq", dens, powers, mom2)
        for k, poly in polys.items():
            vals = np.zeros(c.shape[0])
            for (p, q), coef in poly.items():
                coef_sl = coef[sl] if isinstance(coef, np.ndarray) else coef
                vals += coef_sl * table[:, p, q]
            out[k][sl] = vals
    return out


def _raw_grid_for(v, centers, s, half_nodes):
    """Shared evaluation grid aligned to the kinks of v, or None.

    Returns (points (K, n), raw weights) without any density factor; the
    caller supplies the kernel density per center.
    """
    n = centers.shape[1]
    pad = quadrule.TRUNC * s
    if n == 1:
        breaks = list(v.axis_breaks(0)) + [b for r in v.radial_breaks() for b in (-r, r)]
        lo = np.min(centers[:, 0]) - pad
        hi = np.max(centers[:, 0]) + pad
        sup = v.support_radius()
        lo, hi = max(lo, -sup), min(hi, sup)
        if hi <= lo:
            return np.zeros((0, 1)), np.zeros(0)
        x, w = quadrule.composite_rule(lo, hi, breaks, max_width=max(4.0 * s, 0.05), half_nodes=half_nodes)
        return x[:, None], w
    if n == 2 and v.is_radial:
        r_max = min(float(np.max(np.linalg.norm(centers, axis=1))) + pad, v.support_radius())
        c_max = float(np.max(np.linalg.norm(centers, axis=1)))
        n_theta = int(min(max(96, 24 * (1.0 + c_max / max(s, 1e-6))), 1600))
        edges = quadrule.split_panels(
            np.unique([0.0] + [r for r in v.radial_breaks() if 0 < r < r_max] + [r_max]),
            max(4.0 * s, 0.05),
        )
        rs, wrs = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            x, w = quadrule.panel_rule(a, b, half_nodes)
            rs.append(x)
            wrs.append(w)
        r = np.concatenate(rs)
        wr = np.concatenate(wrs)
        theta = (np.arange(n_theta) + 0.5) * (2 * np.pi / n_theta)
        rr, tt = np.meshgrid(r, theta, indexing="ij")
        pts = np.stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()], axis=1)
        wts = (np.repeat(wr * r, n_theta)) * (2 * np.pi / n_theta)
        return pts, wts
    if n == 2:
        breaks0 = list(v.axis_breaks(0)) + [b for r in v.radial_breaks() for b in (-r, r)]
        breaks1 = list(v.axis_breaks(1)) + [b for r in v.radial_breaks() for b in (-r, r)]
        if not (breaks0 or breaks1):
            return None
        rules = []
        sup = v.support_radius()
        for axis, breaks in ((0, breaks0), (1, breaks1)):
            lo = max(np.min(centers[:, axis]) - pad, -sup)
            hi = min(np.max(centers[:, axis]) + pad, sup)
            if hi <= lo:
                return np.zeros((0, 2)), np.zeros(0)
            x, w = quadrule.composite_rule(lo, hi, breaks, max_width=max(4.0 * s, 0.05), half_nodes=half_nodes)
            rules.append((x, w))
        g0, g1 = np.meshgrid(rules[0][0], rules[1][0], indexing="ij")
        pts = np.stack([g0.ravel(), g1.ravel()], axis=1)
        wts = np.outer(rules[0][1], rules[1][1]).ravel()
        return pts, wts
    return None


def _radial_rice_values(v, centers, s, half_nodes):
    """E[v(Y)] for radial v and Y ~ N(c, s^2 I_2) via the radial (Rice) density.

    One shared rho grid serves every center; the Bessel factor is evaluated
    in its exponentially scaled form for stability.
    """
    from scipy.special import i0e

    radii = np.linalg.norm(centers, axis=1)
    pad = quadrule.TRUNC * s
    r_hi = min(float(np.max(radii)) + pad, v.support_radius())
    r_lo = max(float(np.min(radii)) - pad, 0.0)
    if r_hi <= r_lo:
        return np.zeros(len(centers))
    breaks = [b for b in v.radial_breaks() if r_lo < b < r_hi]
    rho, w = quadrule.composite_rule(r_lo, r_hi, breaks, max_width=max(4.0 * s, 0.05),
                                     half_nodes=half_nodes)
    vals = v(np.stack([rho, np.zeros_like(rho)], axis=1))
    base = w * vals * rho / (s * s)
    out = np.zeros(len(centers))
    chunk = max(64, int(8e6 / max(len(rho), 1)))
    for start in range(0, len(centers), chunk):
        sl = slice(start, min(start + chunk, len(centers)))
        r = radii[sl][:, None]
        kernel = i0e(rho[None, :] * r / (s * s)) * np.exp(-0.5 * (rho[None, :] - r) ** 2 / (s * s))
        out[sl] = kernel @ base
    return out


def _smoothed_numeric_polys(v, centers, s, polys, half_nodes, gh_order):
    n = centers.shape[1]
    if (
        n == 2
        and getattr(v, "is_radial", False)
        and all(set(p.keys()) == {(0, 0)} for p in polys.values())
    ):
        vals = _radial_rice_values(v, centers, s, half_nodes)
        return {k: p[(0, 0)] * vals for k, p in polys.items()}
    grid = _raw_grid_for(v, centers, s, half_nodes)
    out = {k: np.zeros(len(centers)) for k in polys}
    if grid is not None:
        pts, wts = grid
        if len(pts) == 0:
            return out
        base = wts * v(pts)  # (K,)
        mono_exps = sorted({e for poly in polys.values() for e in poly})
        mono = np.stack(
            [base * np.prod([pts[:, a] ** p for a, p in enumerate(e)], axis=0) for e in mono_exps],
            axis=1,
        )  # (K, E)
        chunk = max(64, int(8e6 / max(len(pts), 1)))
        for start in range(0, len(centers), chunk):
            sl = slice(start, min(start + chunk, len(centers)))
            c = centers[sl]
            d2 = np.sum((pts[None, :, :] - c[:, None, :]) ** 2, axis=2)
            dens = np.exp(-0.5 * d2 / (s * s)) / (2.0 * np.pi * s * s) ** (n / 2.0)
            mixed = dens @ mono  # (m, E)
            for k, poly in polys.items():
                vals = np.zeros(c.shape[0])
                for e, coef in poly.items():
                    coef_sl = coef[sl] if isinstance(coef, np.ndarray) else coef
                    vals += coef_sl * mixed[:, mono_exps.index(e)]
                out[k][sl] = vals
        return out
    # generic Gauss-Hermite fallback around each center
    z, w = quadrule.gauss_hermite_grid(n, gh_order)
    chunk = max(16, int(4e6 / max(len(z), 1)))
    for start in range(0, len(centers), chunk):
        sl = slice(start, min(start + chunk, len(centers)))
        c = centers[sl]
        y = c[:, None, :] + s * z[None, :, :]  # (m, K, n)
        vals = v(y.reshape(-1, n)).reshape(y.shape[:2])
        for k, poly in polys.items():
            psub = {
                e: (coef[sl][:, None] if isinstance(coef, np.ndarray) else coef)
                for e, coef in poly.items()
            }
            out[k][sl] = (vals * eval_poly(psub, y)) @ w
    return out


# ---------------------------------------------------------------------------
# outer nodes against mu_n, adapted to the kink structure of the factors


def mu_nodes(factors, n, half_nodes=20, gh_order=None, max_width=3.0, extra_breaks0=(),
             radial_ok=False):
    """Nodes/weights for integrating a product of descriptors against mu_n.

    Weights absorb the Gaussian density and the indicator factors; the caller
    still multiplies the values of the smooth factors at the points.
    """
    ind_sets = []
    radial = all(getattr(f, "is_radial", False) for f in factors) if factors else False
    radial_breaks = []
    breaks0, breaks1 = list(np.atleast_1d(extra_breaks0)), []
    for f in factors:
        ind = f.indicator_set
        if ind is not None:
            ind_sets.append(ind)
        radial_breaks.extend(f.radial_breaks())
        breaks0.extend(f.axis_breaks(0))
        if n >= 2:
            breaks1.extend(f.axis_breaks(1))

    if radial_ok and radial and n == 2:
        # rotation-invariant integrand: collapse to the radial line
        r_hi = min(min((f.support_radius() for f in factors), default=np.inf), quadrule.TRUNC)
        r, w = quadrule.composite_rule(0.0, r_hi, radial_breaks, max_width, half_nodes)
        pts = np.stack([r, np.zeros_like(r)], axis=1)
        return pts, w * r * np.exp(-0.5 * r * r)

    if ind_sets:
        region = ind_sets[0] if len(ind_sets) == 1 else sets.Intersection(ind_sets)
        if region.dim <= 2:
            return quadrule.region_nodes(
                region.simplified(),
                half_nodes=half_nodes,
                max_width=max_width,
                extra_breaks0=breaks0,
                extra_breaks1=breaks1,
            )
        box = sets.axis_box_intervals(region)
        if box is not None:
            return quadrule.box_region_nodes(box, half_nodes=half_nodes, max_width=max_width)
        raise BudgetError("no deterministic outer grid for this region; use the MC path")

    if n == 1:
        all_breaks = breaks0 + [b for r in radial_breaks for b in (-r, r)]
        return quadrule.axis_panel_nodes([all_breaks], half_nodes=half_nodes, max_width=max_width)
    if radial and n == 2:
        return quadrule.polar_nodes(radial_breaks, half_nodes=half_nodes)
    if (breaks0 or breaks1 or radial_breaks) and n == 2:
        b0 = breaks0 + [b for r in radial_breaks for b in (-r, r)]
        b1 = breaks1 + [b for r in radial_breaks for b in (-r, r)]
        return quadrule.axis_panel_nodes([b0, b1], half_nodes=half_nodes, max_width=max_width)
    order = gh_order or {1: 160, 2: 72, 3: 28, 4: 16}.get(n, 10)
    return quadrule.gauss_hermite_grid(n, order)


def mu_expectation(factors, n, half_nodes=20, gh_order=None, max_width=3.0):
    """Integral of a product of descriptors against mu_n by adapted quadrature."""
    pts, wts = mu_nodes(factors, n, half_nodes, gh_order, max_width)
    vals = wts.copy()
    for f in factors:
        if f.indicator_set is None:
            vals *= f(pts)
    return float(np.sum(vals))


# ---------------------------------------------------------------------------
# psi / phi


def _lam_from_t(t):
    if t < 0:
        raise DomainError("t must be >= 0")
    return float(np.exp(-0.5 * t))


def psi(u, v, lam, method="auto", samples=gm.MC_DEFAULT, seed=0, half_nodes=20, gh_order=48):
    """Correlation integral of (u, v) at mixing parameter lam in [0, 1]."""
    if u.dim != v.dim:
        raise DimensionError("u and v must share one dimension")
    if not 0.0 <= lam <= 1.0:
        raise DomainError("lam must lie in [0, 1]")
    n = u.dim
    if method == "auto":
        method = "quadrature" if _quadrature_feasible(u, v, n) else "mc"
    if method == "quadrature":
        val, n_used = _psi_quadrature(u, v, lam, None, half_nodes, gh_order)
        return gm.Estimate(val, 0.0, "quadrature", n_used)
    if method == "mc":
        vals = psi_mc_grid(u, v, [lam], samples=samples, seed=seed)
        return vals[0]
    raise DomainError(f"unknown method {method!r}")


def phi(u, v, t, **kwargs):
    """Time-parametrized correlation: psi at lam = exp(-t/2); t = 0 is the diagonal."""
    return psi(u, v, _lam_from_t(t), **kwargs)


def _quadrature_feasible(u, v, n):
    _, ind_u, smooth_u = _unwrap(u)
    _, ind_v, smooth_v = _unwrap(v)
    if n <= 2:
        for ind in (ind_u, ind_v):
            if ind is not None and not sets.has_sections(ind.simplified()):
                return False
        return True
    if smooth_u or smooth_v:
        return n <= 3
    box_u = sets.axis_box_intervals(ind_u) if ind_u is not None else [(-np.inf, np.inf)] * n
    box_v = sets.axis_box_intervals(ind_v) if ind_v is not None else [(-np.inf, np.inf)] * n
    return n <= 4 and box_u is not None and box_v is not None


def _psi_quadrature(u, v, lam, poly, half_nodes, gh_order):
    n = u.dim
    if lam >= 1.0:
        if poly is not None:
            raise DomainError("derivative weights are singular at lam = 1")
        pts, wts = mu_nodes([u, v], n, half_nodes, gh_order)
        vals = wts.copy()
        for f in (u, v):
            if f.indicator_set is None:
                vals *= f(pts)
        return float(np.sum(vals)), len(wts)
    s = float(np.sqrt(1.0 - lam * lam))
    extra0 = ()
    max_width = 3.0
    if lam > 0.9:
        # sharpen the outer panels where the smoothed second factor still has edges
        v_breaks = [b / lam for b in v.axis_breaks(0)]
        extra0 = tuple(v_breaks)
        max_width = max(4.0 * s / max(lam, 1e-9), 0.05)
    radial_pair = getattr(u, "is_radial", False) and getattr(v, "is_radial", False)
    pts, wts = mu_nodes(
        [u], n, half_nodes, max_width=min(3.0, max_width), extra_breaks0=extra0,
        radial_ok=radial_pair and poly is None,
    )
    outer = wts.copy()
    if u.indicator_set is None:
        outer *= u(pts)
    if poly is None:
        poly_x = None
    else:
        poly_x = poly(n, lam, pts)
    inner = smoothed_expectation(v, lam * pts, s, poly_x, half_nodes=half_nodes, gh_order=gh_order)
    return float(np.sum(outer * inner)), len(wts)


def psi_mc_monotone(u, v, lams, samples=gm.MC_DEFAULT, seed=0):
    """psi on a lam grid plus paired standard errors of consecutive differences.

    Common random numbers couple the grid, so the difference estimator is far
    tighter than differencing independent estimates.  Returns (estimates,
    diffs, diff_std_errors).
    """
    n = u.dim
    lams = list(lams)
    k = len(lams)
    sums = np.zeros(k)
    dsums = np.zeros(k - 1)
    dsqs = np.zeros(k - 1)
    total = 0
    for b, size in enumerate(streams.block_sizes(samples)):
        rng = streams.stream(seed, "psi", b)
        x = rng.standard_normal((size, n))
        z = rng.standard_normal((size, n))
        ux = u(x)
        prev = None
        for i, lam in enumerate(lams):
            y = lam * x + np.sqrt(max(1.0 - lam * lam, 0.0)) * z
            term = ux * v(y)
            sums[i] += float(np.sum(term))
            if prev is not None:
                d = term - prev
                dsums[i - 1] += float(np.sum(d))
                dsqs[i - 1] += float(np.sum(d * d))
            prev = term
        total += size
    means = sums / total
    dmeans = dsums / total
    dvars = np.maximum(dsqs / total - dmeans**2, 0.0)
    dses = np.sqrt(dvars / total)
    ests = [gm.Estimate(float(m), 0.0, "mc", total) for m in means]
    return ests, dmeans, dses


def psi_mc_grid(u, v, lams, samples=gm.MC_DEFAULT, seed=0, weight=None):
    """Monte Carlo psi on a lam grid with common random numbers across the grid.

    ``weight(n, lam, x, y)`` optionally multiplies the integrand (used for the
    derivative formulas).  Returns one Estimate per grid value.
    """
    n = u.dim
    lams = list(lams)
    sums = np.zeros(len(lams))
    sqs = np.zeros(len(lams))
    total = 0
    for b, size in enumerate(streams.block_sizes(samples)):
        rng = streams.stream(seed, "psi", b)
        x = rng.standard_normal((size, n))
        z = rng.standard_normal((size, n))
        ux = u(x)
        for k, lam in enumerate(lams):
            y = lam * x + np.sqrt(max(1.0 - lam * lam, 0.0)) * z
            term = ux * v(y)
            if weight is not None:
                term = term * weight(n, lam, x, y)
            sums[k] += float(np.sum(term))
            sqs[k] += float(np.sum(term * term))
        total += size
    means = sums / total
    variances = np.maximum(sqs / total - means**2, 0.0)
    ses = np.sqrt(variances / total)
    return [gm.Estimate(float(m), float(se), "mc", total) for m, se in zip(means, ses)]


# ---------------------------------------------------------------------------
# derivatives in the mixing parameter


def psi_dlambda(u, v, lam, method="auto", samples=gm.MC_DEFAULT, seed=0, half_nodes=20, gh_order=48):
    """First lam-derivative of psi via its closed-form integrand."""
    if not 0.0 <= lam < 1.0:
        raise DomainError("derivative formula requires lam in [0, 1)")
    n = u.dim
    if method == "auto":
        method = "quadrature" if _quadrature_feasible(u, v, n) else "mc"
    if method == "quadrature":
        val, n_used = _psi_quadrature(u, v, lam, dlambda_weight_poly, half_nodes, gh_order)
        return gm.Estimate(val, 0.0, "quadrature", n_used)
    def weight(n_, lam_, x, y):
        return eval_poly(dlambda_weight_poly(n_, lam_, x), y)
    return psi_mc_grid(u, v, [lam], samples, seed, weight=weight)[0]


def psi_d2lambda(u, v, lam, method="auto", samples=gm.MC_DEFAULT, seed=0, half_nodes=20, gh_order=48):
    """Second lam-derivative of psi via its closed-form integrand."""
    if not 0.0 <= lam < 1.0:
        raise DomainError("derivative formula requires lam in [0, 1)")
    n = u.dim
    if method == "auto":
        method = "quadrature" if _quadrature_feasible(u, v, n) else "mc"
    if method == "quadrature":
        val, n_used = _psi_quadrature(u, v, lam, d2lambda_weight_poly, half_nodes, gh_order)
        return gm.Estimate(val, 0.0, "quadrature", n_used)
    def weight(n_, lam_, x, y):
        return eval_poly(d2lambda_weight_poly(n_, lam_, x), y)
    return psi_mc_grid(u, v, [lam], samples, seed, weight=weight)[0]


def inner_product_pair_integral(u, v, lam, half_nodes=20, gh_order=48):
    """E[<X, Y> u(X) v(Y)] under the lam-correlated pair, by quadrature.

    Nonnegative whenever u is nonnegative and bounded and v is even (the
    pair kernel couples each x to the reflection-averaged mass of v).
    """
    if not 0.0 <= lam < 1.0:
        raise DomainError("the weighted pair integral needs lam in [0, 1)")
    n = u.dim

    def poly_builder(n_, lam_, x):
        return {_axis_exponent(n_, i, 1): x[:, i] for i in range(n_)}

    val, _ = _psi_quadrature(u, v, lam, poly_builder, half_nodes, gh_order)
    return val


# ---------------------------------------------------------------------------
# second derivative at lam = 0, decomposed into per-set moments


def set_second_moments(convex_set, half_nodes=24):
    """Matrix of integrals of x_i x_j over the set against mu_n, plus the measure.

    Closed forms cover balls, axis boxes, products and rotations thereof;
    two-dimensional descriptors fall back to sectioned quadrature.
    """
    s = convex_set.simplified()
    n = s.dim
    out = _second_moments_structural(s)
    if out is not None:
        return out
    if n > 2:
        raise BudgetError("second moments need structure or dim <= 2")
    pts, wts = quadrule.region_nodes(s, half_nodes=half_nodes)
    mass = float(np.sum(wts))
    mat = np.einsum("k,ki,kj->ij", wts, pts, pts)
    return mat, mass


def _second_moments_structural(s):
    from scipy import stats

    n = s.dim
    if isinstance(s, sets.FullSpace):
        return np.eye(n), 1.0
    if isinstance(s, sets.Ball):
        mass = float(stats.chi2.cdf(s.radius**2, df=n))
        radial = float(stats.chi2.cdf(s.radius**2, df=n + 2))
        return np.eye(n) * radial, mass
    box = sets.axis_box_intervals(s)
    if box is not None:
        moments = [
            quadrule.normal_interval_moments(lo, hi, 0.0, 1.0, 2) for lo, hi in box
        ]
        masses = np.array([m[0] for m in moments])
        seconds = np.array([m[2] for m in moments])
        mass = float(np.prod(masses))
        diag = np.array(
            [seconds[i] * np.prod(np.delete(masses, i)) for i in range(n)]
        )
        return np.diag(diag), mass
    if isinstance(s, sets.Rotated):
        inner = _second_moments_structural(s.inner.simplified())
        if inner is None:
            return None
        mat, mass = inner
        return s.q @ mat @ s.q.T, mass
    if isinstance(s, sets.Product):
        parts = [_second_moments_structural(f.simplified()) for f in s.factors]
        if any(p is None for p in parts):
            return None
        mats = [p[0] for p in parts]
        masses = [p[1] for p in parts]
        total = float(np.prod(masses))
        blocks = []
        for i, (m, _) in enumerate(parts):
            rest = np.prod([masses[j] for j in range(len(parts)) if j != i])
            blocks.append(m * rest)
        out = np.zeros((n, n))
        off = 0
        for b in blocks:
            k = b.shape[0]
            out[off : off + k, off : off + k] = b
            off += k
        return out, total
    return None


def d2_at_zero_decomposed(a_set, b_set, half_nodes=24):
    """Second derivative at lam = 0 split into diagonal and cross moment products.

    total = sum_i [mu(A) - m_ii(A)] [mu(B) - m_ii(B)] + 2 sum_{i != j} m_ij(A) m_ij(B),
    where m_ij(S) integrates x_i x_j over S.  Returns (total, diag_terms, cross_terms).
    """
    if a_set.dim != b_set.dim:
        raise DimensionError("sets must share one dimension")
    n = a_set.dim
    mat_a, mass_a = set_second_moments(a_set, half_nodes)
    mat_b, mass_b = set_second_moments(b_set, half_nodes)
    diag = (mass_a - np.diag(mat_a)) * (mass_b - np.diag(mat_b))
    cross = mat_a * mat_b
    np.fill_diagonal(cross, 0.0)
    total = float(np.sum(diag) + 2.0 * np.sum(cross))
    return total, diag, cross


# ---------------------------------------------------------------------------
# inequality checks


def derivative_lower_bound_check(u, v, lam, tol=1e-9, **kwargs):
    """d psi / d lam against the -lam n (1+lam)^{-2} psi lower bound."""
    n = u.dim
    lhs = psi_dlambda(u, v, lam, **kwargs)
    base = psi(u, v, lam, **kwargs)
    rhs = -lam * n / (1.0 + lam) ** 2 * base.value
    slack = tol + 3.0 * (lhs.std_error + abs(base.std_error))
    return lhs.value, rhs, bool(lhs.value >= rhs - slack)


def global_gap_bound_check(a_set, b_set, tol=1e-6, **kwargs):
    """Intersection-to-product measure ratio against its exponential lower bound.

    Returns (ratio, bound, holds); holds also asserts ratio >= 1 - tol.
    """
    n = a_set.dim
    mu_a = gm.measure(a_set, **kwargs)
    mu_b = gm.measure(b_set, **kwargs)
    if mu_a.value <= 0.0 or mu_b.value <= 0.0:
        raise DegenerateSetError("both sets need positive measure for the ratio")
    inter = gm.measure(sets.Intersection([a_set, b_set]), **kwargs)
    ratio = inter.value / (mu_a.value * mu_b.value)
    bound = float(np.exp(-(np.log(2.0) - 0.5) * n))
    holds = ratio >= bound * (1.0 - tol) and ratio >= 1.0 - tol
    return ratio, bound, bool(holds)


def lebesgue_gradient_check(u, v, grid=160, tol=1e-9):
    """Quadrature of <grad u, grad v> over Lebesgue measure for smooth bumps.

    Both bumps must be centered (even); the integral must be >= -tol.  A
    disagreement between the full and half resolution grids beyond 10x tol
    raises ResolutionError.
    """
    for f in (u, v):
        if not isinstance(f, lc.SmoothBump):
            raise DomainError("the Lebesgue gradient check takes smooth bumps")
        f.require_even()
    if u.dim != v.dim:
        raise DimensionError("bumps must share one dimension")
    n = u.dim
    radius = min(u.support_radius(), v.support_radius())

    def value(npanels):
        edges = np.linspace(-radius, radius, npanels + 1)
        xs, ws = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            x, w = quadrule.panel_rule(a, b, half_nodes=8)
            xs.append(x)
            ws.append(w)
        x1, w1 = np.concatenate(xs), np.concatenate(ws)
        if n == 1:
            pts = x1[:, None]
            wts = w1
        else:
            g = np.meshgrid(x1, x1, indexing="ij")
            pts = np.stack([a.ravel() for a in g], axis=1)
            wts = np.outer(w1, w1).ravel()
        dots = np.einsum("ij,ij->i", u.gradient(pts), v.gradient(pts))
        return float(np.sum(wts * dots))

    coarse = value(max(grid // 2, 4))
    fine = value(grid)
    threshold = max(10.0 * tol, 1e-6 * (1.0 + abs(fine)))
    if abs(fine - coarse) > threshold:
        raise ResolutionError(
            f"grid at {grid} panels has not converged (delta {abs(fine - coarse):.2e})"
        )
    return fine

"""Ornstein-Uhlenbeck smoothing and log-potential derivatives.

The semigroup acts by

    (P_t u)(x) = E[ u(e^{-t/2} x + sqrt(1 - e^{-t}) Z) ],   Z ~ N(0, I_n),

equivalently as a Gaussian convolution with variance s = 1 - e^{-t} around
w = e^{-t/2} x.  Writing U_t = -ln P_t u, every derivative of U_t used here
comes from one pass of moments of the kernel probability measure

    sigma_x(dy)  proportional to  u(y) exp{-|y - w|^2 / (2 s)} dy:

    grad U_t(x)   = e^{-t/2} (w - mean) / s
    hess U_t(x)   = e^{-t}/s * I  -  e^{-t}/s^2 * Cov
    d3  U_t(x)    = -e^{-3t/2}/s^3 * E[(y-mean)_i (y-mean)_j (y-mean)_k].

The third-derivative line is the five-term centered-moment expansion of the
log-convolution specialized to a Gaussian kernel: the kernel potential is
quadratic, so its third derivatives and centered Hessian terms vanish
identically and only the triple-product term survives.
"""

from __future__ import annotations

import numpy as np

from . import functional as fn
from . import logconcave as lc
from .errors import DomainError, ResolutionError, UnderflowError_

VALUE_FLOOR = 1e-300


def _window(t):
    if t < 0:
        raise DomainError("t must be >= 0")
    return float(np.exp(-0.5 * t)), float(1.0 - np.exp(-t))


def apply_many(u, t, xs, half_nodes=22, gh_order=48):
    """P_t u at a batch of points, shape (m, n) -> (m,)."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if t == 0.0:
        return u(xs)
    decay, s = _window(t)
    return fn.smoothed_expectation(u, decay * xs, np.sqrt(s), None, half_nodes, gh_order)


def apply(u, t, x, **kwargs):
    """P_t u(x); t = 0 short-circuits to u(x)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(apply_many(u, t, x[None, :], **kwargs)[0])
    return apply_many(u, t, x, **kwargs)


def _moment_polys(n, deg):
    polys = {"z": fn.poly_one(n)}
    for i in range(n):
        polys[f"m{i}"] = {fn._axis_exponent(n, i, 1): 1.0}
    if deg >= 2:
        for i in range(n):
            for j in range(i, n):
                e = [0] * n
                e[i] += 1
                e[j] += 1
                polys[f"m{i}{j}"] = {tuple(e): 1.0}
    if deg >= 3:
        for i in range(n):
            for j in range(i, n):
                for k in range(j, n):
                    e = [0] * n
                    e[i] += 1
                    e[j] += 1
                    e[k] += 1
                    polys[f"m{i}{j}{k}"] = {tuple(e): 1.0}
    return polys


def _kernel_moments(u, t, xs, deg, half_nodes, gh_order):
    """Normalizer, mean and raw second/third moments of the kernel measure."""
    if t <= 0:
        raise DomainError("log-potential derivatives need t > 0")
    ind = fn._unwrap(u)[1]
    if ind is not None and t < 0.05:
        raise ResolutionError("kernel too sharp below t = 0.05 for indicator bases")
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    n = xs.shape[1]
    decay, s = _window(t)
    w = decay * xs
    raw = fn.smoothed_polys(u, w, np.sqrt(s), _moment_polys(n, deg), half_nodes, gh_order)
    z = raw["z"]
    if np.any(z < VALUE_FLOOR):
        raise UnderflowError_("P_t u underflowed below 1e-300; evaluate closer to the support")
    mean = np.stack([raw[f"m{i}"] / z for i in range(n)], axis=1)
    out = {"z": z, "mean": mean, "w": w, "s": s, "decay": decay, "n": n}
    if deg >= 2:
        second = np.empty((len(xs), n, n))
        for i in range(n):
            for j in range(i, n):
                second[:, i, j] = second[:, j, i] = raw[f"m{i}{j}"] / z
        out["second"] = second
    if deg >= 3:
        third = {}
        for i in range(n):
            for j in range(i, n):
                for k in range(j, n):
                    third[(i, j, k)] = raw[f"m{i}{j}{k}"] / z
        out["third"] = third
    return out


def grad_hess_many(u, t, xs, half_nodes=22, gh_order=48):
    """(values, gradients, hessians) of U_t = -ln P_t u at a batch of points."""
    mom = _kernel_moments(u, t, xs, 2, half_nodes, gh_order)
    z, mean, w, s, decay, n = (
        mom["z"],
        mom["mean"],
        mom["w"],
        mom["s"],
        mom["decay"],
        mom["n"],
    )
    cov = mom["second"] - np.einsum("mi,mj->mij", mean, mean)
    grad = decay * (w - mean) / s
    e_t = decay * decay
    hess = (e_t / s) * np.eye(n)[None, :, :] - (e_t / s**2) * cov
    hess = 0.5 * (hess + np.swapaxes(hess, 1, 2))
    return z, grad, hess


def log_potential_grad_hess(u, t, x, **kwargs):
    """Gradient and Hessian of the evolved log-potential at one point."""
    x = np.asarray(x, dtype=float)
    _, grad, hess = grad_hess_many(u, t, x[None, :], **kwargs)
    return grad[0], hess[0]


def log_potential_d3(u, t, x, indices, half_nodes=22, gh_order=48):
    """Third partial derivative of U_t at x for coordinate indices (i, j, k)."""
    x = np.asarray(x, dtype=float)
    i, j, k = sorted(int(a) for a in indices)
    mom = _kernel_moments(u, t, x[None, :], 3, half_nodes, gh_order)
    mean, s, decay = mom["mean"][0], mom["s"], mom["decay"]
    m1 = {a: mean[a] for a in (i, j, k)}
    m2 = mom["second"][0]
    m3 = mom["third"][(i, j, k)][0]
    central = (
        m3
        - m1[i] * m2[j, k]
        - m1[j] * m2[i, k]
        - m1[k] * m2[i, j]
        + 2.0 * m1[i] * m1[j] * m1[k]
    )
    return float(-(decay**3) / s**3 * central)


class EvolvedPotential(lc.LogConcaveFunction):
    """P_t of a log-concave base, evaluable and differentiable through U_t.

    Usable as a log-concave descriptor in its own right (the semigroup
    preserves the class), so evolved functions can be fed back into the
    correlation integrals and into further smoothing.
    """

    def __init__(self, base, t, half_nodes=22, gh_order=48):
        if t < 0:
            raise DomainError("t must be >= 0")
        self.base = base
        self.t = float(t)
        self.dim = base.dim
        self._opts = {"half_nodes": half_nodes, "gh_order": gh_order}

    def _values(self, pts):
        return np.asarray(apply_many(self.base, self.t, pts, **self._opts))

    @property
    def is_radial(self):
        return getattr(self.base, "is_radial", False)

    def potential(self, x):
        """U_t(x) = -ln P_t u(x)."""
        val = apply(self.base, self.t, np.asarray(x, dtype=float))
        if np.any(np.asarray(val) < VALUE_FLOOR):
            raise UnderflowError_("P_t u underflowed below 1e-300")
        return -np.log(val)

    def potential_grad_hess(self, x):
        return log_potential_grad_hess(self.base, self.t, x, **self._opts)

    def potential_d3(self, x, indices):
        return log_potential_d3(self.base, self.t, x, indices, **self._opts)


def hessian_of_smoothed(u, t, xs, half_nodes=22, gh_order=48):
    """Hessian of P_t u itself (not of the log): P * (g g^T - H) per point."""
    vals, grad, hess = grad_hess_many(u, t, xs, half_nodes, gh_order)
    outer = np.einsum("mi,mj->mij", grad, grad)
    return vals[:, None, None] * (outer - hess)


def gradient_of_smoothed(u, t, xs, half_nodes=22, gh_order=48):
    """Gradient of P_t u itself: -P_t u * grad U_t per point."""
    vals, grad, _ = grad_hess_many(u, t, xs, half_nodes, gh_order)
    return -vals[:, None] * grad


def time_derivative_check(u, v, t, h=0.01, half_nodes=22, gh_order=40):
    """First time derivative of phi against its gradient-form integral.

    Returns (fd, integral) where fd is the central difference of phi in t and
    integral = -1/2 E[<grad P_t u(X), grad v(X)>] under mu_n; v must expose an
    analytic gradient.
    """
    if t - h <= 0:
        raise DomainError("step too large for the given t")
    n = u.dim
    fd = (
        fn.phi(u, v, t + h, method="quadrature", half_nodes=half_nodes).value
        - fn.phi(u, v, t - h, method="quadrature", half_nodes=half_nodes).value
    ) / (2 * h)
    pts, wts = fn.mu_nodes([u, v], n, half_nodes=half_nodes, gh_order=gh_order)
    grad_pu = gradient_of_smoothed(u, t, pts, half_nodes, gh_order)
    grad_v = v.gradient(pts)
    integral = -0.5 * float(np.sum(wts * np.einsum("ij,ij->i", grad_pu, grad_v)))
    return fd, integral


def phi_curvature_identity(u, v, t, h=0.02, tol=1e-3, half_nodes=22, gh_order=40):
    """Both sides of the second-time-derivative identity for smooth pairs.

    lhs: second central difference of phi in t.  rhs: -1/2 (first central
    difference) + 1/4 integral of trace(hess P_{t/2} u . hess P_{t/2} v)
    against mu_n.  Raises ResolutionError when halving the step shifts the
    finite differences by more than 10x the tolerance.
    """
    if t <= 0:
        raise DomainError("the identity is evaluated at t > 0")
    n = u.dim
    if n > 2:
        raise DomainError("trace quadrature supports n <= 2")

    def phi_at(tt):
        return fn.phi(u, v, tt, method="quadrature", half_nodes=half_nodes).value

    def diffs(step):
        p_plus, p_mid, p_minus = phi_at(t + step), phi_at(t), phi_at(t - step)
        d1 = (p_plus - p_minus) / (2 * step)
        d2 = (p_plus - 2 * p_mid + p_minus) / step**2
        return d1, d2

    if t - 2 * h <= 0:
        raise DomainError("step too large for the given t")
    d1, d2 = diffs(h)
    _, d2_c = diffs(2 * h)
    if abs(d2 - d2_c) > 10.0 * tol * max(1.0, abs(d2)) + 1e-12:
        raise ResolutionError(
            f"time finite differences disagree across step halving ({abs(d2 - d2_c):.2e})"
        )
    pts, wts = fn.mu_nodes([u, v], n, half_nodes=half_nodes, gh_order=gh_order)
    hu = hessian_of_smoothed(u, t / 2.0, pts, half_nodes, gh_order)
    hv = hessian_of_smoothed(v, t / 2.0, pts, half_nodes, gh_order)
    trace = np.einsum("mij,mji->m", hu, hv)
    rhs = -0.5 * d1 + 0.25 * float(np.sum(wts * trace))
    return d2, rhs

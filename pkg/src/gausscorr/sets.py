"""Origin-symmetric convex set descriptors.

Sets are closed algebraic descriptor trees (ball, ellipsoid, slab, polytope,
product, rotated, intersection, full space) rather than black-box membership
oracles, so that structural facts -- cylinder factorizations, unlinkedness,
section intervals for quadrature -- stay decidable.

All membership tests are exact on the closed constraints.  Euclidean
projection (and hence distance) is closed form for balls, slabs and axis
products, a one-dimensional Newton iteration for ellipsoids, and Dykstra's
alternating projection for polytopes and intersections.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, DimensionError, DomainError

ORTHO_TOL = 1e-12
DYKSTRA_TOL = 1e-10
DYKSTRA_MAX_ITER = 100_000

# Section status markers for empty intervals
_EMPTY = (1.0, -1.0)


def _as_points(x, dim):
    """Return (points, scalar) with points shaped (m, dim)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise DimensionError(f"point has dim {arr.shape[0]}, set has dim {dim}")
        return arr[None, :], True
    if arr.ndim == 2:
        if arr.shape[1] != dim:
            raise DimensionError(f"points have dim {arr.shape[1]}, set has dim {dim}")
        return arr, False
    raise DimensionError("points must be 1- or 2-dimensional arrays")


def _orthonormalize(vectors, dim):
    """Orthonormal basis (dim, k) for the span of the given row vectors."""
    if len(vectors) == 0:
        return np.zeros((dim, 0))
    mat = np.asarray(vectors, dtype=float).reshape(len(vectors), dim)
    q, r = np.linalg.qr(mat.T)
    keep = np.abs(np.diag(r)) > 1e-12
    return q[:, : r.shape[0]][:, keep]


class SymmetricConvexSet:
    """Base class; concrete shapes implement the constraint logic."""

    shape = "abstract"
    dim: int

    # -- membership ------------------------------------------------------

    def contains(self, x, strict=False):
        pts, scalar = _as_points(x, self.dim)
        out = self._contains(pts, strict)
        return bool(out[0]) if scalar else out

    def _contains(self, pts, strict):
        raise NotImplementedError

    # -- projection / distance -------------------------------------------

    def project(self, x):
        """Euclidean projection onto the set, shaped like ``x``."""
        pts, scalar = _as_points(x, self.dim)
        proj = self._project(pts)
        return proj[0] if scalar else proj

    def _project(self, pts):
        raise NotImplementedError

    def distance(self, x):
        """Euclidean distance to the set (0 on the set)."""
        pts, scalar = _as_points(x, self.dim)
        d = np.linalg.norm(pts - self._project(pts), axis=1)
        # snap projection roundoff for member points to an exact zero
        d[self._contains(pts, strict=False)] = 0.0
        return float(d[0]) if scalar else d

    # -- structure ---------------------------------------------------------

    @property
    def degenerate(self):
        """True when the descriptor is a measure-zero (flat) set."""
        return False

    def lineality_basis(self):
        """Orthonormal basis (dim, k) of directions along which the set is a cylinder."""
        return np.zeros((self.dim, 0))

    def constrained_basis(self):
        """Orthonormal basis of the minimal subspace the membership actually constrains."""
        lin = self.lineality_basis()
        if lin.shape[1] == 0:
            return np.eye(self.dim)
        # orthogonal complement
        q, _ = np.linalg.qr(np.hstack([lin, np.eye(self.dim)]))
        return q[:, lin.shape[1] :]

    def is_bounded(self):
        return self.lineality_basis().shape[1] == 0 and self._bounded_core()

    def _bounded_core(self):
        raise NotImplementedError

    def bounding_radius(self):
        """Radius R with the set inside the centered ball of radius R (inf allowed)."""
        raise NotImplementedError

    # -- sections ---------------------------------------------------------

    def last_interval(self, prefix):
        """Interval {t : (prefix, t) in set} as (lo, hi); lo > hi marks empty.

        ``prefix`` holds the first dim-1 coordinates.  Sections of a convex
        set along a coordinate line are intervals, possibly infinite.
        """
        raise NotImplementedError

    def section_batch(self, prefixes):
        """Vectorized sections: (k, dim-1) prefixes -> (lo, hi) arrays."""
        prefixes = np.atleast_2d(np.asarray(prefixes, dtype=float))
        out = np.array([self.last_interval(p) for p in prefixes])
        return out[:, 0], out[:, 1]

    def first_axis_breakpoints(self):
        """Sorted x1 values where the (lo, hi) section profile is non-smooth.

        Used to place quadrature panel boundaries; a superset is harmless.
        """
        return np.array([])

    def simplified(self):
        """Equivalent descriptor with rotations pushed into the leaves where possible."""
        return self

    # -- serialization ------------------------------------------------------

    def to_json(self):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_json()})"


class FullSpace(SymmetricConvexSet):
    shape = "fullspace"

    def __init__(self, dim):
        if dim < 1:
            raise DomainError("dim must be >= 1")
        self.dim = int(dim)

    def _contains(self, pts, strict):
        return np.ones(len(pts), dtype=bool)

    def _project(self, pts):
        return pts.copy()

    def lineality_basis(self):
        return np.eye(self.dim)

    def _bounded_core(self):
        return False

    def bounding_radius(self):
        return np.inf

    def last_interval(self, prefix):
        return (-np.inf, np.inf)

    def section_batch(self, prefixes):
        prefixes = np.atleast_2d(np.asarray(prefixes, dtype=float))
        k = len(prefixes)
        return np.full(k, -np.inf), np.full(k, np.inf)

    def to_json(self):
        return {"shape": "fullspace", "dim": self.dim}


class Ball(SymmetricConvexSet):
    shape = "ball"

    def __init__(self, dim, radius):
        if radius <= 0:
            raise DomainError("ball radius must be > 0")
        self.dim = int(dim)
        self.radius = float(radius)

    def _contains(self, pts, strict):
        r2 = np.einsum("ij,ij->i", pts, pts)
        return r2 < self.radius**2 if strict else r2 <= self.radius**2

    def _project(self, pts):
        norms = np.linalg.norm(pts, axis=1)
        scale = np.where(norms > self.radius, self.radius / np.maximum(norms, 1e-300), 1.0)
        return pts * scale[:, None]

    def _bounded_core(self):
        return True

    def bounding_radius(self):
        return self.radius

    def last_interval(self, prefix):
        s2 = self.radius**2 - float(np.dot(prefix, prefix))
        if s2 < 0:
            return _EMPTY
        s = np.sqrt(s2)
        return (-s, s)

    def section_batch(self, prefixes):
        prefixes = np.atleast_2d(np.asarray(prefixes, dtype=float))
        s2 = self.radius**2 - np.einsum("ij,ij->i", prefixes, prefixes)
        s = np.sqrt(np.maximum(s2, 0.0))
        lo = np.where(s2 >= 0, -s, 1.0)
        hi = np.where(s2 >= 0, s, -1.0)
        return lo, hi

    def first_axis_breakpoints(self):
        return np.array([-self.radius, self.radius])

    def to_json(self):
        return {"shape": "ball", "dim": self.dim, "radius": self.radius}


class Ellipsoid(SymmetricConvexSet):
    """Set {x : <Sigma x, x> <= 1} for symmetric positive-semidefinite Sigma."""

    shape = "ellipsoid"

    def __init__(self, dim, matrix):
        sigma = np.asarray(matrix, dtype=float)
        if sigma.shape != (dim, dim):
            raise DimensionError("ellipsoid matrix must be dim x dim")
        if not np.allclose(sigma, sigma.T, atol=1e-12):
            raise DomainError("ellipsoid matrix must be symmetric")
        self.dim = int(dim)
        self.sigma = 0.5 * (sigma + sigma.T)
        self._evals, self._evecs = np.linalg.eigh(self.sigma)
        if self._evals[0] < -1e-12:
            raise DomainError("ellipsoid matrix must be positive semidefinite")
        self._evals = np.clip(self._evals, 0.0, None)

    def _quad(self, pts):
        return np.einsum("ij,jk,ik->i", pts, self.sigma, pts)

    def _contains(self, pts, strict):
        q = self._quad(pts)
        return q < 1.0 if strict else q <= 1.0

    def _project(self, pts):
        # Newton on the dual parameter t >= 0 of p(t) = (I + t*Sigma)^{-1} x,
        # solving q(t) = <Sigma p, p> = 1 in the eigenbasis of Sigma.
        z = pts @ self._evecs
        d = self._evals
        q0 = np.einsum("j,ij->i", d, z**2)
        outside = q0 > 1.0
        t = np.zeros(len(pts))
        if np.any(outside):
            zi = z[outside]
            ti = np.zeros(len(zi))
            for _ in range(200):
                denom = 1.0 + ti[:, None] * d[None, :]
                q = np.einsum("j,ij->i", d, (zi / denom) ** 2)
                g = q - 1.0
                if np.all(np.abs(g) < 1e-14):
                    break
                dq = -2.0 * np.einsum("j,ij->i", d**2, zi**2 / denom**3)
                step = g / dq
                ti = np.maximum(ti - step, 0.0)
            else:
                raise ConvergenceError("ellipsoid projection did not converge", residual=float(np.max(np.abs(g))))
            t[outside] = ti
        denom = 1.0 + t[:, None] * d[None, :]
        return (z / denom) @ self._evecs.T

    def lineality_basis(self):
        null = self._evals <= 1e-14
        return self._evecs[:, null]

    def _bounded_core(self):
        return bool(np.all(self._evals > 1e-14))

    def bounding_radius(self):
        if not self._bounded_core():
            return np.inf
        return 1.0 / np.sqrt(self._evals[self._evals > 1e-14].min())

    def axis_support(self, axis=0):
        """Half-extent of the set along a coordinate axis (inf for cylinders)."""
        if not self._bounded_core():
            return np.inf
        inv = self._evecs @ np.diag(1.0 / self._evals) @ self._evecs.T
        return float(np.sqrt(inv[axis, axis]))

    def last_interval(self, prefix):
        # quadratic a t^2 + 2 b t + c <= 1 in the last coordinate
        k = self.dim - 1
        p = np.asarray(prefix, dtype=float)
        a = self.sigma[k, k]
        b = float(self.sigma[k, :k] @ p)
        c = float(p @ self.sigma[:k, :k] @ p)
        if a > 1e-14:
            disc = b * b - a * (c - 1.0)
            if disc < 0:
                return _EMPTY
            root = np.sqrt(disc)
            return ((-b - root) / a, (-b + root) / a)
        if abs(b) > 1e-14:
            bound = (1.0 - c) / (2.0 * b)
            return (bound, np.inf) if b < 0 else (-np.inf, bound)
        return (-np.inf, np.inf) if c <= 1.0 else _EMPTY

    def section_batch(self, prefixes):
        prefixes = np.atleast_2d(np.asarray(prefixes, dtype=float))
        k = self.dim - 1
        a = self.sigma[k, k]
        b = prefixes @ self.sigma[k, :k]
        c = np.einsum("ij,jk,ik->i", prefixes, self.sigma[:k, :k], prefixes)
        lo = np.full(len(prefixes), 1.0)
        hi = np.full(len(prefixes), -1.0)
        if a > 1e-14:
            disc = b * b - a * (c - 1.0)
            good = disc >= 0
            root = np.sqrt(np.maximum(disc, 0.0))
            lo = np.where(good, (-b - root) / a, 1.0)
            hi = np.where(good, (-b + root) / a, -1.0)
            return lo, hi
        lin = np.abs(b) > 1e-14
        bound = np.where(lin, (1.0 - c) / np.where(lin, 2.0 * b, 1.0), 0.0)
        lo = np.where(lin & (b < 0), bound, np.where(c <= 1.0, -np.inf, 1.0))
        hi = np.where(lin & (b < 0), np.inf, np.where(lin, bound, np.where(c <= 1.0, np.inf, -1.0)))
        return lo, hi

    def first_axis_breakpoints(self):
        e = self.axis_support(0)
        if np.isinf(e):
            return np.array([])
        return np.array([-e, e])

    def to_json(self):
        return {"shape": "ellipsoid", "dim": self.dim, "matrix": self.sigma.tolist()}


class Slab(SymmetricConvexSet):
    """Set {x : |<a, x>| <= b} for a nonzero direction a and half-width b >= 0."""

    shape = "slab"

    def __init__(self, dim, direction, half_width):
        a = np.asarray(direction, dtype=float)
        if a.shape != (dim,):
            raise DimensionError("slab direction must have length dim")
        norm = np.linalg.norm(a)
        if norm == 0:
            raise DomainError("slab direction must be nonzero")
        if half_width < 0:
            raise DomainError("slab half-width must be >= 0")
        self.dim = int(dim)
        self.direction = a
        self.half_width = float(half_width)
        self._unit = a / norm
        self._width = self.half_width / norm  # half-width in euclidean units

    @property
    def degenerate(self):
        return self.half_width == 0.0

    def _contains(self, pts, strict):
        s = np.abs(pts @ self.direction)
        return s < self.half_width if strict else s <= self.half_width

    def _project(self, pts):
        s = pts @ self._unit
        clipped = np.clip(s, -self._width, self._width)
        return pts + (clipped - s)[:, None] * self._unit[None, :]

    def lineality_basis(self):
        basis = np.hstack([self._unit[:, None], np.eye(self.dim)])
        q, _ = np.linalg.qr(basis)
        return q[:, 1 : self.dim]

    def _bounded_core(self):
        return self.dim == 1

    def bounding_radius(self):
        return self._width if self.dim == 1 else np.inf

    def last_interval(self, prefix):
        k = self.dim - 1
        head = float(self.direction[:k] @ np.asarray(prefix, dtype=float))
        ak = self.direction[k]
        if abs(ak) > 1e-300:
            lo = (-self.half_width - head) / ak
            hi = (self.half_width - head) / ak
            return (min(lo, hi), max(lo, hi))
        return (-np.inf, np.inf) if abs(head) <= self.half_width else _EMPTY

    def section_batch(self, prefixes):
        prefixes = np.atleast_2d(np.asarray(prefixes, dtype=float))
        k = self.dim - 1
        head = prefixes @ self.direction[:k]
        ak = self.direction[k]
        if abs(ak) > 1e-300:
            lo = (-self.half_width - head) / ak
            hi = (self.half_width - head) / ak
            return np.minimum(lo, hi), np.maximum(lo, hi)
        ok = np.abs(head) <= self.half_width
        return np.where(ok, -np.inf, 1.0), np.where(ok, np.inf, -1.0)

    def first_axis_breakpoints(self):
        # constraint touching only x1 makes the section profile jump there
        if self.dim >= 2 and np.all(self.direction[1:] == 0.0):
            edge = self.half_width / abs(self.direction[0])
            return np.array([-edge, edge])
        return np.array([])

    def to_json(self):
        return {
            "shape": "slab",
            "dim": self.dim,
            "direction": self.direction.tolist(),
            "half_width": self.half_width,
        }


class Polytope(SymmetricConvexSet):
    """Intersection of symmetric slabs {x : |<a_i, x>| <= b_i}."""

    shape = "polytope"

    def __init__(self, dim, constraints):
        if not constraints:
            raise DomainError("polytope needs at least one constraint")
        self.dim = int(dim)
        self.slabs = [Slab(dim, a, b) for a, b in constraints]
        self._dirs = np.array([s.direction for s in self.slabs])
        self._widths = np.array([s.half_width for s in self.slabs])

    @property
    def degenerate(self):
        return bool(np.any(self._widths == 0.0))

    def _contains(self, pts, strict):
        s = np.abs(pts @ self._dirs.T)
        return np.all(s < self._widths, axis=1) if strict else np.all(s <= self._widths + 0.0, axis=1)

    def _project(self, pts):
        return _dykstra(pts, self.slabs)

    def lineality_basis(self):
        span = _orthonormalize(self._dirs, self.dim)
        q, _ = np.linalg.qr(np.hstack([span, np.eye(self.dim)]))
        return q[:, span.shape[1] :]

    def _bounded_core(self):
        return _orthonormalize(self._dirs, self.dim).shape[1] == self.dim

    def bounding_radius(self):
        if not self.is_bounded():
            return np.inf
        # |x| <= ||pinv(A)||_2 ||A x||_2 and |<a_i, x>| <= b_i componentwise
        return float(
            np.linalg.norm(np.linalg.pinv(self._dirs), 2) * np.linalg.norm(self._widths)
        )

    def last_interval(self, prefix):
        lo, hi = -np.inf, np.inf
        for s in self.slabs:
            a, b = s.last_interval(prefix)
            lo, hi = max(lo, a), min(hi, b)
            if lo > hi:
                return _EMPTY
        return (lo, hi)

    def section_batch(self, prefixes):
        prefixes = np.atleast_2d(np.asarray(prefixes, dtype=float))
        lo = np.full(len(prefixes), -np.inf)
        hi = np.full(len(prefixes), np.inf)
        for s in self.slabs:
            a, b = s.section_batch(prefixes)
            lo, hi = np.maximum(lo, a), np.minimum(hi, b)
        return lo, hi

    def first_axis_breakpoints(self):
        pts = [bp for s in self.slabs for bp in s.first_axis_breakpoints()]
        if self.dim == 2:
            pts.extend(_pairwise_line_crossings(self._dirs, self._widths))
        return np.unique(np.asarray(pts, dtype=float))

    def to_json(self):
        return {
            "shape": "polytope",
            "dim": self.dim,
            "constraints": [
                {"direction": s.direction.tolist(), "half_width": s.half_width} for s in self.slabs
            ],
        }


class Product(SymmetricConvexSet):
    """Cartesian product of lower-dimensional sets on consecutive coordinate blocks."""

    shape = "product"

    def __init__(self, factors):
        if not factors:
            raise DomainError("product needs at least one factor")
        self.factors = list(factors)
        self.dim = sum(f.dim for f in self.factors)
        self._offsets = np.cumsum([0] + [f.dim for f in self.factors])

    @property
    def degenerate(self):
        return any(f.degenerate for f in self.factors)

    def blocks(self):
        return [
            (f, int(self._offsets[i]), int(self._offsets[i + 1]))
            for i, f in enumerate(self.factors)
        ]

    def _contains(self, pts, strict):
        out = np.ones(len(pts), dtype=bool)
        for f, a, b in self.blocks():
            out &= f._contains(pts[:, a:b], strict)
        return out

    def _project(self, pts):
        out = np.empty_like(pts)
        for f, a, b in self.blocks():
            out[:, a:b] = f._project(pts[:, a:b])
        return out

    def lineality_basis(self):
        cols = []
        for f, a, b in self.blocks():
            sub = f.lineality_basis()
            emb = np.zeros((self.dim, sub.shape[1]))
            emb[a:b, :] = sub
            cols.append(emb)
        return np.hstack(cols) if cols else np.zeros((self.dim, 0))

    def _bounded_core(self):
        return all(f.is_bounded() for f in self.factors)

    def bounding_radius(self):
        radii = [f.bounding_radius() for f in self.factors]
        return float(np.sqrt(np.sum(np.square(radii))))

    def last_interval(self, prefix):
        p = np.asarray(prefix, dtype=float)
        last, a, b = self.blocks()[-1]
        for f, i, j in self.blocks()[:-1]:
            if not f.contains(p[i:j]):
                return _EMPTY
        return last.last_interval(p[a : b - 1])

    def section_batch(self, prefixes):
        prefixes = np.atleast_2d(np.asarray(prefixes, dtype=float))
        last, a, b = self.blocks()[-1]
        feasible = np.ones(len(prefixes), dtype=bool)
        for f, i, j in self.blocks()[:-1]:
            feasible &= f._contains(prefixes[:, i:j], strict=False)
        lo, hi = last.section_batch(prefixes[:, a : b - 1])
        return np.where(feasible, lo, 1.0), np.where(feasible, hi, -1.0)

    def first_axis_breakpoints(self):
        return self.factors[0].first_axis_breakpoints()

    def to_json(self):
        return {
            "shape": "product",
            "dim": self.dim,
            "factors": [f.to_json() for f in self.factors],
        }


class Rotated(SymmetricConvexSet):
    """Image Q(S) of an inner set under an orthogonal matrix Q."""

    shape = "rotated"

    def __init__(self, matrix, inner):
        q = np.asarray(matrix, dtype=float)
        if q.shape != (inner.dim, inner.dim):
            raise DimensionError("rotation matrix must match inner dim")
        if np.max(np.abs(q.T @ q - np.eye(inner.dim))) > ORTHO_TOL:
            raise DomainError("rotation matrix is not orthogonal to 1e-12")
        self.dim = inner.dim
        self.q = q
        self.inner = inner

    @property
    def degenerate(self):
        return self.inner.degenerate

    def _contains(self, pts, strict):
        return self.inner._contains(pts @ self.q, strict)

    def _project(self, pts):
        return self.inner._project(pts @ self.q) @ self.q.T

    def lineality_basis(self):
        return self.q @ self.inner.lineality_basis()

    def _bounded_core(self):
        return self.inner.is_bounded()

    def bounding_radius(self):
        return self.inner.bounding_radius()

    def last_interval(self, prefix):
        simp = self.simplified()
        if isinstance(simp, Rotated):
            raise DomainError("no closed-form sections for this rotated descriptor")
        return simp.last_interval(prefix)

    def first_axis_breakpoints(self):
        simp = self.simplified()
        if isinstance(simp, Rotated):
            return np.array([])
        return simp.first_axis_breakpoints()

    def simplified(self):
        inner = self.inner.simplified()
        q = self.q
        if isinstance(inner, (FullSpace, Ball)):
            return inner
        if isinstance(inner, Ellipsoid):
            return Ellipsoid(self.dim, q @ inner.sigma @ q.T)
        if isinstance(inner, Slab):
            return Slab(self.dim, q @ inner.direction, inner.half_width)
        if isinstance(inner, Polytope):
            return Polytope(self.dim, [(q @ s.direction, s.half_width) for s in inner.slabs])
        if isinstance(inner, Intersection):
            members = [Rotated(q, m).simplified() for m in inner.members]
            if not any(isinstance(m, Rotated) for m in members):
                return Intersection(members)
        if isinstance(inner, Rotated):
            return Rotated(q @ inner.q, inner.inner).simplified()
        return Rotated(q, inner)

    def to_json(self):
        return {
            "shape": "rotated",
            "dim": self.dim,
            "matrix": self.q.tolist(),
            "inner": self.inner.to_json(),
        }


class Intersection(SymmetricConvexSet):
    shape = "intersection"

    def __init__(self, members):
        if not members:
            raise DomainError("intersection needs at least one member")
        dims = {m.dim for m in members}
        if len(dims) != 1:
            raise DimensionError("intersection members must share one dimension")
        self.members = list(members)
        self.dim = members[0].dim

    @property
    def degenerate(self):
        return any(m.degenerate for m in self.members)

    def _contains(self, pts, strict):
        out = np.ones(len(pts), dtype=bool)
        for m in self.members:
            out &= m._contains(pts, strict)
        return out

    def _project(self, pts):
        flat = self._flat_members()
        if len(flat) == 1:
            return flat[0]._project(pts)
        return _dykstra(pts, flat)

    def _flat_members(self):
        out = []
        for m in self.members:
            simp = m.simplified()
            if isinstance(simp, Intersection):
                out.extend(simp._flat_members())
            elif isinstance(simp, Polytope):
                out.extend(simp.slabs)
            else:
                out.append(simp)
        return out

    def lineality_basis(self):
        # a direction is free for the intersection iff free for every member
        lin = None
        for m in self.members:
            basis = m.lineality_basis()
            if lin is None:
                lin = basis
                continue
            if lin.shape[1] == 0 or basis.shape[1] == 0:
                return np.zeros((self.dim, 0))
            # intersect subspaces via the nullspace of the stacked complements
            comp = np.hstack(
                [_complement(lin), _complement(basis)]
            )
            lin = _nullspace(comp.T)
        return lin if lin is not None else np.zeros((self.dim, 0))

    def _bounded_core(self):
        # certified bounded when a member is bounded or the slab normals span;
        # otherwise report unbounded (callers only rely on the True direction)
        if any(m.is_bounded() for m in self.members):
            return True
        dirs = []
        for m in self._flat_members():
            if isinstance(m, Slab):
                dirs.append(m.direction)
            elif m.is_bounded():
                return True
        return bool(dirs) and _orthonormalize(dirs, self.dim).shape[1] == self.dim

    def bounding_radius(self):
        return min(m.bounding_radius() for m in self.members)

    def last_interval(self, prefix):
        lo, hi = -np.inf, np.inf
        for m in self.members:
            a, b = m.last_interval(prefix)
            lo, hi = max(lo, a), min(hi, b)
            if lo > hi:
                return _EMPTY
        return (lo, hi)

    def section_batch(self, prefixes):
        prefixes = np.atleast_2d(np.asarray(prefixes, dtype=float))
        lo = np.full(len(prefixes), -np.inf)
        hi = np.full(len(prefixes), np.inf)
        for m in self.members:
            a, b = m.section_batch(prefixes)
            lo, hi = np.maximum(lo, a), np.minimum(hi, b)
        return lo, hi

    def first_axis_breakpoints(self):
        cached = getattr(self, "_axis0_breaks", None)
        if cached is not None:
            return cached
        pts = [bp for m in self.members for bp in m.first_axis_breakpoints()]
        if self.dim == 2:
            pts.extend(_numeric_section_kinks(self))
        out = np.unique(np.asarray(pts, dtype=float))
        self._axis0_breaks = out
        return out

    def simplified(self):
        cached = getattr(self, "_simplified", None)
        if cached is None:
            cached = Intersection([m.simplified() for m in self.members])
            self._simplified = cached
        return cached

    def to_json(self):
        return {
            "shape": "intersection",
            "dim": self.dim,
            "members": [m.to_json() for m in self.members],
        }


# ---------------------------------------------------------------------------
# projection helpers


def _dykstra(pts, pieces):
    """Dykstra's alternating projection onto an intersection of convex pieces."""
    x = pts.copy()
    increments = [np.zeros_like(pts) for _ in pieces]
    for _ in range(DYKSTRA_MAX_ITER):
        x_prev = x.copy()
        for k, piece in enumerate(pieces):
            y = x + increments[k]
            x = piece._project(y)
            increments[k] = y - x
        residual = float(np.max(np.abs(x - x_prev))) if len(pts) else 0.0
        if residual < DYKSTRA_TOL:
            return x
    raise ConvergenceError(
        f"Dykstra projection did not reach {DYKSTRA_TOL} in {DYKSTRA_MAX_ITER} sweeps",
        residual=residual,
    )


def _complement(basis):
    n = basis.shape[0]
    if basis.shape[1] == 0:
        return np.eye(n)
    q, _ = np.linalg.qr(np.hstack([basis, np.eye(n)]))
    return q[:, basis.shape[1] : n]


def _nullspace(mat):
    _, s, vt = np.linalg.svd(mat, full_matrices=True)
    rank = int(np.sum(s > 1e-12))
    return vt[rank:].T


def _pairwise_line_crossings(dirs, widths):
    """x1 coordinates of intersections of the boundary lines |<a_i, x>| = b_i (2D)."""
    out = []
    m = len(dirs)
    for i in range(m):
        for j in range(i + 1, m):
            mat = np.array([dirs[i], dirs[j]])
            if abs(np.linalg.det(mat)) < 1e-12:
                continue
            for si in (-1.0, 1.0):
                for sj in (-1.0, 1.0):
                    sol = np.linalg.solve(mat, np.array([si * widths[i], sj * widths[j]]))
                    out.append(sol[0])
    return out


def _numeric_section_kinks(convex_set, span=9.5, samples=2001):
    """Detect section-profile kinks of a 2D intersection by scanning x1.

    Finds where the attaining member of the section bounds changes or where
    the section toggles empty, then refines each location by bisection.
    A superset of the true kinks is returned; extras only add panels.
    """
    lo_extent = min(convex_set.bounding_radius(), span)
    xs = np.linspace(-lo_extent, lo_extent, samples)
    members = convex_set.members
    los = np.full((len(members), samples), -np.inf)
    his = np.full((len(members), samples), np.inf)
    prefixes = xs[:, None]
    for k, m in enumerate(members):
        los[k], his[k] = m.section_batch(prefixes)
    lo_arg = np.argmax(los, axis=0)
    hi_arg = np.argmin(his, axis=0)
    empty = np.max(los, axis=0) > np.min(his, axis=0)
    change = (
        (np.diff(lo_arg) != 0) | (np.diff(hi_arg) != 0) | (np.diff(empty.astype(int)) != 0)
    )
    kinks = []
    for idx in np.nonzero(change)[0]:
        a, b = xs[idx], xs[idx + 1]
        # bisect on the emptiness toggle when present, else take midpoint
        if empty[idx] != empty[idx + 1]:
            target = empty[idx + 1]
            for _ in range(60):
                mid = 0.5 * (a + b)
                lo, hi = convex_set.last_interval(np.array([mid]))
                if (lo > hi) == target:
                    b = mid
                else:
                    a = mid
            kinks.append(0.5 * (a + b))
        else:
            kinks.append(0.5 * (a + b))
    return kinks


# ---------------------------------------------------------------------------
# unlinked recognizer


UNLINKED, LINKED, UNKNOWN = "unlinked", "linked", "unknown"


def is_unlinked(a, b):
    """Tri-state structural recognizer for the cylinder-splitting relation.

    Two sets split, after a common rotation, into cylinders over complementary
    coordinate blocks exactly when the subspaces their membership constrains
    are orthogonal.  The recognizer certifies:

    - ``unlinked`` when either set is the full space, or both are proper
      cylinders whose constrained subspaces are orthogonal;
    - ``linked`` when both are proper cylinders whose constrained subspaces
      provably overlap (e.g. two slabs with non-orthogonal directions);
    - ``unknown`` otherwise (bounded bodies admit no cylinder split, and a
      complete decision procedure is out of scope).
    """
    if a.dim != b.dim:
        raise DimensionError("sets must share one ambient dimension")
    if isinstance(a.simplified(), FullSpace) or isinstance(b.simplified(), FullSpace):
        return UNLINKED
    span_a = a.constrained_basis()
    span_b = b.constrained_basis()
    if span_a.shape[1] == a.dim or span_b.shape[1] == b.dim:
        # no proper cylinder structure on at least one side: abstain
        return UNKNOWN
    overlap = np.max(np.abs(span_a.T @ span_b)) if span_a.size and span_b.size else 0.0
    if overlap <= 1e-10:
        return UNLINKED
    return LINKED


# ---------------------------------------------------------------------------
# JSON round trip

SET_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$id": "gausscorr:set",
    "title": "Symmetric convex set descriptor",
    "type": "object",
    "required": ["shape", "dim"],
    "properties": {
        "shape": {
            "enum": [
                "ball",
                "ellipsoid",
                "slab",
                "polytope",
                "product",
                "rotated",
                "intersection",
                "fullspace",
            ]
        },
        "dim": {"type": "integer", "minimum": 1},
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "matrix": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "direction": {"type": "array", "items": {"type": "number"}},
        "half_width": {"type": "number", "minimum": 0},
        "constraints": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["direction", "half_width"],
                "properties": {
                    "direction": {"type": "array", "items": {"type": "number"}},
                    "half_width": {"type": "number", "minimum": 0},
                },
            },
        },
        "factors": {"type": "array", "minItems": 1, "items": {"$ref": "gausscorr:set"}},
        "members": {"type": "array", "minItems": 1, "items": {"$ref": "gausscorr:set"}},
        "inner": {"$ref": "gausscorr:set"},
    },
    "allOf": [
        {"if": {"properties": {"shape": {"const": "ball"}}}, "then": {"required": ["radius"]}},
        {"if": {"properties": {"shape": {"const": "ellipsoid"}}}, "then": {"required": ["matrix"]}},
        {
            "if": {"properties": {"shape": {"const": "slab"}}},
            "then": {"required": ["direction", "half_width"]},
        },
        {"if": {"properties": {"shape": {"const": "polytope"}}}, "then": {"required": ["constraints"]}},
        {"if": {"properties": {"shape": {"const": "product"}}}, "then": {"required": ["factors"]}},
        {"if": {"properties": {"shape": {"const": "rotated"}}}, "then": {"required": ["matrix", "inner"]}},
        {
            "if": {"properties": {"shape": {"const": "intersection"}}},
            "then": {"required": ["members"]},
        },
    ],
}


def from_json(doc):
    """Build a descriptor from its JSON form (see SET_SCHEMA)."""
    shape = doc.get("shape")
    dim = doc.get("dim")
    if shape == "fullspace":
        return FullSpace(dim)
    if shape == "ball":
        return Ball(dim, doc["radius"])
    if shape == "ellipsoid":
        return Ellipsoid(dim, np.asarray(doc["matrix"], dtype=float))
    if shape == "slab":
        return Slab(dim, np.asarray(doc["direction"], dtype=float), doc["half_width"])
    if shape == "polytope":
        return Polytope(
            dim,
            [(np.asarray(c["direction"], dtype=float), c["half_width"]) for c in doc["constraints"]],
        )
    if shape == "product":
        return Product([from_json(f) for f in doc["factors"]])
    if shape == "rotated":
        return Rotated(np.asarray(doc["matrix"], dtype=float), from_json(doc["inner"]))
    if shape == "intersection":
        return Intersection([from_json(m) for m in doc["members"]])
    raise DomainError(f"unknown shape tag: {shape!r}")


def has_sections(convex_set):
    """True when the descriptor supports closed-form coordinate sections."""
    try:
        convex_set.last_interval(np.zeros(convex_set.dim - 1))
        return True
    except (DomainError, NotImplementedError):
        return False


def first_axis_extent(convex_set, cap=9.5):
    """sup |x1| over a 2D set (capped), found by bisection on section emptiness.

    The shadow of a convex set on the first axis is an interval around 0, so
    the nonempty-section region is [-e, e] and bisection is exact.
    """
    cached = getattr(convex_set, "_axis0_extent", None)
    if cached is not None:
        return cached

    def empty(x1):
        lo, hi = convex_set.last_interval(np.array([x1]))
        return lo > hi

    if empty(0.0):
        out = 0.0
    elif not empty(cap):
        out = cap
    else:
        a, b = 0.0, cap
        for _ in range(80):
            mid = 0.5 * (a + b)
            if empty(mid):
                b = mid
            else:
                a = mid
        out = b
    try:
        convex_set._axis0_extent = out
    except AttributeError:
        pass
    return out


def axis_box_intervals(convex_set):
    """Per-axis (lo, hi) intervals when the set is an axis-aligned box, else None.

    Free axes come back as (-inf, inf).  One-dimensional sets are always
    intervals; axis slabs, products of boxes, and intersections of boxes
    qualify in higher dimension.
    """
    s = convex_set.simplified()
    n = s.dim
    if isinstance(s, FullSpace):
        return [(-np.inf, np.inf)] * n
    if n == 1:
        lo, hi = s.last_interval(np.empty(0))
        return None if lo > hi else [(lo, hi)]
    if isinstance(s, Slab):
        nz = np.nonzero(s.direction)[0]
        if len(nz) != 1:
            return None
        axis = int(nz[0])
        edge = s.half_width / abs(s.direction[axis])
        out = [(-np.inf, np.inf)] * n
        out[axis] = (-edge, edge)
        return out
    if isinstance(s, Polytope):
        return axis_box_intervals(Intersection(list(s.slabs)))
    if isinstance(s, Product):
        out = []
        for f in s.factors:
            sub = axis_box_intervals(f)
            if sub is None:
                return None
            out.extend(sub)
        return out
    if isinstance(s, Intersection):
        out = [(-np.inf, np.inf)] * n
        for m in s.members:
            sub = axis_box_intervals(m)
            if sub is None:
                return None
            out = [(max(a, c), min(b, d)) for (a, b), (c, d) in zip(out, sub)]
        return out
    return None


def scale_set(convex_set, c):
    """The dilated set c * S = {c x : x in S} for c > 0, as a descriptor."""
    if c <= 0:
        raise DomainError("scale factor must be > 0")
    s = convex_set
    if isinstance(s, FullSpace):
        return s
    if isinstance(s, Ball):
        return Ball(s.dim, c * s.radius)
    if isinstance(s, Ellipsoid):
        return Ellipsoid(s.dim, s.sigma / c**2)
    if isinstance(s, Slab):
        return Slab(s.dim, s.direction, c * s.half_width)
    if isinstance(s, Polytope):
        return Polytope(s.dim, [(sl.direction, c * sl.half_width) for sl in s.slabs])
    if isinstance(s, Product):
        return Product([scale_set(f, c) for f in s.factors])
    if isinstance(s, Rotated):
        return Rotated(s.q, scale_set(s.inner, c))
    if isinstance(s, Intersection):
        return Intersection([scale_set(m, c) for m in s.members])
    raise DomainError(f"cannot scale shape {s.shape!r}")


def rotation_2d(angle):
    """Convenience 2x2 rotation matrix."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])

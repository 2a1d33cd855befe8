"""Declarative verification registry.

Claims are data: a checked-in JSON manifest lists every registered check
with its parameters, tags, tolerance and a self-contained statement of the
property under test.  Running a claim produces a Report; any module error is
captured in the Report rather than crashing the runner.  Reports serialize
deterministically (wall times are kept out of the canonical payload) so a
fixed seed yields byte-identical report files across runs and worker counts.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import functional as fn
from . import logconcave as lc
from . import measure as gm
from . import quadrule, semigroup, sets, stochastic, streams
from . import surrogate as sr


# ---------------------------------------------------------------------------
# descriptor parsing


def fn_from_json(doc):
    """Log-concave function from its JSON descriptor."""
    kind = doc["type"]
    if kind == "indicator":
        return lc.Indicator(sets.from_json(doc["set"]))
    if kind == "gaussian":
        return lc.GaussianFactor(doc["dim"], doc["alpha"])
    if kind == "bump":
        return lc.SmoothBump(doc["dim"], doc["radius"], doc.get("center"))
    if kind == "surrogate":
        return sr.Surrogate(
            sets.from_json(doc["set"]),
            doc["alpha"],
            doc.get("strength"),
            doc.get("eps", 0.0),
        )
    if kind == "product":
        return lc.PointwiseProduct([fn_from_json(f) for f in doc["factors"]])
    raise ValueError(f"unknown function type {kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One registered claim: a named check bound to parameters."""

    claim_id: str
    kind: str
    params: dict
    seed: int = 0
    tags: tuple = ()
    asserted: bool = True
    statement: str = ""

    def canonical(self):
        return json.dumps(
            {
                "claim_id": self.claim_id,
                "kind": self.kind,
                "params": self.params,
                "seed": self.seed,
                "asserted": self.asserted,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    @staticmethod
    def from_json(doc):
        return ExperimentConfig(
            claim_id=doc["id"],
            kind=doc["kind"],
            params=doc.get("params", {}),
            seed=doc.get("seed", 0),
            tags=tuple(doc.get("tags", ())),
            asserted=doc.get("asserted", True),
            statement=doc.get("statement", ""),
        )

    def to_json(self):
        return {
            "id": self.claim_id,
            "kind": self.kind,
            "params": self.params,
            "seed": self.seed,
            "tags": list(self.tags),
            "asserted": self.asserted,
            "statement": self.statement,
        }


@dataclass
class Report:
    claim_id: str
    digest: str
    passed: bool
    asserted: bool
    values: dict
    error: dict = None
    wall_time: float = 0.0

    def canonical_payload(self):
        """Deterministic part of the report (excludes wall time)."""
        return {
            "claim_id": self.claim_id,
            "digest": self.digest,
            "passed": self.passed,
            "asserted": self.asserted,
            "values": _jsonable(self.values),
            "error": self.error,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(np.format_float_scientific(float(obj), precision=12))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# ---------------------------------------------------------------------------
# check implementations: each returns (passed, values)


def _pairs(params):
    return [(fn_from_json(p["u"]), fn_from_json(p["v"]), p.get("name", f"pair{i}"))
            for i, p in enumerate(params["pairs"])]


def check_psi_endpoints(params, seed):
    tol = params["tol"]
    rows = []
    ok = True
    for u, v, name in _pairs(params):
        a, b = u.indicator_set, v.indicator_set
        p0 = fn.psi(u, v, 0.0, method="quadrature").value
        p1 = fn.psi(u, v, 1.0, method="quadrature").value
        prod = gm.measure(a, method="quadrature").value * gm.measure(b, method="quadrature").value
        inter = gm.measure(sets.Intersection([a, b]), method="quadrature").value
        e0, e1 = abs(p0 - prod), abs(p1 - inter)
        ok &= e0 <= tol and e1 <= tol
        rows.append({"pair": name, "product_gap": e0, "diagonal_gap": e1})
    return ok, {"rows": rows}


def check_null_first_derivative(params, seed):
    tol = params["tol"]
    rows = []
    ok = True
    for u, v, name in _pairs(params):
        d = fn.psi_dlambda(u, v, 0.0, method="quadrature").value
        ok &= abs(d) <= tol
        rows.append({"pair": name, "derivative_at_zero": d})
    return ok, {"rows": rows}


def check_monotone_lambda(params, seed):
    grid = params["grid"]
    tol = params.get("tol", 1e-6)
    rows = []
    ok = True
    if params.get("method", "quadrature") == "quadrature":
        for u, v, name in _pairs(params):
            vals = [fn.psi(u, v, lam, method="quadrature").value for lam in grid]
            worst = float(np.min(np.diff(vals)))
            ok &= worst >= -tol
            rows.append({"pair": name, "values": vals, "worst_step": worst})
    else:
        sigma = params.get("sigma", 3.0)
        samples = params.get("samples", 1_000_000)
        for u, v, name in _pairs(params):
            ests, diffs, dses = fn.psi_mc_monotone(u, v, grid, samples=samples, seed=seed)
            margin = diffs + sigma * dses
            ok &= bool(np.all(margin >= 0.0))
            rows.append(
                {
                    "pair": name,
                    "values": [e.value for e in ests],
                    "worst_margin": float(np.min(margin)),
                }
            )
    return ok, {"rows": rows}


def check_derivative_lower_bound(params, seed):
    rows = []
    ok = True
    for u, v, name in _pairs(params):
        for lam in params["lambdas"]:
            lhs, rhs, holds = fn.derivative_lower_bound_check(
                u, v, lam, tol=params.get("tol", 1e-9), method="quadrature"
            )
            ok &= holds
            rows.append({"pair": name, "lam": lam, "lhs": lhs, "rhs": rhs, "holds": holds})
    return ok, {"rows": rows}


def check_ratio_bound(params, seed):
    rows = []
    ok = True
    for u, v, name in _pairs(params):
        ratio, bound, holds = fn.global_gap_bound_check(
            u.indicator_set, v.indicator_set, tol=params.get("tol", 1e-6)
        )
        ok &= holds
        rows.append({"pair": name, "ratio": ratio, "bound": bound, "holds": holds})
    return ok, {"rows": rows}


def check_equality_characterization(params, seed):
    tol = params["tol"]
    a = sets.from_json(params["unlinked"]["a"])
    b = sets.from_json(params["unlinked"]["b"])
    ratio, _, _ = fn.global_gap_bound_check(a, b, tol=tol)
    d2_u = fn.psi_d2lambda(lc.Indicator(a), lc.Indicator(b), 0.0, method="quadrature").value
    la = sets.from_json(params["linked"]["a"])
    lb = sets.from_json(params["linked"]["b"])
    d2_quad = fn.psi_d2lambda(lc.Indicator(la), lc.Indicator(lb), 0.0, method="quadrature").value
    d2_dec, _, _ = fn.d2_at_zero_decomposed(la, lb)
    err_est = abs(d2_quad - d2_dec) + 1e-12
    factor = params.get("factor", 10.0)
    ok = (
        abs(ratio - 1.0) <= tol
        and abs(d2_u) <= tol
        and d2_quad > factor * err_est
        and abs(d2_quad - d2_dec) <= tol
    )
    return ok, {
        "unlinked_ratio_gap": abs(ratio - 1.0),
        "unlinked_d2": d2_u,
        "linked_d2": d2_quad,
        "linked_d2_decomposed": d2_dec,
        "quadrature_error_estimate": err_est,
    }


def check_pair_moments_density(params, seed):
    """Direct tensor quadrature of the pair density's first two moment identities."""
    n = params["n"]
    tol = params["tol"]
    order = params.get("order", 32)
    pts, wts = quadrule.gauss_hermite_grid(2 * n, order, budget=4_000_000)
    x, y = pts[:, :n], pts[:, n:]
    rows = []
    ok = True
    for lam in params["lambdas"]:
        pm = gm.PairMeasure(n, lam)
        ratio = gm.density_pair(pm, x, y) / (
            quadrule.norm_pdf(x).prod(axis=1) * quadrule.norm_pdf(y).prod(axis=1)
        )
        inner = float(np.sum(wts * np.einsum("ij,ij->i", x, y) * ratio))
        norm_x = float(np.sum(wts * np.einsum("ij,ij->i", x, x) * ratio))
        e1, e2 = abs(inner - lam * n), abs(norm_x - n)
        ok &= e1 <= tol and e2 <= tol
        rows.append({"lam": lam, "inner_gap": e1, "norm_gap": e2})
    mc = params.get("mc")
    if mc:
        rng = streams.stream(seed, "pair-moments")
        pm = gm.PairMeasure(mc["n"], mc["lam"])
        xs, ys = gm.sample_pair(pm, rng, mc["samples"])
        dots = np.einsum("ij,ij->i", xs, ys)
        se = dots.std(ddof=1) / np.sqrt(len(dots))
        gap = abs(dots.mean() - mc["lam"] * mc["n"])
        ok &= gap <= mc.get("sigma", 4.0) * se
        rows.append({"mc_inner_gap": float(gap), "mc_sigma": float(se)})
    return ok, {"rows": rows}


def check_gh_moments(params, seed):
    tol = params["tol"]
    rows = []
    ok = True
    for n, order in params["grids"]:
        pts, wts = gm.gaussian_quadrature_grid(n, order)
        total = float(np.sum(wts))
        second = float(np.sum(wts * pts[:, 0] ** 2))
        fourth = float(np.sum(wts * np.einsum("ij,ij->i", pts, pts) ** 2))
        ok &= abs(total - 1.0) <= tol and abs(second - 1.0) <= tol
        ok &= abs(fourth - (n**2 + 2 * n)) <= tol
        rows.append({"n": n, "order": order, "mass_gap": abs(total - 1.0),
                     "second_gap": abs(second - 1.0), "fourth_gap": abs(fourth - (n**2 + 2*n))})
    return ok, {"rows": rows}


def check_tail_bound(params, seed):
    rows = []
    ok = True
    ratios = []
    for s in params["svals"]:
        lhs, rhs = gm.gaussian_tail_bound_check(s)
        ok &= lhs <= rhs
        ratios.append(lhs / rhs)
        rows.append({"s": s, "tail": lhs, "bound": rhs})
    ok &= bool(np.all(np.diff(ratios) > 0))
    return ok, {"rows": rows, "ratios": ratios}


def check_median_ball(params, seed):
    rows = []
    ok = True
    for n in params["ns"]:
        val = gm.measure(sets.Ball(n, np.sqrt(n))).value
        ok &= val > 0.5
        rows.append({"n": n, "measure": val})
    return ok, {"rows": rows}


def check_sphere_surface(params, seed):
    vals = {
        "circle": gm.sphere_surface_measure(2, 1.0),
        "sphere": gm.sphere_surface_measure(3, 1.0),
        "zero_radius": gm.sphere_surface_measure(5, 0.0),
    }
    ok = (
        abs(vals["circle"] - 2 * np.pi) < 1e-12
        and abs(vals["sphere"] - 4 * np.pi) < 1e-12
        and vals["zero_radius"] == 0.0
    )
    return ok, vals


def check_ou_closed_form(params, seed):
    rng = streams.stream(seed, "ou-closed")
    tol = params["tol"]
    n = params.get("n", 2)
    worst = 0.0
    for _ in range(params.get("count", 100)):
        alpha = rng.uniform(0.2, 2.0)
        t = rng.uniform(0.05, 3.0)
        x = rng.standard_normal(n) * 1.5
        s = 1.0 - np.exp(-t)
        want = (1 + alpha * s) ** (-n / 2) * np.exp(
            -alpha * np.exp(-t) * (x @ x) / (2 * (1 + alpha * s))
        )
        got = semigroup.apply(lc.GaussianFactor(n, alpha), t, x)
        worst = max(worst, abs(got - want))
    return worst <= tol, {"max_abs_deviation": worst}


def check_ou_hessian_window(params, seed):
    rng = streams.stream(seed, "ou-hess")
    tol = params.get("tol", 1e-8)
    rows = []
    ok = True
    for case in params["cases"]:
        u = fn_from_json(case["fn"])
        for t in case["ts"]:
            xs = rng.standard_normal((case.get("points", 10), u.dim))
            _, _, hess = semigroup.grad_hess_many(u, t, xs)
            eigs = np.linalg.eigvalsh(hess)
            upper = 2.0 / min(1.0, t) * np.exp(-t)
            good = eigs.min() >= -tol and eigs.max() <= upper + tol
            if case["fn"]["type"] == "gaussian":
                good &= eigs.max() <= np.exp(-t) * case["fn"]["alpha"] + tol
            ok &= bool(good)
            rows.append({"t": t, "min_eig": float(eigs.min()), "max_eig": float(eigs.max()),
                         "upper": upper, "ok": bool(good)})
    return ok, {"rows": rows}


def check_ou_third_derivative(params, seed):
    rng = streams.stream(seed, "ou-d3")
    n = 2
    gf = lc.GaussianFactor(n, params.get("alpha", 0.8))
    t = params.get("t", 1.0)
    worst_gf = 0.0
    for _ in range(5):
        x = rng.standard_normal(n)
        for idx in ((0, 0, 0), (0, 0, 1), (0, 1, 1)):
            worst_gf = max(worst_gf, abs(semigroup.log_potential_d3(gf, t, x, idx)))
    su = sr.Surrogate(sets.from_json(params["surrogate_set"]), params.get("surr_alpha", 0.5))
    x = np.asarray(params.get("point", [0.6, -0.3]))
    h = params.get("step", 1e-3)
    worst_fd = 0.0
    for idx, (axis, entry) in (((0, 0, 0), (0, (0, 0))), ((0, 0, 1), (1, (0, 0))), ((0, 1, 1), (0, (1, 1)))):
        d3 = semigroup.log_potential_d3(su, t, x, idx)
        e = np.zeros(n)
        e[axis] = h
        _, hp = semigroup.log_potential_grad_hess(su, t, x + e)
        _, hm = semigroup.log_potential_grad_hess(su, t, x - e)
        fd = (hp[entry] - hm[entry]) / (2 * h)
        worst_fd = max(worst_fd, abs(d3 - fd))
    ok = worst_gf <= params.get("gf_tol", 1e-7) and worst_fd <= params.get("fd_tol", 1e-4)
    return ok, {"gaussian_max_d3": worst_gf, "surrogate_fd_gap": worst_fd}


def check_hessian_sandwich(params, seed):
    rng = streams.stream(seed, "sandwich")
    su = sr.Surrogate(
        sets.from_json(params["set"]), params["alpha"], params.get("strength"), params.get("eps", 0.0)
    )
    n = su.dim
    tol = params.get("tol", 1e-3)
    count = params.get("points", 20)
    radius = params.get("window", 3.0 * np.sqrt(n))
    rows = []
    ok = True
    for t in params["ts"]:
        dirs = rng.standard_normal((count, n))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        pts = dirs * rng.uniform(0, radius, count)[:, None]
        res = sr.hessian_sandwich_check(su, t, pts, tol=tol)
        good = all(r["ok"] for r in res)
        ok &= good
        rows.append(
            {
                "t": t,
                "min_eig": min(r["min_eig"] for r in res),
                "max_eig": max(r["max_eig"] for r in res),
                "lower": res[0]["lower_bound"],
                "upper": res[0]["upper_bound"],
                "ok": good,
            }
        )
    ind = params.get("indicator_upper")
    if ind:
        u = lc.Indicator(sets.from_json(ind["set"]))
        for t in ind["ts"]:
            xs = rng.standard_normal((10, u.dim))
            _, _, hess = semigroup.grad_hess_many(u, t, xs)
            eigs = np.linalg.eigvalsh(hess)
            upper = 2.0 / min(1.0, t) * np.exp(-t)
            good = bool(eigs.max() <= upper + tol and eigs.min() >= -tol)
            ok &= good
            rows.append({"indicator_t": t, "max_eig": float(eigs.max()), "upper": upper, "ok": good})
    return ok, {"rows": rows}


def check_curvature_identity(params, seed):
    rows = []
    ok = True
    for case in params["cases"]:
        u, v = fn_from_json(case["u"]), fn_from_json(case["v"])
        lhs, rhs = semigroup.phi_curvature_identity(u, v, case["t"], h=case.get("h", 0.02))
        rel = abs(lhs - rhs) / max(abs(lhs), 1e-12)
        good = rel <= params.get("rel_tol", 1e-3)
        ok &= good
        rows.append({"t": case["t"], "lhs": lhs, "rhs": rhs, "rel_gap": rel, "ok": good})
    return ok, {"rows": rows}


def check_derivative_fd(params, seed):
    tol = params.get("tol", 1e-5)
    h = params.get("step", 1e-4)
    rows = []
    ok = True
    for u, v, name in _pairs(params):
        for lam in params["lambdas"]:
            pp = fn.psi(u, v, lam + h, method="quadrature").value
            pm = fn.psi(u, v, lam - h, method="quadrature").value
            pc = fn.psi(u, v, lam, method="quadrature").value
            fd1 = (pp - pm) / (2 * h)
            fd2 = (pp - 2 * pc + pm) / h**2
            d1 = fn.psi_dlambda(u, v, lam, method="quadrature").value
            d2 = fn.psi_d2lambda(u, v, lam, method="quadrature").value
            good = abs(d1 - fd1) <= tol and abs(d2 - fd2) <= params.get("tol_second", 1e-4)
            ok &= good
            rows.append({"pair": name, "lam": lam, "first_gap": abs(d1 - fd1),
                         "second_gap": abs(d2 - fd2), "ok": good})
    return ok, {"rows": rows}


def check_semigroup_law(params, seed):
    rng = streams.stream(seed, "sg-law")
    tol = params.get("tol", 1e-6)
    u = fn_from_json(params["fn"])
    rows = []
    ok = True
    for s, t in params["steps"]:
        x = rng.standard_normal(u.dim)
        ev = semigroup.EvolvedPotential(u, s)
        lhs = semigroup.apply(ev, t, x)
        rhs = semigroup.apply(u, s + t, x)
        ok &= abs(lhs - rhs) <= tol
        rows.append({"s": s, "t": t, "gap": abs(lhs - rhs)})
    return ok, {"rows": rows}


def check_semigroup_symmetry(params, seed):
    tol = params.get("tol", 1e-6)
    u, v = fn_from_json(params["u"]), fn_from_json(params["v"])
    t = params["t"]
    n = u.dim
    ev_u = semigroup.EvolvedPotential(u, t)
    ev_v = semigroup.EvolvedPotential(v, t)
    lhs = fn.mu_expectation([ev_u, v], n)
    rhs = fn.mu_expectation([u, ev_v], n)
    via_psi = fn.phi(u, v, t, method="quadrature").value
    ok = abs(lhs - rhs) <= tol and abs(lhs - via_psi) <= tol
    return ok, {"smoothed_first": lhs, "smoothed_second": rhs, "via_mixing": via_psi}


def check_time_derivative_identity(params, seed):
    tol = params.get("tol", 1e-4)
    u, v = fn_from_json(params["u"]), fn_from_json(params["v"])
    fd, integral = semigroup.time_derivative_check(u, v, params["t"], h=params.get("h", 0.01))
    ok = abs(fd - integral) <= tol
    return ok, {"finite_difference": fd, "gradient_integral": integral, "gap": abs(fd - integral)}


def check_gradient_commutation(params, seed):
    rng = streams.stream(seed, "commute")
    rows = []
    ok = True
    for case in params["cases"]:
        u = fn_from_json(case["fn"])
        t = case["t"]
        tol = case.get("tol", 1e-6)
        x = np.asarray(case.get("point", rng.standard_normal(u.dim)))
        h = 1e-5
        worst = 0.0
        for axis in range(u.dim):
            e = np.zeros(u.dim)
            e[axis] = h
            left = (semigroup.apply(u, t, x + e) - semigroup.apply(u, t, x - e)) / (2 * h)
            comp = lc.CustomFunction(
                lambda pts, a=axis: u.gradient(pts)[:, a],
                u.dim,
                radial=False,
                radial_break_list=u.radial_breaks(),
                support=u.support_radius(),
            )
            right = np.exp(-t / 2) * semigroup.apply(comp, t, x)
            worst = max(worst, abs(left - right))
        ok &= worst <= tol
        rows.append({"fn": case["fn"]["type"], "t": t, "gap": worst, "tol": tol})
    return ok, {"rows": rows}


def check_log_concavity_preservation(params, seed):
    rng = streams.stream(seed, "logconv")
    tol = params.get("tol", 1e-8)
    worst = np.inf
    for case in params["cases"]:
        u = fn_from_json(case["fn"])
        for _ in range(case.get("samples", 10)):
            t = rng.uniform(0.06, 2.5)
            x = rng.standard_normal(u.dim) * 1.5
            _, _, hess = semigroup.grad_hess_many(u, t, x[None, :])
            worst = min(worst, float(np.linalg.eigvalsh(hess[0]).min()))
    return worst >= -tol, {"min_eigenvalue_seen": worst}


def check_lebesgue_gradient(params, seed):
    rows = []
    ok = True
    for case in params["cases"]:
        u = lc.SmoothBump(case["dim"], case["ru"])
        v = lc.SmoothBump(case["dim"], case["rv"])
        val = fn.lebesgue_gradient_check(u, v, grid=case.get("grid", 128))
        good = val >= -params.get("tol", 1e-9)
        if case["ru"] == case["rv"]:
            good &= val > 0
        ok &= good
        rows.append({"dim": case["dim"], "value": val, "ok": good})
    # evenness contract: a shifted bump must be rejected
    try:
        fn.lebesgue_gradient_check(
            lc.SmoothBump(1, 1.0), lc.SmoothBump(1, 1.0, center=[0.4]), grid=32
        )
        contract = False
    except Exception as exc:  # noqa: BLE001
        contract = type(exc).__name__ == "EvennessError"
    ok &= contract
    return ok, {"rows": rows, "shifted_bump_rejected": contract}


def check_quadratic_factor_bound(params, seed):
    """E[f u] <= E[f] E[u] under mu for quadratic-form f and even log-concave u."""
    tol = params.get("tol", 1e-9)
    rows = []
    ok = True
    for case in params["cases"]:
        u = fn_from_json(case["u"])
        n = u.dim
        mat = np.asarray(case["quad"], dtype=float)
        f = lc.CustomFunction(lambda pts, m=mat: np.einsum("ij,jk,ik->i", pts, m, pts), n)
        lhs = fn.mu_expectation([u, f], n)
        eu = fn.mu_expectation([u], n)
        ef = float(np.trace(mat))
        good = lhs <= eu * ef + tol
        ok &= good
        rows.append({"lhs": lhs, "rhs": eu * ef, "ok": good})
    return ok, {"rows": rows}


def check_inner_product_positivity(params, seed):
    tol = params.get("tol", 1e-9)
    rows = []
    ok = True
    for u, v, name in _pairs(params):
        for lam in params["lambdas"]:
            val = fn.inner_product_pair_integral(u, v, lam)
            good = val >= -tol
            ok &= good
            rows.append({"pair": name, "lam": lam, "value": val, "ok": good})
    return ok, {"rows": rows}


def check_tensorization(params, seed):
    tol = params.get("tol", 1e-6)
    a = sets.from_json(params["a"])
    b = sets.from_json(params["b"])
    rows = []
    ok = True
    for lam in params["lambdas"]:
        base = fn.psi(lc.Indicator(a), lc.Indicator(b), lam, method="quadrature").value
        for m in params["powers"]:
            am = sets.Product([a] * m)
            bm = sets.Product([b] * m)
            val = fn.psi(lc.Indicator(am), lc.Indicator(bm), lam, method="quadrature").value
            gap = abs(val - base**m)
            ok &= gap <= tol
            rows.append({"lam": lam, "m": m, "gap": gap})
    return ok, {"rows": rows}


def check_convex_factor_bound(params, seed):
    """E[u v] <= E[u] E[v] under mu for even log-concave u and convex even v."""
    tol = params.get("tol", 1e-9)
    rows = []
    ok = True
    for case in params["cases"]:
        u = fn_from_json(case["u"])
        n = u.dim
        mat = np.asarray(case["quad"], dtype=float)
        const = case.get("const", 0.0)
        v = lc.CustomFunction(
            lambda pts, m=mat, c=const: np.einsum("ij,jk,ik->i", pts, m, pts) + c, n
        )
        lhs = fn.mu_expectation([u, v], n)
        rhs = fn.mu_expectation([u], n) * (float(np.trace(mat)) + const)
        good = lhs <= rhs + tol
        ok &= good
        rows.append({"lhs": lhs, "rhs": rhs, "ok": good})
    return ok, {"rows": rows}


def check_surrogate_pointwise(params, seed):
    rng = streams.stream(seed, "surrogate-pw")
    rows = []
    ok = True
    for case in params["cases"]:
        su = sr.Surrogate(sets.from_json(case["set"]), case["alpha"])
        n = su.dim
        pts = rng.standard_normal((params.get("samples", 200), n)) * 2.0
        vals = su(pts)
        gauss = np.exp(-0.5 * case["alpha"] * np.einsum("ij,ij->i", pts, pts))
        inside = su.set.contains(pts)
        dominated = bool(np.all(vals <= gauss + 1e-12))
        equality = bool(np.allclose(vals[inside], gauss[inside], atol=1e-12))
        grads = su.potential_gradient(pts)
        grad_ok = bool(
            np.all(
                np.linalg.norm(grads, axis=1)
                <= case["alpha"] * np.linalg.norm(pts, axis=1) + su.strength + 1e-9
            )
        )
        qs = rng.standard_normal((params.get("samples", 200), n)) * 2.0
        lip = bool(
            np.all(
                np.abs(su.set.distance(pts) - su.set.distance(qs))
                <= np.linalg.norm(pts - qs, axis=1) + 1e-10
            )
        )
        even = bool(np.allclose(vals, su(-pts), atol=1e-12))
        logc = lc.spot_check_log_concave(su, rng)
        # penalty strength: exp(-m rho) drops geometrically in m off the set
        x_out = pts[~inside]
        decay = True
        if len(x_out):
            rho = su.set.distance(x_out[:1])
            r1 = np.exp(-1.0 * rho)
            decay = bool(np.exp(-2.0 * rho) <= r1**2 + 1e-15)
        good = dominated and equality and grad_ok and lip and even and logc and decay
        ok &= good
        rows.append(
            {
                "set": case["set"]["shape"],
                "dominated": dominated,
                "equality_on_set": equality,
                "gradient_bound": grad_ok,
                "lipschitz": lip,
                "even": even,
                "log_concave": logc,
                "ok": good,
            }
        )
    return ok, {"rows": rows}


def check_indicator_sandwich(params, seed):
    rows = []
    ok = True
    for case in params["cases"]:
        target = sets.from_json(case["set"])
        u = fn_from_json(case["u"]) if case.get("u") else None
        res = sr.indicator_sandwich_check(target, case["alpha"], u)
        ok &= res["holds"]
        rows.append(
            {
                "n": target.dim,
                "alpha": case["alpha"],
                "holds": res["holds"],
                "upper_ratio": res["upper_ratio"],
                "upper_within_4": res["upper_within_4"],
            }
        )
    return ok, {"rows": rows}


def check_smoothed_sandwich(params, seed):
    a = sets.from_json(params["a"])
    b = sets.from_json(params["b"])
    res = sr.smoothed_indicator_sandwich_check(a, b, params["alpha"], params["t"])
    return res["holds"], res


def check_level_set_structure(params, seed):
    rng = streams.stream(seed, "levelset")
    su = sr.Surrogate(sets.from_json(params["set"]), params["alpha"])
    levels = params["levels"]
    pts = rng.standard_normal((400, su.dim)) * 2.5
    nested = True
    memberships = []
    for r in levels:
        memberships.append(sr.LevelSet(su, r).contains(pts))
    for small, large in zip(memberships[:-1], memberships[1:]):
        nested &= bool(np.all(large | ~small))
    ls = sr.LevelSet(su, levels[-1])
    bounded = bool(np.all(~ls.contains(pts[np.linalg.norm(pts, axis=1) > ls.bounding_radius()])
                   ) if np.any(np.linalg.norm(pts, axis=1) > ls.bounding_radius()) else True)
    # convexity spot check on the midpoints of member pairs
    members = pts[memberships[-1]]
    convex = True
    if len(members) >= 2:
        mid = 0.5 * (members[:-1] + members[1:])
        convex = bool(np.all(ls.contains(mid)))
    example = params.get("example")
    example_ok = True
    if example:
        inside = sr.LevelSet(su, example["r"]).contains(np.asarray(example["inside"]))
        outside = not sr.LevelSet(su, example["r"]).contains(np.asarray(example["outside"]))
        example_ok = bool(inside and outside)
    ok = nested and bounded and convex and example_ok
    return ok, {"nested": nested, "bounded": bounded, "convex_spot": convex, "example": example_ok}


def check_small_scale_smoothing(params, seed):
    res = sr.small_scale_smoothing_check(
        sets.from_json(params["set"]), params["r0"], params["t0"], seed=seed
    )
    return res["holds"], res


def check_poincare(params, seed):
    rows = []
    ok = True
    for case in params["cases"]:
        weight = fn_from_json(case["weight"]) if case.get("weight") else None
        n = case["n"]
        test_fn = (
            sr.CoordinateFn(n, case.get("axis", 0))
            if case["test"] == "coordinate"
            else sr.SquaredNormFn(n)
        )
        var, energy, holds = sr.poincare_check(weight, test_fn, n)
        good = holds
        if case.get("equality"):
            good &= abs(var - energy) <= params.get("equality_tol", 1e-9)
        if case.get("expect_var") is not None:
            good &= abs(var - case["expect_var"]) <= 1e-6
        ok &= bool(good)
        rows.append({"n": n, "variance": var, "energy": energy, "ok": bool(good)})
    return ok, {"rows": rows}


def check_isoperimetric(params, seed):
    rows = []
    ok = True
    for case in params["cases"]:
        weight = fn_from_json(case["weight"]) if case.get("weight") else None
        n = case["n"]
        if case["region"] == "halfspace":
            region = sr.HalfSpace(n, np.asarray(case["direction"]), case["offset"])
        else:
            region = sets.from_json(case["region"])
        lhs, rhs, holds = sr.isoperimetric_check(weight, region, case["r"], n)
        good = holds
        if case.get("equality"):
            good &= abs(lhs - rhs) <= params.get("equality_tol", 1e-6)
        ok &= bool(good)
        rows.append({"n": n, "r": case["r"], "lhs": lhs, "rhs": rhs, "ok": bool(good)})
    return ok, {"rows": rows}


def check_unlinked_recognizer(params, seed):
    rows = []
    ok = True
    for case in params["cases"]:
        a = sets.from_json(case["a"])
        b = sets.from_json(case["b"])
        got = sets.is_unlinked(a, b)
        good = got == case["expect"]
        if got == sets.UNLINKED and a.dim <= 2 and not a.degenerate and not b.degenerate:
            ratio, _, _ = fn.global_gap_bound_check(a, b)
            good &= abs(ratio - 1.0) <= 1e-6
        ok &= bool(good)
        rows.append({"expect": case["expect"], "got": got, "ok": bool(good)})
    return ok, {"rows": rows}


def check_pair_density_forms(params, seed):
    rng = streams.stream(seed, "pair-density")
    n = params.get("n", 2)
    x = rng.standard_normal((100, n))
    y = rng.standard_normal((100, n))
    pm0 = gm.PairMeasure(n, 0.0)
    factorized = float(
        np.max(
            np.abs(
                gm.density_pair(pm0, x, y)
                - quadrule.norm_pdf(x).prod(axis=1) * quadrule.norm_pdf(y).prod(axis=1)
            )
        )
    )
    pm = gm.PairMeasure(n, params.get("lam", 0.3))
    symmetric = float(np.max(np.abs(gm.density_pair(pm, x, y) - gm.density_pair(pm, y, x))))
    xs, ys = gm.sample_pair(gm.PairMeasure(n, 1.0), rng, 100)
    diag = float(np.max(np.abs(xs - ys)))
    xs0, ys0 = gm.sample_pair(pm0, rng, params.get("samples", 200_000))
    cov = xs0[:, 0] * ys0[:, 0]
    se = cov.std(ddof=1) / np.sqrt(len(cov))
    indep = abs(cov.mean()) <= 4.0 * se
    ok = factorized < 1e-14 and symmetric < 1e-14 and diag == 0.0 and bool(indep)
    return ok, {
        "factorization_gap": factorized,
        "symmetry_gap": symmetric,
        "diagonal_gap": diag,
        "independence_cov": float(cov.mean()),
    }


def check_spectral_gap_interval(params, seed):
    target = np.pi**2 / 8.0
    est = stochastic.spectral_gap(
        sets.Slab(1, np.array([1.0]), 1.0),
        paths=params["paths"],
        dt=params["dt"],
        t_max=params.get("t_max", 4.0),
        seed=seed,
    )
    rel = abs(est.value - target) / target
    ok = rel <= params.get("rel_tol", 0.05)
    return ok, {"estimate": est.value, "std_error": est.std_error, "target": target, "rel_gap": rel}


def check_spectral_gap_rectangle(params, seed):
    target = np.pi**2 / 4.0
    rect = sets.Intersection(
        [sets.Slab(2, np.array([1.0, 0.0]), 1.0), sets.Slab(2, np.array([0.0, 1.0]), 1.0)]
    )
    est = stochastic.spectral_gap(
        rect, paths=params["paths"], dt=params["dt"], t_max=params.get("t_max", 2.2), seed=seed
    )
    rel = abs(est.value - target) / target
    ok = rel <= params.get("rel_tol", 0.05)
    return ok, {"estimate": est.value, "std_error": est.std_error, "target": target, "rel_gap": rel}


def check_gap_dt_halving(params, seed):
    interval = sets.Slab(1, np.array([1.0]), 1.0)
    dt = params["dt"]
    paths = params["paths"]
    a = stochastic.spectral_gap(interval, paths=paths, dt=dt, t_max=params.get("t_max", 4.0),
                                seed=seed, label="gap-dt")
    b = stochastic.spectral_gap(interval, paths=paths, dt=dt / 2, t_max=params.get("t_max", 4.0),
                                seed=seed, label="gap-dt2")
    gap = abs(a.value - b.value)
    ok = gap <= a.std_error + b.std_error
    return ok, {"coarse": a.value, "fine": b.value, "gap": gap,
                "se_sum": a.std_error + b.std_error}


def check_gap_subadditivity(params, seed):
    a = sets.from_json(params["a"])
    b = sets.from_json(params["b"])
    ga, gb, gab, holds = stochastic.gap_subadditivity_check(
        a, b, paths=params["paths"], dt=params["dt"], t_max=params.get("t_max", 2.5), seed=seed
    )
    return holds, {
        "gap_a": ga.value,
        "gap_b": gb.value,
        "gap_ab": gab.value,
        "slack": ga.value + gb.value - gab.value,
    }


def check_exit_scaling(params, seed):
    from scipy import stats as sps

    r = params.get("r", 1.5)
    times_unit, _ = stochastic.simulate_exit_times(
        sets.Ball(2, 1.0), params["dt"], params.get("t_max", 3.0), params["paths"], seed, "scale1"
    )
    times_big, _ = stochastic.simulate_exit_times(
        sets.Ball(2, r), params["dt"] * r**2, params.get("t_max", 3.0) * r**2,
        params["paths"], seed, "scale2"
    )
    a = times_unit[np.isfinite(times_unit)]
    b = times_big[np.isfinite(times_big)] / r**2
    stat, pval = sps.ks_2samp(a, b)
    ok = pval > params.get("alpha", 0.01)
    return ok, {"ks_stat": float(stat), "p_value": float(pval)}


def check_subordinator_laplace(params, seed):
    spec = stochastic.SubordinatorSpec(jump=("stable", params["beta"]))
    rows = stochastic.laplace_transform_check(
        spec, params["lams"], draws=params["draws"], seed=seed
    )
    ok = all(r["holds"] for r in rows)
    rng = streams.stream(seed, "sub-path")
    path = stochastic.sample_subordinator(spec, np.linspace(0.1, 2.0, 20), rng, paths=50)
    nondecreasing = bool(np.all(np.diff(path, axis=1) >= 0))
    drift = stochastic.sample_subordinator(
        stochastic.SubordinatorSpec(drift=1.0), np.array([0.5, 1.0, 2.0]), rng, paths=3
    )
    drift_exact = bool(np.allclose(drift, np.tile([0.5, 1.0, 2.0], (3, 1))))
    lam_grid = np.linspace(0.1, 4.0, 30)
    psi_vals = spec.laplace_exponent(lam_grid)
    exponent_ok = bool(
        np.all(psi_vals >= 0) and np.all(np.diff(psi_vals) >= 0) and np.all(np.diff(psi_vals, 2) <= 1e-12)
    )
    ok = ok and nondecreasing and drift_exact and exponent_ok
    return ok, {"rows": rows, "nondecreasing": nondecreasing, "drift_exact": drift_exact,
                "exponent_shape": exponent_ok}


def check_sbm_correlation(params, seed):
    rows = []
    ok = True
    for case in params["cases"]:
        spec = stochastic.SubordinatorSpec(
            drift=case.get("drift", 0.0),
            jump=tuple(case["jump"]) if case.get("jump") else None,
        )
        a = sets.from_json(case["a"])
        b = sets.from_json(case["b"])
        p_ab, p_prod, holds, diag = stochastic.sbm_correlation_check(
            a, b, spec, case["times"], case["n_space"], paths=case.get("paths", 200_000),
            seed=seed,
        )
        good = holds
        if case.get("near_equality"):
            good &= abs(p_ab - p_prod) <= 4.0 * diag["std_error"] + 1e-9
        ok &= bool(good)
        rows.append({"p_joint": p_ab, "p_product": p_prod, "holds": holds,
                     "std_error": diag["std_error"], "ok": bool(good)})
    return ok, {"rows": rows}


def check_fkg(params, seed):
    def fn_mono(doc):
        if doc[0] == "coord":
            return stochastic.CoordFn(doc[1])
        if doc[0] == "affine":
            return stochastic.AffineFn(np.asarray(doc[1], dtype=float), doc[2] if len(doc) > 2 else 0.0)
        if doc[0] == "min_const":
            return stochastic.MinWithConstFn(fn_mono(doc[1]), doc[2])
        if doc[0] == "const":
            return stochastic.ConstFn(doc[1])
        raise ValueError(f"unknown monotone descriptor {doc[0]!r}")

    rows = []
    ok = True
    for case in params["cases"]:
        f = fn_mono(case["f"])
        g = fn_mono(case["g"])
        marginals = [tuple(m) for m in case["marginals"]]
        e_fg, e_f_e_g, holds = stochastic.fkg_check(f, g, marginals, tol=params.get("tol", 1e-9))
        good = holds
        if case.get("equality"):
            good &= abs(e_fg - e_f_e_g) <= 1e-9
        ok &= bool(good)
        rows.append({"e_fg": e_fg, "e_f_e_g": e_f_e_g, "ok": bool(good)})
    return ok, {"rows": rows}


def check_psi_symmetry(params, seed):
    tol = params.get("tol", 1e-8)
    u, v = fn_from_json(params["u"]), fn_from_json(params["v"])
    rows = []
    ok = True
    for t in params["ts"]:
        a = fn.phi(u, v, t, method="quadrature").value
        b = fn.phi(v, u, t, method="quadrature").value
        ok &= abs(a - b) <= tol
        rows.append({"t": t, "gap": abs(a - b)})
    return ok, {"rows": rows}


CHECKS = {
    "psi_endpoints": check_psi_endpoints,
    "null_first_derivative": check_null_first_derivative,
    "monotone_lambda": check_monotone_lambda,
    "derivative_lower_bound": check_derivative_lower_bound,
    "ratio_bound": check_ratio_bound,
    "equality_characterization": check_equality_characterization,
    "pair_moments_density": check_pair_moments_density,
    "gh_moments": check_gh_moments,
    "tail_bound": check_tail_bound,
    "median_ball": check_median_ball,
    "sphere_surface": check_sphere_surface,
    "ou_closed_form": check_ou_closed_form,
    "ou_hessian_window": check_ou_hessian_window,
    "ou_third_derivative": check_ou_third_derivative,
    "hessian_sandwich": check_hessian_sandwich,
    "curvature_identity": check_curvature_identity,
    "derivative_fd": check_derivative_fd,
    "semigroup_law": check_semigroup_law,
    "semigroup_symmetry": check_semigroup_symmetry,
    "time_derivative_identity": check_time_derivative_identity,
    "gradient_commutation": check_gradient_commutation,
    "log_concavity_preservation": check_log_concavity_preservation,
    "lebesgue_gradient": check_lebesgue_gradient,
    "quadratic_factor_bound": check_quadratic_factor_bound,
    "inner_product_positivity": check_inner_product_positivity,
    "tensorization": check_tensorization,
    "convex_factor_bound": check_convex_factor_bound,
    "surrogate_pointwise": check_surrogate_pointwise,
    "indicator_sandwich": check_indicator_sandwich,
    "smoothed_sandwich": check_smoothed_sandwich,
    "level_set_structure": check_level_set_structure,
    "small_scale_smoothing": check_small_scale_smoothing,
    "poincare": check_poincare,
    "isoperimetric": check_isoperimetric,
    "unlinked_recognizer": check_unlinked_recognizer,
    "pair_density_forms": check_pair_density_forms,
    "spectral_gap_interval": check_spectral_gap_interval,
    "spectral_gap_rectangle": check_spectral_gap_rectangle,
    "gap_dt_halving": check_gap_dt_halving,
    "gap_subadditivity": check_gap_subadditivity,
    "exit_scaling": check_exit_scaling,
    "subordinator_laplace": check_subordinator_laplace,
    "sbm_correlation": check_sbm_correlation,
    "fkg": check_fkg,
    "psi_symmetry": check_psi_symmetry,
}


# ---------------------------------------------------------------------------
# runner


def run(config):
    """Execute one claim; errors are captured, never raised."""
    start = time.perf_counter()
    try:
        passed, values = CHECKS[config.kind](config.params, config.seed)
        report = Report(
            claim_id=config.claim_id,
            digest=config.digest(),
            passed=bool(passed),
            asserted=config.asserted,
            values=values,
        )
    except Exception as exc:  # noqa: BLE001 - failures must be reported, not crash
        report = Report(
            claim_id=config.claim_id,
            digest=config.digest(),
            passed=False,
            asserted=config.asserted,
            values={},
            error={"type": type(exc).__name__, "message": str(exc)},
        )
    report.wall_time = time.perf_counter() - start
    return report


def load_manifest(path=None, seed=None):
    if path is None:
        text = resources.files("gausscorr").joinpath("claims/manifest.json").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    configs = [ExperimentConfig.from_json(doc) for doc in json.loads(text)]
    if seed is not None:
        configs = [
            ExperimentConfig(
                c.claim_id, c.kind, c.params, seed, c.tags, c.asserted, c.statement
            )
            for c in configs
        ]
    return configs


def run_all(tag_filter=None, seed=None, manifest_path=None, progress=None):
    """Run every claim whose tags match the filter; returns (reports, summary)."""
    configs = load_manifest(manifest_path, seed)
    if tag_filter and tag_filter != "all":
        configs = [c for c in configs if tag_filter in c.tags or c.claim_id == tag_filter]
    reports = []
    for c in configs:
        rep = run(c)
        reports.append(rep)
        if progress:
            progress(c, rep)
    failed = [r for r in reports if r.asserted and not r.passed and r.error is None]
    errored = [r for r in reports if r.error is not None and r.asserted]
    # configuration/module errors exit distinctly (2) from honest check failures (1)
    exit_code = 0
    if failed:
        exit_code = 1
    if errored:
        exit_code = 2
    summary = {
        "claims": len(reports),
        "passed": sum(1 for r in reports if r.passed),
        "failed": len(failed),
        "errors": len(errored),
        "wall_time": float(sum(r.wall_time for r in reports)),
        "exit_code": exit_code,
    }
    return reports, summary


def report_lines(reports):
    """Deterministic JSON-lines serialization (no wall times)."""
    return "\n".join(
        json.dumps(r.canonical_payload(), sort_keys=True, separators=(",", ":"))
        for r in reports
    ) + "\n"

"""Command-line front end.

Subcommands: measure, psi, derivative, evolve, surrogate, spectral-gap,
sbm-check, verify, schema.  Results are written as CSV (plus a JSON sidecar
embedding the full configuration where noted); ``--plot`` renders a figure
next to the delimited output.  Exit codes: 0 success, 1 a check failed,
2 usage or configuration error.  All writes are atomic (temp file + rename).

The default seed is 0, overridable by the GAUSSCORR_SEED environment
variable, a config file, and the --seed flag, in increasing precedence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import functional as fn
from . import measure as gm
from . import semigroup, sets, stochastic, verify
from . import surrogate as sr
from .errors import GaussCorrError

SEED_ENV = "GAUSSCORR_SEED"


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".gausscorr-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _resolve_seed(args, config=None):
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    if config and "seed" in config:
        return int(config["seed"])
    return int(os.environ.get(SEED_ENV, "0"))


def _parse_grid(text):
    """start:end:step grid, inclusive of both endpoints within 1e-12."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError("grid must be start:end:step")
    start, end, step = (float(p) for p in parts)
    if step <= 0:
        raise ValueError("grid step must be > 0")
    count = int(np.floor((end - start) / step + 1e-12)) + 1
    grid = [start + k * step for k in range(count)]
    if grid and abs(grid[-1] - end) > 1e-12:
        grid.append(end)
    return grid


def _load_json_arg(text):
    if text.strip().startswith("{"):
        return json.loads(text)
    with open(text, encoding="utf-8") as fh:
        return json.load(fh)


def _maybe_plot(args, make_figure):
    if not getattr(args, "plot", False):
        return
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig = make_figure(plt)
    target = os.path.splitext(args.out)[0] + ".png"
    fig.savefig(target, dpi=150, bbox_inches="tight")
    plt.close(fig)
    print(f"figure written to {target}", file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommands


def cmd_measure(args):
    doc = _load_json_arg(args.set)
    target = sets.from_json(doc)
    seed = _resolve_seed(args)
    est = gm.measure(target, method=args.method, samples=args.samples, seed=seed)
    rows = [["measure", "mu", est.value, est.std_error, est.tag(), est.n_used, seed]]
    text = _csv_text(
        ["experiment_id", "quantity", "value", "std_error", "method", "n_used", "seed"], rows
    )
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    print(f"measure = {est.value:.12g}" + (f" +- {est.std_error:.3g}" if est.std_error else ""),
          file=sys.stderr)
    return 0


def _function_from_config(doc):
    return verify.fn_from_json(doc)


def cmd_psi(args):
    config = _load_json_arg(args.config)
    seed = _resolve_seed(args, config)
    u = _function_from_config(config["u"])
    v = _function_from_config(config["v"])
    if args.lambda_grid:
        grid = _parse_grid(args.lambda_grid)
        param_name = "lambda"
        lams = grid
    elif args.t_grid:
        grid = _parse_grid(args.t_grid)
        param_name = "t"
        lams = [float(np.exp(-0.5 * t)) for t in grid]
    else:
        grid = [config.get("lambda", 0.5)]
        param_name = "lambda"
        lams = grid
    method = args.method or config.get("method", "auto")
    rows = []
    for par, lam in zip(grid, lams):
        est = fn.psi(u, v, lam, method=method, samples=args.samples, seed=seed)
        rows.append(
            ["psi", f"{param_name}={par:.12g}", est.value, est.std_error, est.tag(), est.n_used, seed]
        )
    text = _csv_text(
        ["experiment_id", "quantity", "value", "std_error", "method", "n_used", "seed"], rows
    )
    _atomic_write(args.out, text)
    sidecar = {
        "config": config,
        "grid": {param_name: grid},
        "method": method,
        "seed": seed,
        "values": [r[2] for r in rows],
    }
    _atomic_write(os.path.splitext(args.out)[0] + ".json", json.dumps(sidecar, indent=1, sort_keys=True))

    def figure(plt):
        fig, ax = plt.subplots(figsize=(5.2, 3.4))
        ax.plot(grid, [r[2] for r in rows], marker="o", ms=3)
        ax.set_xlabel(param_name)
        ax.set_ylabel("correlation integral")
        ax.grid(alpha=0.3)
        return fig

    _maybe_plot(args, figure)
    return 0


def cmd_derivative(args):
    config = _load_json_arg(args.config)
    seed = _resolve_seed(args, config)
    u = _function_from_config(config["u"])
    v = _function_from_config(config["v"])
    grid = _parse_grid(args.lambda_grid) if args.lambda_grid else [config.get("lambda", 0.5)]
    op = fn.psi_dlambda if args.order == 1 else fn.psi_d2lambda
    rows = []
    for lam in grid:
        est = op(u, v, lam, method=args.method or "auto", samples=args.samples, seed=seed)
        rows.append(
            [f"dpsi{args.order}", f"lambda={lam:.12g}", est.value, est.std_error, est.tag(),
             est.n_used, seed]
        )
    text = _csv_text(
        ["experiment_id", "quantity", "value", "std_error", "method", "n_used", "seed"], rows
    )
    _atomic_write(args.out, text)

    def figure(plt):
        fig, ax = plt.subplots(figsize=(5.2, 3.4))
        ax.plot(grid, [r[2] for r in rows], marker="s", ms=3, color="tab:red")
        ax.axhline(0.0, lw=0.8, color="k")
        ax.set_xlabel("lambda")
        ax.set_ylabel(f"derivative (order {args.order})")
        ax.grid(alpha=0.3)
        return fig

    _maybe_plot(args, figure)
    return 0


def cmd_evolve(args):
    config = _load_json_arg(args.config)
    seed = _resolve_seed(args, config)
    u = _function_from_config(config["fn"])
    ts = config.get("ts", [args.t]) if args.t is None else [args.t]
    points = np.asarray(config["points"], dtype=float)
    rows = []
    for t in ts:
        vals = semigroup.apply_many(u, t, points)
        if t > 0:
            _, grads, hessians = semigroup.grad_hess_many(u, t, points)
        else:
            grads = np.full_like(points, np.nan)
            hessians = None
        for i, x in enumerate(points):
            eigs = (
                sorted(np.linalg.eigvalsh(hessians[i]).tolist()) if hessians is not None else []
            )
            rows.append(
                [json.dumps(x.tolist()), t, vals[i], json.dumps(grads[i].tolist()),
                 json.dumps(eigs), seed]
            )
    text = _csv_text(["x", "t", "smoothed_value", "potential_gradient", "hessian_eigs", "seed"], rows)
    _atomic_write(args.out, text)

    def figure(plt):
        fig, ax = plt.subplots(figsize=(5.2, 3.4))
        for t in ts:
            sub = [r for r in rows if r[1] == t]
            ax.plot(range(len(sub)), [r[2] for r in sub], marker="o", ms=3, label=f"t={t}")
        ax.set_xlabel("point index")
        ax.set_ylabel("smoothed value")
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
        return fig

    _maybe_plot(args, figure)
    return 0


def cmd_surrogate(args):
    doc = _load_json_arg(args.set)
    target = sets.from_json(doc)
    seed = _resolve_seed(args)
    su = sr.Surrogate(target, args.alpha, eps=args.eps)
    if args.points:
        pts = np.asarray(json.loads(args.points), dtype=float)
    else:
        rng = np.random.default_rng(seed)
        raw = rng.standard_normal((args.n_points, target.dim))
        raw /= np.linalg.norm(raw, axis=1)[:, None]
        pts = raw * rng.uniform(0, 3.0 * np.sqrt(target.dim), args.n_points)[:, None]
    rows_data = sr.hessian_sandwich_check(su, args.t, pts, tol=args.tol)
    rows = [
        [json.dumps(r["x"].tolist()), r["potential"], r["min_eig"], r["max_eig"],
         r["lower_bound"], r["upper_bound"], r["ok"]]
        for r in rows_data
    ]
    text = _csv_text(["x", "H", "min_eig", "max_eig", "lower_bound", "upper_bound", "ok"], rows)
    _atomic_write(args.out, text)
    bad = sum(1 for r in rows_data if not r["ok"])
    print(f"{len(rows_data) - bad}/{len(rows_data)} points inside the eigenvalue window",
          file=sys.stderr)

    def figure(plt):
        fig, ax = plt.subplots(figsize=(5.2, 3.4))
        idx = range(len(rows_data))
        ax.plot(idx, [r["min_eig"] for r in rows_data], "v", ms=4, label="min eig")
        ax.plot(idx, [r["max_eig"] for r in rows_data], "^", ms=4, label="max eig")
        ax.axhline(rows_data[0]["lower_bound"], ls="--", color="tab:green", lw=1, label="lower bound")
        ax.axhline(rows_data[0]["upper_bound"], ls="--", color="tab:red", lw=1, label="upper bound")
        ax.set_xlabel("point index")
        ax.set_ylabel("eigenvalue")
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
        return fig

    _maybe_plot(args, figure)
    return 0 if bad == 0 else 1


def cmd_spectral_gap(args):
    doc = _load_json_arg(args.set)
    target = sets.from_json(doc)
    seed = _resolve_seed(args)
    try:
        est = stochastic.spectral_gap(
            target, paths=args.paths, dt=args.dt, t_max=args.t_max, seed=seed,
            threads=args.threads,
        )
    except GaussCorrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    curve = est.curve
    rows = [
        [t, s, curve.total, hw]
        for t, s, hw in zip(curve.times, curve.survivors, curve.ci_halfwidth)
    ]
    text = _csv_text(["t", "survivors", "total", "ci_halfwidth"], rows)
    _atomic_write(args.out, text)
    sidecar = {
        "gap": est.value,
        "std_error": est.std_error,
        "fit_window": list(est.fit_window),
        "paths": est.n_used,
        "dt": args.dt,
        "seed": seed,
        "flag": est.flag,
    }
    _atomic_write(os.path.splitext(args.out)[0] + ".json", json.dumps(sidecar, indent=1, sort_keys=True))
    print(f"gap = {est.value:.5f} +- {est.std_error:.5f}", file=sys.stderr)

    def figure(plt):
        fig, ax = plt.subplots(figsize=(5.2, 3.4))
        p = curve.probabilities()
        keep = p > 0
        ax.semilogy(curve.times[keep], p[keep], lw=1.2, label="survival")
        t0, t1 = est.fit_window
        tt = np.linspace(t0, t1, 50)
        anchor = np.interp(t0, curve.times[keep], p[keep])
        ax.semilogy(tt, anchor * np.exp(-est.value * (tt - t0)), "--", color="tab:red",
                    label=f"fit rate {est.value:.3f}")
        ax.set_xlabel("t")
        ax.set_ylabel("P(exit time > t)")
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3, which="both")
        return fig

    _maybe_plot(args, figure)
    return 0


def cmd_sbm_check(args):
    config = _load_json_arg(args.config)
    seed = _resolve_seed(args, config)
    spec = stochastic.SubordinatorSpec(
        drift=config.get("drift", 0.0),
        jump=tuple(config["jump"]) if config.get("jump") else None,
    )
    a = sets.from_json(config["a"])
    b = sets.from_json(config["b"])
    p_ab, p_prod, holds, diag = stochastic.sbm_correlation_check(
        a, b, spec, config["times"], config["n_space"],
        paths=config.get("paths", args.paths), seed=seed,
    )
    rows = [["sbm-check", p_ab, p_prod, diag["std_error"], holds, diag["paths"], seed]]
    text = _csv_text(
        ["experiment_id", "p_joint", "p_product", "std_error", "holds", "paths", "seed"], rows
    )
    _atomic_write(args.out, text)
    print(f"p_joint = {p_ab:.6f}, p_product = {p_prod:.6f}, holds = {holds}", file=sys.stderr)
    return 0 if holds else 1


def cmd_verify(args):
    seed = _resolve_seed(args)

    def progress(config, report):
        status = "PASS" if report.passed else ("ERROR" if report.error else "FAIL")
        print(f"{status:5s} {config.claim_id} ({report.wall_time:.2f}s)", file=sys.stderr)

    reports, summary = verify.run_all(
        tag_filter=args.filter, seed=seed, manifest_path=args.manifest, progress=progress
    )
    _atomic_write(args.out, verify.report_lines(reports))
    print(
        f"{summary['passed']}/{summary['claims']} claims passed, "
        f"{summary['failed']} failed, {summary['errors']} errored "
        f"({summary['wall_time']:.1f}s)",
        file=sys.stderr,
    )
    if args.summary_json:
        payload = dict(summary)
        payload.pop("wall_time")
        _atomic_write(args.summary_json, json.dumps(payload, indent=1, sort_keys=True))

    def figure(plt):
        fig, ax = plt.subplots(figsize=(6.0, 0.25 * max(len(reports), 4) + 1.0))
        names = [r.claim_id for r in reports]
        times = [r.wall_time for r in reports]
        colors = ["tab:green" if r.passed else "tab:red" for r in reports]
        ax.barh(range(len(names)), times, color=colors)
        ax.set_yticks(range(len(names)))
        ax.set_yticklabels(names, fontsize=6)
        ax.set_xlabel("wall time (s)")
        ax.invert_yaxis()
        return fig

    _maybe_plot(args, figure)
    return summary["exit_code"]


def cmd_schema(args):
    doc = {
        "set": sets.SET_SCHEMA,
        "function": {
            "$schema": "https://json-schema.org/draft/2020-12/schema",
            "$id": "gausscorr:function",
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["indicator", "gaussian", "bump", "surrogate", "product"]},
                "set": {"$ref": "gausscorr:set"},
                "dim": {"type": "integer", "minimum": 1},
                "alpha": {"type": "number"},
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "center": {"type": "array", "items": {"type": "number"}},
                "strength": {"type": "number"},
                "eps": {"type": "number", "minimum": 0},
                "factors": {"type": "array", "items": {"$ref": "gausscorr:function"}},
            },
        },
    }
    text = json.dumps(doc, indent=1, sort_keys=True)
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text + "\n")
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gausscorr",
        description="Numerical laboratory for Gaussian correlation inequalities",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_out=True):
        p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config/env)")
        if needs_out:
            p.add_argument("--out", required=True, help="output CSV path")
        p.add_argument("--threads", type=int, default=1, help="worker count (results invariant)")
        p.add_argument("--plot", action="store_true", help="render a figure next to the CSV")

    p = sub.add_parser("measure", help="Gaussian measure of a set descriptor")
    p.add_argument("--set", required=True, help="set descriptor JSON (inline or path)")
    p.add_argument("--method", default="auto", choices=["auto", "exact", "quadrature", "mc"])
    p.add_argument("--samples", type=int, default=gm.MC_DEFAULT)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("psi", help="correlation integral over a mixing or time grid")
    p.add_argument("--config", required=True, help="JSON with u, v descriptors (inline or path)")
    p.add_argument("--lambda-grid", default=None, help="start:end:step, endpoints inclusive")
    p.add_argument("--t-grid", default=None, help="time grid start:end:step")
    p.add_argument("--method", default=None, choices=[None, "auto", "quadrature", "mc"])
    p.add_argument("--samples", type=int, default=gm.MC_DEFAULT)
    add_common(p)
    p.set_defaults(func=cmd_psi)

    p = sub.add_parser("derivative", help="first or second mixing derivative")
    p.add_argument("--config", required=True)
    p.add_argument("--order", type=int, default=1, choices=[1, 2])
    p.add_argument("--lambda-grid", default=None)
    p.add_argument("--method", default=None, choices=[None, "auto", "quadrature", "mc"])
    p.add_argument("--samples", type=int, default=gm.MC_DEFAULT)
    add_common(p)
    p.set_defaults(func=cmd_derivative)

    p = sub.add_parser("evolve", help="smoothed values, gradients and Hessian eigenvalues")
    p.add_argument("--config", required=True, help="JSON with fn, points, ts")
    p.add_argument("--t", type=float, default=None, help="single smoothing time (overrides config)")
    add_common(p)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("surrogate", help="evolved-surrogate eigenvalue window diagnostics")
    p.add_argument("--set", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--points", default=None, help="JSON list of points (default: sampled)")
    p.add_argument("--n-points", type=int, default=20)
    add_common(p)
    p.set_defaults(func=cmd_surrogate)

    p = sub.add_parser("spectral-gap", help="Brownian survival decay rate of a domain")
    p.add_argument("--set", required=True)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--t-max", type=float, default=4.0)
    add_common(p)
    p.set_defaults(func=cmd_spectral_gap)

    p = sub.add_parser("sbm-check", help="correlation check for subordinate Brownian motion")
    p.add_argument("--config", required=True)
    p.add_argument("--paths", type=int, default=200_000)
    add_common(p)
    p.set_defaults(func=cmd_sbm_check)

    p = sub.add_parser("verify", help="run registered claims")
    p.add_argument("--filter", default="all", help="tag filter (e.g. fast, all)")
    p.add_argument("--manifest", default=None, help="alternative manifest path")
    p.add_argument("--summary-json", default=None)
    add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("schema", help="print the JSON schemas for descriptors")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_schema)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except GaussCorrError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Acceptance gate: every criterion asserted at its pinned tolerance.

Each criterion prints one PASS line with the measured numbers (run with
``pytest -s tests/test_acceptance.py`` to see them).  The registered claims
are executed once per session through the verification registry and the
criteria assert directly on the reported values.
"""

import json

import numpy as np
import pytest

from gausscorr import cli, sets, stochastic, verify

ACCEPTANCE_SEED = 0

CLAIMS_NEEDED = [
    "psi-endpoints-product-intersection",
    "psi-first-derivative-null-at-zero",
    "psi-monotone-lambda-quadrature",
    "psi-monotone-lambda-mc-n10",
    "psi-derivative-lower-bound",
    "intersection-ratio-lower-bound",
    "equality-characterization-unlinked",
    "pair-density-moment-identities",
    "hermite-grid-moments",
    "sphere-surface-closed-form",
    "ou-gaussian-closed-form",
    "evolved-surrogate-hessian-sandwich",
    "phi-curvature-identity",
    "psi-derivative-fd-consistency",
    "ou-third-derivative-moments",
    "logconcave-poincare",
    "gaussian-isoperimetric-enlargement",
    "surrogate-indicator-sandwich",
    "spectral-gap-interval",
    "spectral-gap-dt-halving",
    "spectral-gap-rectangle-separability",
    "spectral-gap-subadditivity",
    "subordinator-laplace-transform",
    "subordinate-brownian-correlation",
    "fkg-product-measures",
]


@pytest.fixture(scope="session")
def reports():
    configs = {c.claim_id: c for c in verify.load_manifest(seed=ACCEPTANCE_SEED)}
    out = {}
    for cid in CLAIMS_NEEDED:
        out[cid] = verify.run(configs[cid])
    return out


def _ok(report):
    assert report.error is None, report.error
    return report.values


def test_criterion_01_endpoint_consistency(reports):
    values = _ok(reports["psi-endpoints-product-intersection"])
    worst = max(max(r["product_gap"], r["diagonal_gap"]) for r in values["rows"])
    assert len(values["rows"]) == 5
    assert worst <= 1e-6
    print(f"criterion 01 endpoint consistency: PASS (worst gap {worst:.2e} <= 1e-6, 5 pairs)")


def test_criterion_02_null_first_derivative(reports):
    values = _ok(reports["psi-first-derivative-null-at-zero"])
    worst = max(abs(r["derivative_at_zero"]) for r in values["rows"])
    assert worst <= 1e-6
    print(f"criterion 02 null derivative at 0: PASS (worst |d| {worst:.2e} <= 1e-6)")


def test_criterion_03_monotonicity(reports):
    quad = _ok(reports["psi-monotone-lambda-quadrature"])
    worst_q = min(r["worst_step"] for r in quad["rows"])
    assert worst_q >= -1e-6
    mc = _ok(reports["psi-monotone-lambda-mc-n10"])
    worst_m = min(r["worst_margin"] for r in mc["rows"])
    assert worst_m >= 0.0
    print(
        f"criterion 03 monotonicity: PASS (quadrature worst step {worst_q:.2e} >= -1e-6; "
        f"n=10 MC 3-sigma margin {worst_m:.2e} >= 0)"
    )


def test_criterion_04_derivative_and_ratio_bounds(reports):
    dlb = _ok(reports["psi-derivative-lower-bound"])
    assert all(r["holds"] for r in dlb["rows"])
    rb = _ok(reports["intersection-ratio-lower-bound"])
    assert all(r["holds"] for r in rb["rows"])
    assert all(r["ratio"] >= 1.0 - 1e-6 for r in rb["rows"])
    assert all(r["ratio"] >= r["bound"] * (1 - 1e-6) for r in rb["rows"])
    min_ratio = min(r["ratio"] for r in rb["rows"])
    print(
        f"criterion 04 derivative/ratio bounds: PASS ({len(dlb['rows'])} derivative rows hold; "
        f"min ratio {min_ratio:.8f} >= 1 - 1e-6)"
    )


def test_criterion_05_equality_characterization(reports):
    v = _ok(reports["equality-characterization-unlinked"])
    assert v["unlinked_ratio_gap"] <= 1e-6
    assert abs(v["unlinked_d2"]) <= 1e-6
    assert v["linked_d2"] > 10.0 * v["quadrature_error_estimate"]
    print(
        f"criterion 05 equality characterization: PASS (|ratio-1| {v['unlinked_ratio_gap']:.2e}, "
        f"|d2| {abs(v['unlinked_d2']):.2e} <= 1e-6; linked d2 {v['linked_d2']:.4f} > 10x error "
        f"{v['quadrature_error_estimate']:.2e})"
    )


def test_criterion_06_moment_identities(reports):
    pm = _ok(reports["pair-density-moment-identities"])
    pair_rows = [r for r in pm["rows"] if "lam" in r]
    assert {r["lam"] for r in pair_rows} == {0.25, 0.5, 0.75}
    worst_pair = max(max(r["inner_gap"], r["norm_gap"]) for r in pair_rows)
    assert worst_pair <= 1e-8
    gh = _ok(reports["hermite-grid-moments"])
    worst_gh = max(r["fourth_gap"] for r in gh["rows"])
    assert worst_gh <= 1e-8
    sphere = _ok(reports["sphere-surface-closed-form"])
    assert sphere["circle"] == pytest.approx(2 * np.pi, abs=1e-12)
    assert sphere["sphere"] == pytest.approx(4 * np.pi, abs=1e-12)
    print(
        f"criterion 06 moment identities: PASS (pair gaps {worst_pair:.2e} <= 1e-8; "
        f"|x|^4 gaps {worst_gh:.2e} <= 1e-8; sphere areas exact)"
    )


def test_criterion_07_ou_closed_form(reports):
    v = _ok(reports["ou-gaussian-closed-form"])
    assert v["max_abs_deviation"] <= 1e-8
    print(f"criterion 07 smoothing closed form: PASS (max deviation {v['max_abs_deviation']:.2e} <= 1e-8, 100 triples)")


def test_criterion_08_hessian_sandwich(reports):
    v = _ok(reports["evolved-surrogate-hessian-sandwich"])
    surrogate_rows = [r for r in v["rows"] if "t" in r]
    assert {r["t"] for r in surrogate_rows} == {0.5, 1.0, 2.0}
    for r in surrogate_rows:
        assert r["min_eig"] >= r["lower"] - 1e-3
        assert r["max_eig"] <= r["upper"] + 1e-3
    ind_rows = [r for r in v["rows"] if "indicator_t" in r]
    assert ind_rows and all(r["ok"] for r in ind_rows)
    assert min(r["indicator_t"] for r in ind_rows) >= 0.1
    print(
        "criterion 08 evolved-potential eigenvalue window: PASS "
        f"({len(surrogate_rows)} surrogate rows in window +-1e-3; indicator upper bound at "
        f"t in {sorted(r['indicator_t'] for r in ind_rows)})"
    )


def test_criterion_09_curvature_identity(reports):
    v = _ok(reports["phi-curvature-identity"])
    worst = max(r["rel_gap"] for r in v["rows"])
    assert worst <= 1e-3
    print(f"criterion 09 curvature identity: PASS (worst relative gap {worst:.2e} <= 1e-3)")


def test_criterion_10_derivative_formula_cross_checks(reports):
    fd = _ok(reports["psi-derivative-fd-consistency"])
    assert {r["lam"] for r in fd["rows"]} == {0.1, 0.5, 0.8}
    worst_first = max(r["first_gap"] for r in fd["rows"])
    assert worst_first <= 1e-5
    d3 = _ok(reports["ou-third-derivative-moments"])
    assert d3["surrogate_fd_gap"] <= 1e-4
    print(
        f"criterion 10 derivative cross-checks: PASS (first-derivative FD gap {worst_first:.2e} "
        f"<= 1e-5; third-derivative vs Hessian FD {d3['surrogate_fd_gap']:.2e} <= 1e-4)"
    )


def test_criterion_11_poincare_isoperimetric(reports):
    poincare = _ok(reports["logconcave-poincare"])
    assert all(r["ok"] for r in poincare["rows"])
    iso = _ok(reports["gaussian-isoperimetric-enlargement"])
    assert all(r["ok"] for r in iso["rows"])
    halfspace = iso["rows"][0]
    assert abs(halfspace["lhs"] - halfspace["rhs"]) <= 1e-6
    print(
        f"criterion 11 variance/enlargement bounds: PASS ({len(poincare['rows'])} variance rows, "
        f"{len(iso['rows'])} enlargement rows; half-space equality gap "
        f"{abs(halfspace['lhs'] - halfspace['rhs']):.2e} <= 1e-6)"
    )


def test_criterion_12_indicator_sandwich(reports):
    v = _ok(reports["surrogate-indicator-sandwich"])
    assert {r["n"] for r in v["rows"]} == {1, 2, 3}
    assert all(r["holds"] for r in v["rows"])
    ratios = [round(r["upper_ratio"], 3) for r in v["rows"]]
    print(f"criterion 12 indicator sandwich: PASS (n in {{1,2,3}} hold; diagnostic upper ratios {ratios})")


def test_criterion_13_spectral_gaps(reports):
    gap = _ok(reports["spectral-gap-interval"])
    assert gap["rel_gap"] <= 0.05
    halving = _ok(reports["spectral-gap-dt-halving"])
    assert halving["gap"] <= halving["se_sum"]
    rect = _ok(reports["spectral-gap-rectangle-separability"])
    assert rect["rel_gap"] <= 0.05
    sub = _ok(reports["spectral-gap-subadditivity"])
    assert reports["spectral-gap-subadditivity"].passed
    print(
        f"criterion 13 spectral gaps: PASS (interval {gap['estimate']:.4f} vs {gap['target']:.4f}, "
        f"rel {gap['rel_gap']*100:.1f}% <= 5%; dt-halving gap {halving['gap']:.4f} <= "
        f"{halving['se_sum']:.4f}; rectangle rel {rect['rel_gap']*100:.1f}% <= 5%; "
        f"subadditivity slack {sub['slack']:.3f} >= -3 sigma)"
    )


def test_criterion_14_subordinators(reports):
    lap = _ok(reports["subordinator-laplace-transform"])
    assert all(r["holds"] for r in lap["rows"])
    assert {r["lam"] for r in lap["rows"]} == {0.5, 1.0, 2.0}
    sbm = _ok(reports["subordinate-brownian-correlation"])
    assert all(r["ok"] for r in sbm["rows"])
    print(
        f"criterion 14 subordinators: PASS (Laplace transform within 4 sigma at 3 points, 1e6 draws; "
        f"{len(sbm['rows'])} correlation cases within 3 sigma)"
    )


def test_criterion_15_fkg(reports):
    v = _ok(reports["fkg-product-measures"])
    assert all(r["ok"] for r in v["rows"])
    print(f"criterion 15 product-measure correlation: PASS ({len(v['rows'])} monotone pairs)")


def test_criterion_16_determinism(tmp_path):
    out1, out2 = tmp_path / "r1.jsonl", tmp_path / "r2.jsonl"
    assert cli.main(["verify", "--filter", "fast", "--seed", "11", "--out", str(out1)]) == 0
    assert cli.main(
        ["verify", "--filter", "fast", "--seed", "11", "--out", str(out2), "--threads", "4"]
    ) == 0
    assert out1.read_bytes() == out2.read_bytes()
    # worker invariance of the path machinery behind the stochastic claims
    interval = sets.Slab(1, np.array([1.0]), 1.0)
    g1 = stochastic.spectral_gap(interval, paths=20_000, dt=1e-3, t_max=3.0, seed=11, threads=1)
    g2 = stochastic.spectral_gap(interval, paths=20_000, dt=1e-3, t_max=3.0, seed=11, threads=2)
    assert g1.value == g2.value
    payloads = [json.loads(line) for line in out1.read_text().strip().splitlines()]
    assert payloads and all("digest" in p for p in payloads)
    print(
        f"criterion 16 determinism: PASS (byte-identical reports across runs and --threads; "
        f"{len(payloads)} claims)"
    )

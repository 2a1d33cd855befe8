import json

import numpy as np
import pytest

from gausscorr import verify

# The registry is data: this checked-in list is the coverage contract.
# Every id must be present in the manifest and every manifest entry must be
# one of these ids with a runnable kind and a nonempty statement.
REQUIRED_CLAIMS = {
    "psi-endpoints-product-intersection",
    "psi-first-derivative-null-at-zero",
    "psi-monotone-lambda-quadrature",
    "psi-monotone-lambda-mc-n10",
    "psi-derivative-lower-bound",
    "intersection-ratio-lower-bound",
    "equality-characterization-unlinked",
    "pair-density-moment-identities",
    "hermite-grid-moments",
    "gaussian-tail-bound",
    "median-ball-lower-half",
    "sphere-surface-closed-form",
    "ou-gaussian-closed-form",
    "ou-hessian-window",
    "ou-third-derivative-moments",
    "evolved-surrogate-hessian-sandwich",
    "phi-curvature-identity",
    "psi-derivative-fd-consistency",
    "ou-semigroup-law",
    "ou-self-adjointness",
    "phi-time-derivative-gradient-form",
    "ou-gradient-commutation",
    "ou-preserves-log-concavity",
    "lebesgue-gradient-positivity",
    "quadratic-factor-upper-bound",
    "pair-inner-product-positivity",
    "psi-tensorization-powers",
    "convex-factor-upper-bound",
    "surrogate-pointwise-structure",
    "surrogate-indicator-sandwich",
    "surrogate-smoothed-sandwich",
    "surrogate-smoothed-sandwich-2d",
    "surrogate-level-sets",
    "smoothing-small-scale-bounds",
    "logconcave-poincare",
    "gaussian-isoperimetric-enlargement",
    "unlinked-recognizer-cases",
    "pair-density-structure",
    "spectral-gap-interval",
    "spectral-gap-rectangle-separability",
    "spectral-gap-dt-halving",
    "spectral-gap-subadditivity",
    "exit-time-scaling-law",
    "subordinator-laplace-transform",
    "subordinate-brownian-correlation",
    "fkg-product-measures",
    "phi-symmetry-swap",
}


def test_registry_completeness():
    configs = verify.load_manifest()
    ids = {c.claim_id for c in configs}
    assert ids == REQUIRED_CLAIMS
    assert len(configs) == len(ids), "claim ids must be unique"
    for c in configs:
        assert c.kind in verify.CHECKS, c.kind
        assert c.statement.strip(), c.claim_id
        assert c.tags, c.claim_id


def test_config_serialization_round_trip():
    for c in verify.load_manifest():
        back = verify.ExperimentConfig.from_json(c.to_json())
        assert back == c
        assert back.digest() == c.digest()


def test_digest_depends_on_params():
    a = verify.ExperimentConfig("x", "sphere_surface", {}, 0)
    b = verify.ExperimentConfig("x", "sphere_surface", {"extra": 1}, 0)
    assert a.digest() != b.digest()


def test_run_captures_errors_as_reports():
    bad = verify.ExperimentConfig(
        "broken", "ratio_bound",
        {"pairs": [{"u": {"type": "indicator", "set": {"shape": "nonsense", "dim": 2}},
                    "v": {"type": "gaussian", "dim": 2, "alpha": 1.0}}]},
    )
    rep = verify.run(bad)
    assert not rep.passed
    assert rep.error is not None
    assert "shape" in rep.error["message"]


def test_reports_deterministic_for_fixed_seed():
    c = [c for c in verify.load_manifest() if c.claim_id == "pair-density-structure"][0]
    lines = [verify.report_lines([verify.run(c)]) for _ in range(2)]
    assert lines[0] == lines[1]
    payload = json.loads(lines[0].strip())
    assert set(payload) == {"claim_id", "digest", "passed", "asserted", "values", "error"}


def test_run_all_filter_and_exit_code():
    reports, summary = verify.run_all(tag_filter="no-such-tag")
    assert summary["claims"] == 0
    assert summary["exit_code"] == 0
    assert reports == []


def test_seed_override_threads_through():
    configs = verify.load_manifest(seed=123)
    assert all(c.seed == 123 for c in configs)


def test_fn_from_json_variants():
    doc = {"type": "product", "factors": [
        {"type": "indicator", "set": {"shape": "ball", "dim": 2, "radius": 1.0}},
        {"type": "gaussian", "dim": 2, "alpha": 0.5}]}
    f = verify.fn_from_json(doc)
    x = np.array([0.3, 0.1])
    assert f(x) == pytest.approx(np.exp(-0.25 * (x @ x)))
    with pytest.raises(ValueError):
        verify.fn_from_json({"type": "mystery"})

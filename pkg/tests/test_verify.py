import importlib
import json

import pytest

from solitonlab import verify


@pytest.fixture(scope="module")
def full_report():
    return verify.run_suite(seed=42)


def test_seed_42_all_pass(full_report):
    assert full_report.passed, full_report.table()
    assert len(full_report.checks) >= 25
    assert full_report.seed == 42


def test_report_order_follows_manifest(full_report):
    seen = [c.family for c in full_report.checks]
    order = [f for f in verify.FAMILIES if f in seen]
    assert sorted(seen, key=order.index) == seen
    assert set(seen) == set(verify.FAMILIES)


def test_fd_override_fails_with_same_residuals(full_report):
    tight = verify.run_suite(["calibration", "cotton-identities"], seed=42, tolerances={"fd": 1e-15})
    base = {c.name: c for c in full_report.checks}
    fd = [c for c in tight.checks if c.kind == "fd"]
    assert fd and not tight.passed
    assert all(not c.passed for c in fd if base[c.name].residual > 1e-15)
    for c in tight.checks:
        assert c.residual == base[c.name].residual
        if c.kind == "fd":
            assert c.tolerance == 1e-15


def test_override_precedence():
    rep = verify.run_suite("calibration", tolerances={"fd": 1e-15, "calibration": 1.0,
                                                      "calibration/S2-analytic": 2.0})
    tols = {c.name: c.tolerance for c in rep.checks}
    assert tols.pop("calibration/S2-analytic") == 2.0
    assert set(tols.values()) == {1.0}
    assert rep.passed


def test_selection_single_family():
    rep = verify.run_suite("warped-vs-chart", seed=42)
    assert {c.family for c in rep.checks} == {"warped-vs-chart"}
    assert rep.passed


def test_unknown_family_rejected():
    with pytest.raises(ValueError):
        verify.checks_for("no-such-family")


def test_rerun_bit_identical():
    a = verify.run_suite(["cotton-identities", "branch", "levelset"], seed=7)
    b = verify.run_suite(["cotton-identities", "branch", "levelset"], seed=7)
    assert json.dumps(a.to_json(runtimes=False)) == json.dumps(b.to_json(runtimes=False))


def test_crashing_check_is_a_failure(monkeypatch):
    def boom(seed):
        return [verify._Check("branch/boom", "branch", "raises", "analytic", 1.0, lambda: 1 / 0)]
    monkeypatch.setitem(verify.BUILDERS, "branch", boom)
    rep = verify.run_suite("branch")
    (c,) = rep.checks
    assert not c.passed and "ZeroDivisionError" in c.error
    assert c.residual != c.residual


def test_report_json_shape(full_report):
    d = full_report.to_json()
    assert set(d) >= {"seed", "mode", "checks", "passed"}
    assert set(d["checks"][0]) >= {"name", "family", "anchor", "kind", "residual", "tolerance", "passed"}
    assert full_report.table().splitlines()[-1].startswith(f"{len(full_report.checks)} checks, 0 failed")


def test_coverage_manifest():
    for op, fams in verify.COVERAGE.items():
        mod, name = op.split(".")
        assert callable(getattr(importlib.import_module(f"solitonlab.{mod}"), name)), op
        assert fams and set(fams) <= set(verify.FAMILIES), op
    names = {c.family for c in verify.checks_for()}
    assert all(set(f) <= names for f in verify.COVERAGE.values())


def test_coverage_includes_every_curvature_operation():
    required = {
        "warped.warped_riemann", "warped.warped_ricci", "warped.warped_scalar", "warped.warped_weyl",
        "warped.radial_cotton", "warped.radial_cao_chen", "warped.build_warped_chart",
        "conformal.schouten", "conformal.cotton", "conformal.weyl", "conformal.cao_chen",
        "conformal.div_cotton", "conformal.cotton_identity_residuals", "conformal.triple_divergence_residual",
        "chart.riemann", "chart.ricci_scalar", "chart.hessian",
        "soliton.solve_profile", "soliton.classify_branch", "soliton.scalar_relation_residual",
        "soliton.levelset_report",
    }
    assert required <= set(verify.COVERAGE)

import io
import json
import math

import numpy as np
import pytest

from solitonlab import catalog, soliton as sl, warped as wp
from solitonlab.errors import BlowUp, CriticalPoint, FiberDataInsufficient, Inconclusive

S2 = wp.SpaceForm(2, 1.0)


def yamabe(step=1e-3, span=5.0, rho=0.0, init=(1.0, 0.0, 1.0, 0.0)):
    return sl.solve_profile(sl.SolitonSpec(3, S2, sl.Yamabe(rho), init, step=step, span=span))


@pytest.fixture(scope="module")
def ysol():
    return yamabe()


def test_product_steady_state():
    s = yamabe(rho=2.0, init=(0.0, 0.0, 1.0, 0.0), span=10.0)
    assert np.all(s.Fpp == 0) and np.all(s.Fp == 1)
    assert np.max(np.abs(s.R - 2)) <= 1e-12
    assert s.termination == {"left": "span", "right": "span"}
    assert s.span == pytest.approx((-10.0, 10.0))


def test_oscillator_zeros_spaced_pi():
    spec = sl.SolitonSpec(3, wp.SpaceForm(2, 0.0), sl.GenericConformal("-F"), (0.0, 0.0, 1.0, 0.0))
    s = sl.solve_profile(spec)
    assert s.zeros == pytest.approx([-math.pi / 2, math.pi / 2], abs=1e-6)
    assert s.termination == {"left": "zero", "right": "zero"}
    assert np.max(np.abs(s.Fp - np.cos(s.r))) <= 1e-6


def test_yamabe_example_residuals(ysol):
    assert sl.driver_residual(ysol) <= 1e-8
    assert sl.scalar_relation_residual(ysol) <= 1e-8
    idx = np.linspace(100, len(ysol.r) - 100, 10).astype(int)
    assert sl.chart_closure_residual(ysol, S2, idx) <= 1e-5


def test_phi_equals_second_derivative(ysol):
    assert np.max(np.abs(ysol.phi - ysol.Fpp)) <= 1e-10
    R = wp.scalar_from_warp(3, 2.0, ysol.Fp, ysol.Fpp, ysol.Fppp)
    assert np.max(np.abs(R - ysol.R)) <= 1e-10


def test_rk4_fourth_order():
    ref = yamabe(step=0.0025, span=2.0)
    errs = []
    for h in (0.04, 0.02):
        s = yamabe(step=h, span=2.0)
        errs.append(abs(s.Fp[-1] - ref.Fp[-1]) + abs(s.Fpp[-1] - ref.Fpp[-1]))
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.125)


def test_implicit_scalar_driver_matches_yamabe(ysol):
    spec = sl.SolitonSpec(3, S2, sl.GenericConformal("R"), (1.0, 0.0, 1.0, 0.0), span=5.0)
    s = sl.solve_profile(spec)
    assert np.max(np.abs(s.Fp - ysol.Fp)) <= 1e-10
    assert sl.driver_residual(s) <= 1e-8


def test_corrupted_scalar_detected(ysol):
    s = yamabe()
    s.R = s.R + 0.1
    expected = 0.1 * float(np.max(s.Fp**2))
    assert sl.scalar_relation_residual(s) == pytest.approx(expected, rel=1e-6)


def test_blowup_reported():
    spec = sl.SolitonSpec(3, S2, sl.GenericConformal("Fp^3"), (0.0, 0.0, 1.0, 0.0), step=1e-2, span=10)
    with pytest.raises(BlowUp) as exc:
        sl.solve_profile(spec)
    sol = exc.value.solution
    assert "blowup" in sol.termination.values()
    with pytest.raises(Inconclusive):
        sl.classify_branch(sol)


def test_explicit_fiber_rejected():
    fiber = wp.ExplicitChart(catalog.sphere(2), (1.0, 0.5))
    with pytest.raises(FiberDataInsufficient):
        sl.solve_profile(sl.SolitonSpec(3, fiber, sl.Yamabe(0.0)))


def test_spec_validation():
    with pytest.raises(ValueError):
        sl.SolitonSpec(3, S2, sl.Yamabe(0.0), (0, 0, 0, 0))
    with pytest.raises(ValueError):
        sl.SolitonSpec(3, S2, sl.Yamabe(0.0), step=-1)
    with pytest.raises(ValueError):
        sl.SolitonSpec(4, S2, sl.Yamabe(0.0))


@pytest.mark.parametrize("expr, interval, branch, nzeros", [
    ("sin(r)", (-0.3, math.pi + 0.3), "Compact", 2),
    ("r", (-1.0, 1.0), "HalfLine", 1),
    ("cosh(r)", (-2.0, 2.0), "FullLine", 0),
])
def test_branch_fixtures(expr, interval, branch, nzeros):
    rep = sl.classify_branch(sl.solution_from_profile(expr, np.linspace(*interval, 2001)))
    assert rep.branch == branch and len(rep.zeros) == nzeros
    assert rep.provisional == (branch == "FullLine")
    assert rep.span == pytest.approx(interval)


def test_branch_zero_locations():
    rep = sl.classify_branch(sl.solution_from_profile("sin(r)", np.linspace(-0.3, math.pi + 0.3, 2001)))
    assert rep.zeros == pytest.approx((0.0, math.pi), abs=1e-6)


def test_too_many_zeros_inconclusive():
    with pytest.raises(Inconclusive):
        sl.classify_branch(sl.solution_from_profile("sin(r)", np.linspace(-1, 10, 2001)))


def test_levelset_flat_gaussian():
    rep = sl.levelset_report(catalog.flat(3), "0.5*(x^2 + y^2 + z^2)", (2 / math.sqrt(3),) * 3)
    assert rep.grad_norm == pytest.approx(2.0)
    assert rep.phi == pytest.approx(1.0)
    assert rep.H == pytest.approx(1.0)
    assert np.allclose(rep.B.comp, 0.5 * np.eye(2))
    assert max(rep.residual_B, rep.residual_H) <= 1e-6


def test_levelset_sphere_cosine():
    rep = sl.levelset_report(catalog.sphere(3), "-cos(r)", (math.pi / 3, 1.0, 0.5))
    assert rep.grad_norm == pytest.approx(math.sqrt(3) / 2)
    assert rep.phi == pytest.approx(0.5)
    assert rep.H == pytest.approx(2 / math.sqrt(3))
    assert max(rep.residual_B, rep.residual_H) <= 1e-6


def test_levelset_hyperbolic_cosh():
    rep = sl.levelset_report(catalog.hyperbolic(3), "cosh(r)", (1.0, 1.0, 0.5))
    assert rep.phi == pytest.approx(math.cosh(1.0))
    assert rep.H == pytest.approx(2 * math.cosh(1.0) / math.sinh(1.0))
    assert max(rep.residual_B, rep.residual_H) <= 1e-6


def test_levelset_critical_point():
    with pytest.raises(CriticalPoint):
        sl.levelset_report(catalog.flat(3), "0.5*(x^2 + y^2 + z^2)", (0, 0, 0))


def test_levelset_quantities_constant_on_level():
    M, F, p = catalog.sphere(3), "-cos(r)", (math.pi / 3, 1.0, 0.5)
    base = sl.levelset_report(M, F, p)
    pts = sl.sample_level_set(M, F, p, k=6, seed=42)
    assert len(pts) == 6
    for q in pts:
        rep = sl.levelset_report(M, F, q)
        assert abs(rep.grad_norm - base.grad_norm) <= 1e-6
        assert abs(rep.phi - base.phi) <= 1e-6


def test_csv_golden_header(ysol):
    text = ysol.to_csv()
    lines = text.splitlines()
    assert lines[0] == "r,F,Fp,Fpp,phi,R"
    assert len(lines) == len(ysol.r) + 1
    first = [float(x) for x in lines[1].split(",")]
    assert first == [ysol.r[0], ysol.F[0], ysol.Fp[0], ysol.Fpp[0], ysol.phi[0], ysol.R[0]]
    data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 3], ysol.Fpp)


def test_json_roundtrip(ysol):
    rep = sl.classify_branch(ysol)
    d = json.loads(json.dumps(ysol.to_json(rep)))
    assert set(d) == {"n", "Rbar", "spec", "termination", "zeros", "span", "branch", "columns"}
    assert set(d["columns"]) == {"r", "F", "Fp", "Fpp", "phi", "R", "Fppp"}
    back = sl.ProfileSolution.from_json(d)
    assert np.array_equal(back.Fp, ysol.Fp)
    assert back.spec == ysol.spec
    assert sl.classify_branch(back).branch == d["branch"]["branch"]

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from solitonlab import catalog, chart as ch, conformal as cf, warped as wp
from solitonlab.errors import DimensionError, DomainError, FiberDataInsufficient, OutOfInterval

S2 = wp.SpaceForm(2, 1.0)
RADII = np.linspace(0.3, 2.7, 10)


def model(expr, fiber=S2, interval=(0.1, 3.0)):
    return wp.WarpedModel(fiber.m + 1, wp.Profile.from_expr(expr), fiber, interval)


def s2xs2(radii):
    return wp.ExplicitChart(catalog.sphere_product(radii), (1.0, 0.3, 1.2, 0.4))


def test_flat_polar_riemann_vanishes():
    wm = model("r")
    for r in RADII:
        assert np.allclose(wp.assemble_riemann(wp.warped_riemann(wm, r)), 0, atol=1e-12)


def test_sine_profile_unit_sectional_curvature():
    wm = model("sin(r)")
    r = math.pi / 4
    R = wp.assemble_riemann(wp.warped_riemann(wm, r))
    g = ch.metric(wp.build_warped_chart(wm), wp.model_point(wm, r)).comp
    n = 3
    for i in range(n):
        for j in range(i + 1, n):
            K = R[i, j, i, j] / (g[i, i] * g[j, j] - g[i, j] ** 2)
            assert K == pytest.approx(1.0, abs=1e-12)


def test_affine_profile_has_no_radial_curvature():
    wm = model("2*r + 1")
    assert np.all(wp.warped_riemann(wm, 1.3)["1a1b"] == 0)


def test_ricci_examples():
    ric = wp.warped_ricci(model("r"), 2.0)
    assert ric["11"] == 0 and np.allclose(ric["ab"], 0, atol=1e-14)
    wm = model("sinh(r)")
    ric = wp.warped_ricci(wm, 1.0)
    assert ric["11"] == pytest.approx(-2.0)
    assert np.allclose(ric["ab"], -2 * math.sinh(1) ** 2 * S2.gbar())
    ric = wp.warped_ricci(model("1"), 1.0)
    assert ric["11"] == 0 and np.allclose(ric["ab"], S2.ricci())


@pytest.mark.parametrize("expr, target", [("r", 0.0), ("sin(r)", 6.0), ("sinh(r)", -6.0), ("1", 2.0)])
def test_scalar_examples(expr, target):
    wm = model(expr)
    for r in RADII:
        assert wp.warped_scalar(wm, r) == pytest.approx(target, abs=1e-10)


@pytest.mark.parametrize("expr", ["r", "sin(r)", "sinh(r)", "1", "2 + sin(r)"])
def test_closed_forms_match_chart_engine(expr):
    wm = model(expr)
    M = wp.build_warped_chart(wm)
    geo = ch.LocalGeometry(M, np.array([wp.model_point(wm, r) for r in RADII]), 2)
    for b, r in enumerate(RADII):
        assert np.max(np.abs(wp.assemble_riemann(wp.warped_riemann(wm, r)) - geo.riemann[b])) <= 1e-6
        assert np.max(np.abs(wp.assemble_ricci(wp.warped_ricci(wm, r)) - geo.ricci[b])) <= 1e-6
        assert abs(wp.warped_scalar(wm, r) - geo.scalar[b]) <= 1e-6


@pytest.mark.parametrize("c", [1.0, -1.0])
def test_closed_forms_match_fd_chart_engine(c):
    wm = wp.WarpedModel(4, wp.Profile.from_expr("2 + sin(r)"), wp.SpaceForm(3, c), (0.1, 3.0))
    M = wp.build_warped_chart(wm, mode="fd")
    geo = ch.LocalGeometry(M, np.array([wp.model_point(wm, r) for r in RADII[::3]]), 2)
    for b, r in enumerate(RADII[::3]):
        assert np.max(np.abs(wp.assemble_riemann(wp.warped_riemann(wm, r)) - geo.riemann[b])) <= 1e-3
        assert abs(wp.warped_scalar(wm, r) - geo.scalar[b]) <= 1e-3


@given(st.floats(-1.0, 1.0), st.floats(0.5, 2.5))
def test_scalar_reparameterization_invariance(delta, r):
    a = model("2 + sin(r)", interval=(-10, 10))
    b = model(f"2 + sin(r + {delta!r})", interval=(-10, 10))
    assert wp.warped_scalar(b, r - delta) == pytest.approx(wp.warped_scalar(a, r), abs=1e-10)


@given(st.floats(0.2, 2.8))
def test_scalar_relation_identity(r):
    wm = model("1.5 + sin(r) + 0.1*r^2", fiber=wp.Einstein(3, 4.0))
    f, fp, fpp = wm.warp(r)
    n, Rbar = 4, 4.0
    lhs = f * f * wp.warped_scalar(wm, r)
    rhs = Rbar - (n - 1) * (n - 2) * fp**2 - 2 * (n - 1) * f * fpp
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_weyl_vanishes_for_space_form_fibers():
    for fiber in (wp.SpaceForm(3, 1.0), wp.SpaceForm(3, -1.0), wp.SpaceForm(3, 0.0)):
        wm = model("2 + sin(r)", fiber)
        for blk in wp.warped_weyl(wm, 1.0).values():
            assert np.max(np.abs(blk)) <= 1e-12


def test_weyl_einstein_and_non_einstein_fibers():
    wm = model("2 + sin(r)", s2xs2([1.0, 1.0]))
    W = wp.warped_weyl(wm, 1.0)
    assert np.max(np.abs(W["1a1b"])) <= 1e-10
    assert np.linalg.norm(W["abcd"]) > 0.1
    W = wp.warped_weyl(model("2 + sin(r)", s2xs2([1.0, 0.5])), 1.0)
    assert np.linalg.norm(W["1a1b"]) > 0.1


def test_weyl_blocks_match_chart_weyl():
    wm = model("2 + sin(r)", s2xs2([1.0, 0.5]))
    M = wp.build_warped_chart(wm)
    r = 1.1
    W = cf.weyl(M, wp.model_point(wm, r)).comp
    blk = wp.warped_weyl(wm, r)
    assert np.max(np.abs(W[0, 1:, 0, 1:] - blk["1a1b"])) <= 1e-8
    assert np.max(np.abs(W[1:, 1:, 1:, 1:] - blk["abcd"])) <= 1e-8


def test_weyl_dimension_error():
    with pytest.raises(DimensionError):
        wp.warped_weyl(model("r"), 1.0)
    assert set(wp.warped_weyl(model("r"), 1.0, blocks=("1a1b",))) == {"1a1b"}


def test_radial_cotton_examples():
    wm = model("2 + sin(r)", wp.SpaceForm(2, 1.0))
    assert np.all(wp.radial_cotton(wm, 1.0).comp == 0)
    round_fiber = wp.ExplicitChart(catalog.sphere(2), (1.0, 0.5))
    assert np.max(np.abs(wp.radial_cotton(model("2 + sin(r)", round_fiber), 1.0).comp)) <= 1e-6
    bumpy = wp.ExplicitChart(catalog.perturbed_sphere2(), (1.0, 0.5))
    assert np.max(np.abs(wp.radial_cotton(model("2 + sin(r)", bumpy), 1.0).comp)) > 1e-4


@pytest.mark.parametrize("fiber", [wp.ExplicitChart(catalog.perturbed_sphere2(), (1.0, 0.5)), None])
def test_radial_cotton_matches_chart(fiber):
    if fiber is None:
        fiber = wp.ExplicitChart(catalog.product(catalog.perturbed_sphere2(),
                                                 catalog.sphere(2, 0.7, names=("a", "b"))), (1.0, 0.5, 1.0, 1.0))
    wm = model("2 + sin(r)", fiber)
    M = wp.build_warped_chart(wm)
    for r in (0.5, 1.5):
        C = cf.cotton(M, wp.model_point(wm, r), method="jet").comp
        assert np.max(np.abs(C[0, 1:, 0] - wp.radial_cotton(wm, r).comp)) <= 1e-8


def test_radial_cao_chen_examples():
    for fiber in (wp.SpaceForm(4, 1.0), s2xs2([1.0, 1.0]), wp.Einstein(4, 12.0)):
        wm = model("2 + sin(r)", fiber)
        for r in RADII:
            assert np.linalg.norm(wp.radial_cao_chen(wm, r).comp) <= 1e-6
            assert np.linalg.norm(wp.warped_weyl(wm, r, blocks=("1a1b",))["1a1b"]) <= 1e-6
    wm = model("2 + sin(r)", s2xs2([1.0, 0.5]))
    assert min(np.linalg.norm(wp.radial_cao_chen(wm, r).comp) for r in RADII) > 1e-3


def test_radial_cao_chen_matches_chart():
    wm = model("r", s2xs2([1.0, 0.5]))
    M = wp.build_warped_chart(wm)
    F = wp.Profile.from_expr("r").potential_expr(0.1)
    r = 1.2
    D = cf.cao_chen(M, F, wp.model_point(wm, r)).comp
    assert np.max(np.abs(D[0, 1:, 1:] - wp.radial_cao_chen(wm, r).comp)) <= 1e-8


def test_build_warped_chart_examples():
    for expr, target in (("sin(r)", 6.0), ("sinh(r)", -6.0)):
        wm = model(expr)
        assert ch.ricci_scalar(wp.build_warped_chart(wm), wp.model_point(wm, 1.0))[1] == pytest.approx(target)
    wm = model("1")
    ric, _ = ch.ricci_scalar(wp.build_warped_chart(wm), wp.model_point(wm, 1.0))
    assert np.allclose(ric.comp[0], 0) and np.allclose(ric.comp[1:, 1:], S2.ricci())


def test_einstein_fiber_limits():
    wm = model("2 + sin(r)", wp.Einstein(2, 2.0))
    assert wp.warped_scalar(wm, 1.0) == pytest.approx(wp.warped_scalar(model("2 + sin(r)"), 1.0))
    with pytest.raises(FiberDataInsufficient):
        wp.warped_riemann(wm, 1.0)
    with pytest.raises(FiberDataInsufficient):
        wp.build_warped_chart(wm)
    with pytest.raises(FiberDataInsufficient):
        wp.radial_cotton(wm, 1.0)


def test_interval_and_warp_errors():
    wm = model("r", interval=(0.0, 3.0))
    with pytest.raises(OutOfInterval):
        wp.warped_ricci(wm, 3.5)
    with pytest.raises(DomainError):
        wp.warped_scalar(wm, 0.0)
    with pytest.raises(OutOfInterval):
        wp.WarpedModel(3, wp.Profile.from_expr("r", (0, 1)), S2, (0.5, 2.0))
    with pytest.raises(DimensionError):
        wp.WarpedModel(4, wp.Profile.from_expr("r"), S2, (0.1, 1))
    with pytest.raises(ValueError):
        wp.Profile.from_expr("r + x")


def test_sampled_profile_accuracy():
    r = np.linspace(0.1, 3.0, 301)
    p = wp.Profile.from_samples(r, np.sin(r))
    assert p.max_knot_error() <= 1e-8
    assert p(1.234) == pytest.approx(math.sin(1.234), abs=1e-6)
    h = wp.Profile.from_samples(r, np.sin(r), np.cos(r), -np.sin(r))
    f, fp, fpp = h.derivs(1.234)
    assert (f, fp, fpp) == pytest.approx((math.sin(1.234), math.cos(1.234), -math.sin(1.234)), abs=1e-6)
    assert h.potential(2.0, 0.1) == pytest.approx(math.cos(0.1) - math.cos(2.0), abs=1e-9)
    wm = wp.WarpedModel(3, h, S2, h.interval)
    assert wp.warped_scalar(wm, 1.5) == pytest.approx(6.0, abs=1e-4)


def test_json_roundtrip():
    for fiber in (S2, wp.SpaceForm(2, -1.0), wp.Einstein(2, 2.0), wp.ExplicitChart(catalog.sphere(2), (1.0, 0.5))):
        wm = model("2 + sin(r)", fiber)
        d = json.loads(json.dumps(wm.to_json()))
        assert set(d) == {"n", "profile", "fiber", "interval"}
        back = wp.WarpedModel.from_json(d)
        assert wp.warped_scalar(back, 1.0) == pytest.approx(wp.warped_scalar(wm, 1.0), abs=1e-12)
    r = np.linspace(0.1, 3.0, 20)
    prof = wp.Profile.from_samples(r, 2 + np.sin(r))
    back = wp.Profile.from_json(json.loads(json.dumps(prof.to_json())))
    assert back(1.3) == pytest.approx(prof(1.3))

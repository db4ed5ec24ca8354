import math

import numpy as np
import pytest

from solitonlab import catalog, chart as ch, conformal as cf
from solitonlab.chart import MetricChart
from solitonlab.errors import DimensionError
from solitonlab.tensor import check_symmetry


def test_schouten_examples():
    assert np.allclose(cf.schouten(catalog.flat(3), [0, 0, 0]).comp, 0)
    p = [1.0, 1.2, 0.3]
    S3, H3 = catalog.sphere(3), catalog.hyperbolic(3)
    assert np.allclose(cf.schouten(S3, p).comp, 0.5 * ch.metric(S3, p).comp)
    assert np.allclose(cf.schouten(H3, p).comp, -0.5 * ch.metric(H3, p).comp)
    with pytest.raises(DimensionError):
        cf.schouten(catalog.sphere(2), [1.0, 0.0])


def test_cotton_examples():
    assert np.allclose(cf.cotton(catalog.flat(3), [0, 0, 0]).comp, 0)
    u = "0.1*(x^2 - y*z)"
    M = MetricChart(("x", "y", "z"), ((f"exp(2*({u}))", "0", "0"), ("0", f"exp(2*({u}))", "0"),
                                      ("0", "0", f"exp(2*({u}))")), ((-1, 1),) * 3)
    p = [0.3, -0.2, 0.4]
    assert cf.norm(cf.cotton(M, p), M, p) <= 1e-5
    N = MetricChart(("x", "y", "z"), (("1", "0", "0"), ("0", "1", "0"), ("0", "0", "1+x^2")), ((-2, 2),) * 3)
    assert cf.norm(cf.cotton(N, [0.5, 0, 0]), N, [0.5, 0, 0]) > 1e-3


def test_cotton_routes_agree_and_properties():
    for i in range(5):
        M = catalog.random_chart(42, i)
        for p in catalog.interior_points(42, i, M, 2):
            a = cf.cotton(M, p)
            b = cf.cotton(M, p, method="jet")
            assert np.max(np.abs(a.comp - b.comp)) <= 1e-8
            assert check_symmetry(a)["skew(0,1)"] <= 1e-8
            gi = ch.inverse_metric(M, p).comp
            assert np.max(np.abs(np.einsum("jk,ijk->i", gi, a.comp))) <= 1e-6
            assert np.max(np.abs(np.einsum("ik,ijk->j", gi, a.comp))) <= 1e-6


def test_weyl_examples():
    assert np.allclose(cf.weyl(catalog.sphere(4), [1, 1, 1, 0.2]).comp, 0, atol=1e-12)
    M = catalog.random_chart(42, 2)
    p = catalog.interior_points(42, 2, M, 1)[0]
    assert cf.norm(cf.weyl(M, p), M, p) <= 1e-8
    P = catalog.sphere_product([1.0, 1.0])
    q = [1.0, 0.3, 1.2, 0.4]
    W = cf.weyl(P, q)
    assert cf.norm(W, P, q) > 0.1
    assert check_symmetry(W)["riemann"] <= 1e-12


def test_weyl_tracefree_n4_corpus():
    for i in range(5):
        M = catalog.random_chart(42, i, n=4)
        pts = catalog.interior_points(42, i, M, 2)
        geo = ch.LocalGeometry(M, pts, 2)
        W = cf.weyl_from(geo.riemann, geo.ricci, geo.scalar, geo.g)
        tr = cf.trace_deviations(W, geo.ginv, [(0, 2), (0, 3), (1, 2), (1, 3), (0, 1), (2, 3)])
        assert max(tr.values()) <= 1e-10


def test_cao_chen_examples():
    D = cf.cao_chen(catalog.flat(3), "0.5*(x^2+y^2+z^2)", [0.1, 0.2, 0.3])
    assert np.allclose(D.comp, 0)
    H3 = catalog.hyperbolic(3)
    p = [1.2, 1.0, 0.4]
    assert cf.norm(cf.cao_chen(H3, "cosh(r)", p), H3, p) <= 1e-6
    D = cf.cao_chen(catalog.random_chart(42, 0), "x*y + z^2", [0.1, 0.2, 0.3]).comp
    assert np.allclose(D, -np.swapaxes(D, 0, 1))


def test_div_cotton_examples():
    assert np.allclose(cf.div_cotton(catalog.flat(3), [0, 0, 0]).comp, 0)
    M = catalog.conformally_flat_chart(42, 1)
    for p in catalog.interior_points(42, 1, M, 2):
        assert np.max(np.abs(cf.div_cotton(M, p).comp)) <= 1e-4


def test_cotton_identities_trivial_cases():
    assert cf.cotton_identity_residuals(catalog.flat(3, 1.0), [0, 0, 0]) == (0.0, 0.0)
    m1, m2 = cf.cotton_identity_residuals(catalog.sphere(3), [1.0, 1.2, 0.3])
    assert m1 <= 1e-6 and m2 <= 1e-6


def test_cotton_identities_random_charts():
    for i in range(5):
        M = catalog.random_chart(42, i)
        for p in catalog.interior_points(42, i, M, 5):
            rep = cf.cotton_identity_report(M, p)
            assert rep.m2 <= 1e-4 * rep.m2_scale
            assert rep.m1 <= 1e-3 * rep.m1_scale


def test_cotton_identities_second_order_in_step():
    M = catalog.random_chart(42, 1)
    p = catalog.interior_points(42, 1, M, 1)[0]
    a = cf.cotton_identity_report(M, p, h=0.02, richardson=False)
    b = cf.cotton_identity_report(M, p, h=0.01, richardson=False)
    assert a.m2 / b.m2 == pytest.approx(4.0, rel=0.1)
    assert a.m1 / b.m1 == pytest.approx(4.0, rel=0.1)


def test_triple_divergence_loose():
    M = catalog.random_chart(42, 3)
    p = catalog.interior_points(42, 3, M, 1)[0]
    res, scale = cf.triple_divergence_residual(M, p)
    assert res <= 1e-2 * scale


def test_conformal_invariance_smoke():
    # C vanishes for both the flat metric and a conformal rescaling of it
    for i in range(3):
        M = catalog.conformally_flat_chart(42, i)
        p = catalog.interior_points(42, i, M, 1)[0]
        assert cf.norm(cf.cotton(M, p), M, p) <= 1e-5
        assert cf.norm(cf.cotton(catalog.flat(3, 1.0), p), catalog.flat(3, 1.0), p) <= 1e-12


def test_report_norms_consistent():
    M = catalog.random_chart(42, 4)
    p = [0.1, 0.2, -0.1]
    rep = cf.conformal_report(M, p, ("schouten", "cotton", "weyl", "caochen"), "x^2 + y")
    gi = ch.inverse_metric(M, p)
    for k, t in rep.tensors.items():
        assert rep.norms_sq[k] == pytest.approx(cf.norm_sq(t, gi), rel=1e-10, abs=1e-14)
    assert set(rep.to_json()) == {"point", "tensors", "norms_sq", "trace_deviations"}

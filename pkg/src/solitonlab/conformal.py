"""Schouten, Cotton, Weyl and Cao-Chen tensors, plus the divergence identities
of the Cotton tensor.

Norms contract every slot with the metric: ``|C|^2 = C_ijk C_lmn g^il g^jm g^kn``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chart import (FIELD_STEP, LocalGeometry, MetricChart, TensorField, _single,
                    cotton_field, nabla_batch, nabla_field, ricci_field, scalar_jets,
                    schouten_field)
from .errors import DimensionError
from .expr import as_expr
from .tensor import CO, DenseTensor, norm_sq


def _need_dim(chart, n_min=3):
    if chart.dim < n_min:
        raise DimensionError(f"needs dimension >= {n_min}, chart has {chart.dim}")


def full_norm_sq(comp, ginv):
    """Batched |T|^2 for an all-covariant array with batch axis first."""
    other = comp
    for slot in range(comp.ndim - 1):
        other = np.moveaxis(np.einsum("bij,bj...->bi...", ginv, np.moveaxis(other, slot + 1, 1)), 1, slot + 1)
    return np.sum((comp * other).reshape(comp.shape[0], -1), axis=1)


def _raise_all(comp, ginv):
    out = comp
    for slot in range(comp.ndim - 1):
        out = np.moveaxis(np.einsum("bij,bj...->bi...", ginv, np.moveaxis(out, slot + 1, 1)), 1, slot + 1)
    return out


def weyl_from(riemann, ricci, scalar, g):
    """Batched Weyl tensor from curvature data (n >= 3)."""
    n = g.shape[-1]
    kn = lambda a, b: (np.einsum("bik,bjl->bijkl", a, b) - np.einsum("bil,bjk->bijkl", a, b))
    # R_ik g_jl + R_jl g_ik - R_il g_jk - R_jk g_il
    ric_g = kn(ricci, g) + kn(g, ricci)
    return riemann - ric_g / (n - 2) + scalar[:, None, None, None, None] * kn(g, g) / ((n - 1) * (n - 2))


def cao_chen_from(ricci, scalar, g, ginv, dF):
    """Batched D_ijk from Ricci, scalar curvature, metric and the covector dF."""
    n = g.shape[-1]
    grad = np.einsum("bts,bs->bt", ginv, dF)      # nabla^t F
    ric_grad = np.einsum("bit,bt->bi", ricci, grad)  # R_it nabla_t F
    t1 = np.einsum("bkj,bi->bijk", ricci, dF) - np.einsum("bki,bj->bijk", ricci, dF)
    t2 = np.einsum("bi,bjk->bijk", ric_grad, g) - np.einsum("bj,bik->bijk", ric_grad, g)
    t3 = np.einsum("bkj,bi->bijk", g, dF) - np.einsum("bki,bj->bijk", g, dF)
    return (t1 / (n - 2) + t2 / ((n - 1) * (n - 2))
            - scalar[:, None, None, None] * t3 / ((n - 1) * (n - 2)))


# ---------------------------------------------------------------------------
# Single-point operations
# ---------------------------------------------------------------------------

def schouten(chart: MetricChart, p) -> DenseTensor:
    """S = Ric - R g / (2(n-1))."""
    _need_dim(chart)
    geo = LocalGeometry(chart, _single(chart, p), 2)
    return DenseTensor(geo.schouten[0], (CO, CO), ("sym(0,1)",))


def cotton_batch(chart, points, method="field", h=FIELD_STEP, richardson=True):
    _need_dim(chart)
    if method == "jet":
        return LocalGeometry(chart, points, 3).cotton
    if method != "field":
        raise ValueError(f"unknown method {method!r}")
    ns = nabla_batch(chart, schouten_field(chart), points, h, richardson)
    return ns - np.swapaxes(ns, 1, 2)


def cotton(chart: MetricChart, p, method="field", h=FIELD_STEP, richardson=True) -> DenseTensor:
    """C_ijk = nabla_i S_jk - nabla_j S_ik.

    ``method="field"`` differentiates the Schouten field with the field-level
    covariant derivative; ``method="jet"`` assembles it from exact third-order
    metric jets (analytic charts) as an independent route.
    """
    comp = cotton_batch(chart, _single(chart, p), method, h, richardson)[0]
    return DenseTensor(comp, (CO, CO, CO), ("skew(0,1)",))


def weyl(chart: MetricChart, p) -> DenseTensor:
    _need_dim(chart)
    geo = LocalGeometry(chart, _single(chart, p), 2)
    w = weyl_from(geo.riemann, geo.ricci, geo.scalar, geo.g)
    return DenseTensor(w[0], (CO,) * 4, ("riemann",))


def cao_chen_batch(chart, F, points):
    _need_dim(chart)
    geo = LocalGeometry(chart, points, 2)
    _, dF = scalar_jets(chart, as_expr(F), geo.points, 1)
    return cao_chen_from(geo.ricci, geo.scalar, geo.g, geo.ginv, dF), geo


def cao_chen(chart: MetricChart, F, p) -> DenseTensor:
    d, _ = cao_chen_batch(chart, F, _single(chart, p))
    return DenseTensor(d[0], (CO, CO, CO), ("skew(0,1)",))


def div_cotton(chart: MetricChart, p, h=FIELD_STEP, richardson=True) -> DenseTensor:
    """(div C)_ij = nabla^k C_kij."""
    _need_dim(chart)
    pts = _single(chart, p)
    nc = nabla_batch(chart, cotton_field(chart), pts, h, richardson)
    ginv = LocalGeometry(chart, pts, 0).ginv
    return DenseTensor(np.einsum("bak,bakij->bij", ginv, nc)[0], (CO, CO))


def trace_deviations(comp, ginv, pairs):
    """Max |g^{ab} T_{..a..b..}| for each slot pair (batched all-covariant array)."""
    out = {}
    for a, b in pairs:
        moved = np.moveaxis(comp, (a + 1, b + 1), (1, 2))
        out[f"trace({a},{b})"] = float(np.max(np.abs(np.einsum("bij,bij...->b...", ginv, moved))))
    return out


# ---------------------------------------------------------------------------
# Divergence identities of the Cotton tensor
# ---------------------------------------------------------------------------

@dataclass
class CottonIdentityReport:
    """Pointwise residuals of the Cotton divergence identities.

    ``m2``: |C^ijk nabla_i R_jk - |C|^2 / 2| with nabla Ric and C both taken
    from the field-level covariant derivative of the Ricci field.
    ``m1``: max_j |nabla^i nabla^k C_kij + C_j^ip R_ip| with the second
    covariant derivative of the Cotton field by nested field differences.
    """

    m1: float
    m2: float
    c_norm_sq: float
    c_norm: float
    ric_norm: float

    @property
    def m2_scale(self):
        return max(1.0, self.c_norm_sq)

    @property
    def m1_scale(self):
        return max(1.0, self.c_norm * self.ric_norm)


def cotton_identity_report(chart: MetricChart, p, h=FIELD_STEP, richardson=True) -> CottonIdentityReport:
    _need_dim(chart)
    pts = _single(chart, p)
    geo = LocalGeometry(chart, pts, 3 if chart.mode == "analytic" else 2)
    ginv, g, n = geo.ginv, geo.g, chart.dim

    # (m2) from one consistent field-level nabla Ric
    nric = nabla_batch(chart, ricci_field(chart), pts, h, richardson)
    nR = np.einsum("bjk,bijk->bi", ginv, nric)
    ns = nric - np.einsum("bi,bjk->bijk", nR, g) / (2 * (n - 1))
    c_fd = ns - np.swapaxes(ns, 1, 2)
    c_up = _raise_all(c_fd, ginv)
    m2 = abs(float(np.sum(c_up * nric)) - 0.5 * float(full_norm_sq(c_fd, ginv)[0]))

    # (m1) intermediate second-divergence identity
    C = cotton_field(chart) if chart.mode == "analytic" else TensorField(
        lambda q: cotton_batch(chart, q, "field", h, richardson), (CO, CO, CO), "C")
    c0 = np.asarray(C.evaluate(pts))
    nnc = nabla_batch(chart, nabla_field(chart, C, h, richardson), pts, h, richardson)
    lhs = np.einsum("bai,bck,backij->bj", ginv, ginv, nnc)
    rhs = np.einsum("bia,bpc,bjip,bac->bj", ginv, ginv, c0, geo.ricci)
    m1 = float(np.max(np.abs(lhs + rhs)))

    cn2 = float(full_norm_sq(c0, ginv)[0])
    rn2 = float(full_norm_sq(geo.ricci, ginv)[0])
    return CottonIdentityReport(m1, m2, cn2, float(np.sqrt(max(cn2, 0))), float(np.sqrt(max(rn2, 0))))


def cotton_identity_residuals(chart: MetricChart, p, h=FIELD_STEP, richardson=True):
    """(res_m1, res_m2) at ``p``."""
    rep = cotton_identity_report(chart, p, h, richardson)
    return rep.m1, rep.m2


def triple_divergence_residual(chart: MetricChart, p, h=FIELD_STEP, richardson=True):
    """|nabla_i nabla_j nabla_k C_kji + nabla_i C_ijk R_jk + C_ijk nabla_i R_jk|
    and its scale ``max(1, |nabla C||Ric| + |C||nabla Ric|)``."""
    _need_dim(chart)
    pts = _single(chart, p)
    geo = LocalGeometry(chart, pts, 3)
    ginv = geo.ginv
    C = cotton_field(chart)
    nC = nabla_field(chart, C, h, richardson)
    nnnc = nabla_batch(chart, nabla_field(chart, nC, h, richardson), pts, h, richardson)
    # T[a, b, c, k, j, i] = nabla_a nabla_b nabla_c C_kji ; contract a~i, b~j, c~k
    lhs = np.einsum("bai,bdj,bck,badckji->b", ginv, ginv, ginv, nnnc)
    nc = np.asarray(nC.evaluate(pts))
    div_c = np.einsum("bai,baijk->bjk", ginv, nc)
    ric_up = _raise_all(geo.ricci, ginv)
    t1 = np.einsum("bjk,bjk->b", div_c, ric_up)
    c0 = np.asarray(C.evaluate(pts))
    t2 = np.sum(_raise_all(c0, ginv) * geo.nabla_ricci, axis=(1, 2, 3))
    res = float(abs(lhs + t1 + t2)[0])
    scale = max(1.0, float(np.sqrt(full_norm_sq(nc, ginv)[0] * full_norm_sq(geo.ricci, ginv)[0]))
                + float(np.sqrt(full_norm_sq(c0, ginv)[0] * full_norm_sq(geo.nabla_ricci, ginv)[0])))
    return res, scale


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

@dataclass
class ConformalReport:
    point: list
    tensors: dict = field(default_factory=dict)
    norms_sq: dict = field(default_factory=dict)
    trace_deviations: dict = field(default_factory=dict)

    def to_json(self):
        return {"point": list(self.point),
                "tensors": {k: v.to_json() for k, v in self.tensors.items()},
                "norms_sq": dict(self.norms_sq),
                "trace_deviations": dict(self.trace_deviations)}


REPORT_KINDS = ("schouten", "cotton", "weyl", "caochen", "ricci", "riemann")


def conformal_report(chart: MetricChart, p, kinds=("schouten", "cotton", "weyl"), F=None) -> ConformalReport:
    """Compute the requested tensors at ``p`` with norms and trace deviations."""
    pts = _single(chart, p)
    geo = LocalGeometry(chart, pts, 2)
    ginv = geo.ginv
    rep = ConformalReport(point=[float(x) for x in pts[0]])
    for kind in kinds:
        if kind == "schouten":
            comp, t = geo.schouten, DenseTensor(geo.schouten[0], (CO, CO), ("sym(0,1)",))
            traces = trace_deviations(comp, ginv, [])
        elif kind == "ricci":
            comp, t = geo.ricci, DenseTensor(geo.ricci[0], (CO, CO), ("sym(0,1)",))
            traces = {}
        elif kind == "riemann":
            comp, t = geo.riemann, DenseTensor(geo.riemann[0], (CO,) * 4, ("riemann",))
            traces = {}
        elif kind == "cotton":
            comp = cotton_batch(chart, pts)
            t = DenseTensor(comp[0], (CO,) * 3, ("skew(0,1)",))
            traces = trace_deviations(comp, ginv, [(1, 2), (0, 2)])
        elif kind == "weyl":
            _need_dim(chart)
            comp = weyl_from(geo.riemann, geo.ricci, geo.scalar, geo.g)
            t = DenseTensor(comp[0], (CO,) * 4, ("riemann",))
            traces = trace_deviations(comp, ginv, [(0, 2), (0, 3), (1, 2), (1, 3), (0, 1), (2, 3)])
        elif kind == "caochen":
            if F is None:
                raise ValueError("caochen needs a potential F")
            comp, _ = cao_chen_batch(chart, F, pts)
            t = DenseTensor(comp[0], (CO,) * 3, ("skew(0,1)",))
            traces = {}
        else:
            raise ValueError(f"unknown report kind {kind!r}")
        rep.tensors[kind] = t
        rep.norms_sq[kind] = float(full_norm_sq(comp, ginv)[0]) if comp.ndim > 1 else 0.0
        if traces:
            rep.trace_deviations[kind] = traces
    return rep


def norm(t: DenseTensor, chart: MetricChart, p) -> float:
    """Metric norm of an all-covariant tensor at ``p``."""
    ginv = LocalGeometry(chart, _single(chart, p), 0).ginv[0]
    return float(np.sqrt(max(norm_sq(t, DenseTensor(ginv, ("contra", "contra"))), 0.0)))

"""Curvature engine on explicit coordinate charts.

All geometry is evaluated in batches: ``points`` has shape ``(B, n)`` and every
array carries the batch axis first. Public single-point operations wrap the
batched core and return :class:`DenseTensor` values.

Index layout of the batched arrays::

    dg[b, k, i, j]        = d_k g_ij
    gamma[b, k, i, j]     = Gamma^k_ij
    dgamma[b, m, k, i, j] = d_m Gamma^k_ij
    riemann[b, i, j, k, l] = R_ijkl   (see conventions)
    nabla_ricci[b, m, i, j] = nabla_m R_ij
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable

import numpy as np

from . import conventions
from .errors import ChartError, DomainEdge, SingularMetric
from .expr import Expr, as_expr, is_zero, jet_arrays, taylor, to_text
from .tensor import CO, CONTRA, DenseTensor

DEFAULT_FD_STEP = 1e-3
FIELD_STEP = 1e-3


@dataclass(frozen=True)
class MetricChart:
    """Coordinate chart with metric components given as expressions.

    ``mode`` selects how metric derivatives are obtained: ``"analytic"`` uses
    exact jets, ``"fd"`` uses central differences of metric values with step
    ``h``. Positive-definiteness is checked on an 8^n lattice of the domain
    at construction.
    """

    coords: tuple
    g: tuple
    domain: tuple
    mode: str = "analytic"
    h: float = DEFAULT_FD_STEP
    name: str = ""
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        n = len(self.coords)
        object.__setattr__(self, "coords", tuple(self.coords))
        if len(set(self.coords)) != n or n < 1:
            raise ChartError(f"coordinate names must be distinct: {self.coords}")
        if len(self.g) != n or any(len(row) != n for row in self.g):
            raise ChartError(f"metric must be {n}x{n}")
        g = tuple(tuple(as_expr(x) for x in row) for row in self.g)
        object.__setattr__(self, "g", g)
        for i in range(n):
            for j in range(i):
                if g[i][j] != g[j][i] and to_text(g[i][j]) != to_text(g[j][i]):
                    raise ChartError(f"metric not symmetric at ({i},{j})")
        free = set().union(*(e.free_vars for row in g for e in row))
        if not free <= set(self.coords):
            raise ChartError(f"metric uses unknown variables {sorted(free - set(self.coords))}")
        dom = tuple((float(lo), float(hi)) for lo, hi in self.domain)
        if len(dom) != n or any(lo >= hi for lo, hi in dom):
            raise ChartError("domain must give lo < hi for every coordinate")
        object.__setattr__(self, "domain", dom)
        if self.mode not in ("analytic", "fd"):
            raise ChartError(f"unknown mode {self.mode!r}")
        if not self.h > 0:
            raise ChartError("finite-difference step must be positive")
        if self.check:
            self._check_positive_definite()

    @property
    def dim(self):
        return len(self.coords)

    def with_mode(self, mode, h=None):
        return replace(self, mode=mode, h=self.h if h is None else h, check=False)

    def lattice(self, k=8):
        axes = [lo + (np.arange(k) + 0.5) * (hi - lo) / k for lo, hi in self.domain]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)

    def _check_positive_definite(self):
        pts = self.lattice(8)
        for chunk in np.array_split(pts, max(1, len(pts) // 50000)):
            g = self.metric_values(chunk)
            try:
                np.linalg.cholesky(g)
            except np.linalg.LinAlgError:
                eig = np.linalg.eigvalsh(g).min(axis=1)
                bad = chunk[np.argmin(eig)]
                raise ChartError(f"metric not positive-definite near {bad.tolist()}") from None

    # -- evaluation ---------------------------------------------------------

    def _unique_components(self):
        seen = {}
        for i in range(self.dim):
            for j in range(i, self.dim):
                seen.setdefault(self.g[i][j], []).append((i, j))
        return seen

    def _values(self, points):
        return {c: points[:, k] for k, c in enumerate(self.coords)}

    def metric_values(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        B, n = points.shape
        out = np.zeros((B, n, n))
        env = self._values(points)
        for e, slots in self._unique_components().items():
            if is_zero(e):
                continue
            v = taylor(e, env, (), 0)[0]
            for i, j in slots:
                out[:, i, j] = v
                out[:, j, i] = v
        return out

    def metric_derivs(self, points, order):
        """[g, dg, d2g, d3g][:order+1] at ``points`` using the chart's mode."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.mode == "fd":
            return _fd_metric_derivs(self, points, order)
        B, n = points.shape
        out = [np.zeros((B,) + (n,) * (k + 2)) for k in range(order + 1)]
        env = self._values(points)
        for e, slots in self._unique_components().items():
            if is_zero(e):
                continue
            parts = jet_arrays(taylor(e, env, self.coords, order), n, order)
            for k, p in enumerate(parts):
                for i, j in slots:
                    # jet axes are (B, derivs...); metric slots go last
                    out[k][(Ellipsis, i, j)] = p
                    out[k][(Ellipsis, j, i)] = p
        return out

    def contains(self, points, margin=0.0):
        points = np.atleast_2d(points)
        lo = np.array([d[0] for d in self.domain]) + margin
        hi = np.array([d[1] for d in self.domain]) - margin
        return np.all((points >= lo) & (points <= hi), axis=-1)

    def require_inside(self, points, reach=0.0):
        points = np.atleast_2d(points)
        if not np.all(self.contains(points)):
            raise DomainEdge(f"point outside sample domain of chart {self.name or self.coords}")
        if reach and not np.all(self.contains(points, reach)):
            raise DomainEdge(f"stencil of half-width {reach:g} leaves the sample domain")

    def point(self, p):
        """Accept a mapping ``{coord: value}`` or a sequence; return an (n,) array."""
        if isinstance(p, dict):
            return np.array([float(p[c]) for c in self.coords])
        arr = np.asarray(p, dtype=float)
        if arr.shape != (self.dim,):
            raise ValueError(f"point must have {self.dim} coordinates")
        return arr

    # -- serialization ------------------------------------------------------

    def to_json(self):
        d = {"dim": self.dim, "coords": list(self.coords),
             "g": [[to_text(e) for e in row] for row in self.g],
             "domain": [list(b) for b in self.domain], "mode": self.mode}
        if self.mode == "fd":
            d["h"] = self.h
        if self.name:
            d["name"] = self.name
        return d

    @classmethod
    def from_json(cls, d):
        if "dim" in d and int(d["dim"]) != len(d["coords"]):
            raise ChartError("dim does not match number of coords")
        return cls(tuple(d["coords"]), tuple(tuple(row) for row in d["g"]),
                   tuple(tuple(b) for b in d["domain"]), d.get("mode", "analytic"),
                   float(d.get("h", DEFAULT_FD_STEP)), d.get("name", ""))


def _fd_metric_derivs(chart, points, order):
    B, n = points.shape
    h = chart.h
    chart.require_inside(points, reach=order * h)
    combos = [()]
    for k in range(1, order + 1):
        combos += list(itertools.combinations_with_replacement(range(n), k))
    offsets = {}
    plan = []
    for combo in combos:
        terms = []
        for signs in itertools.product((1, -1), repeat=len(combo)):
            off = [0] * n
            for axis, s in zip(combo, signs):
                off[axis] += s
            key = tuple(off)
            offsets.setdefault(key, len(offsets))
            terms.append((offsets[key], float(np.prod(signs))))
        plan.append((combo, terms))
    offs = np.array(list(offsets), dtype=float) * h
    pts = (points[:, None, :] + offs[None, :, :]).reshape(-1, n)
    vals = chart.metric_values(pts).reshape(B, len(offs), n, n)
    out = [np.zeros((B,) + (n,) * (k + 2)) for k in range(order + 1)]
    for combo, terms in plan:
        k = len(combo)
        acc = sum(w * vals[:, idx] for idx, w in terms) / (2.0 * h) ** k
        for perm in set(itertools.permutations(combo)):
            out[k][(slice(None),) + perm] = acc
    return out


# ---------------------------------------------------------------------------
# Batched local geometry
# ---------------------------------------------------------------------------

class LocalGeometry:
    """Curvature quantities at a batch of points, computed lazily from metric jets."""

    def __init__(self, chart: MetricChart, points, order=2):
        self.chart = chart
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        chart.require_inside(self.points)
        self.order = order
        self.d = chart.metric_derivs(self.points, order)
        self.n = chart.dim

    @property
    def g(self):
        return self.d[0]

    def _need(self, k):
        if self.order < k:
            raise ValueError(f"quantity needs metric derivatives of order {k}")
        return self.d[k]

    @cached_property
    def ginv(self):
        g = self.g
        det = np.linalg.det(g)
        scale = np.max(np.abs(g), axis=(1, 2)) ** self.n
        if np.any(np.abs(det) <= 1e-14 * scale) or not np.all(np.isfinite(g)):
            raise SingularMetric("metric is not invertible at the evaluation point")
        return np.linalg.inv(g)

    @cached_property
    def _P(self):
        # P[b, m] = g^-1 d_m g
        return np.einsum("bkl,bmlj->bmkj", self.ginv, self._need(1))

    @cached_property
    def dginv(self):
        return -np.einsum("bmkl,blj->bmkj", self._P, self.ginv)

    @cached_property
    def d2ginv(self):
        P, ginv = self._P, self.ginv
        d2g = self._need(2)
        PP = np.einsum("bnka,bmal->bmnkl", P, P)
        a = np.einsum("bmnka,bal->bmnkl", PP, ginv)
        return a + np.swapaxes(a, 1, 2) - np.einsum("bka,bmnac,bcl->bmnkl", ginv, d2g, ginv)

    @cached_property
    def gamma1(self):
        dg = self._need(1)
        return 0.5 * (np.einsum("bilj->blij", dg) + np.einsum("bjil->blij", dg) - dg)

    @cached_property
    def dgamma1(self):
        d2 = self._need(2)
        return 0.5 * (np.einsum("bmilj->bmlij", d2) + np.einsum("bmjil->bmlij", d2) - d2)

    @cached_property
    def d2gamma1(self):
        d3 = self._need(3)
        return 0.5 * (np.einsum("bmnilj->bmnlij", d3) + np.einsum("bmnjil->bmnlij", d3) - d3)

    @cached_property
    def gamma(self):
        return np.einsum("bkl,blij->bkij", self.ginv, self.gamma1)

    @cached_property
    def dgamma(self):
        return (np.einsum("bmkl,blij->bmkij", self.dginv, self.gamma1)
                + np.einsum("bkl,bmlij->bmkij", self.ginv, self.dgamma1))

    @cached_property
    def d2gamma(self):
        return (np.einsum("bmnkl,blij->bmnkij", self.d2ginv, self.gamma1)
                + np.einsum("bmkl,bnlij->bmnkij", self.dginv, self.dgamma1)
                + np.einsum("bnkl,bmlij->bmnkij", self.dginv, self.dgamma1)
                + np.einsum("bkl,bmnlij->bmnkij", self.ginv, self.d2gamma1))

    @cached_property
    def _rs(self):
        # Rs[b, l, i, j, k] = d_i G^l_jk - d_j G^l_ik + G^l_ia G^a_jk - G^l_ja G^a_ik
        dG, G = self.dgamma, self.gamma
        t = np.einsum("biljk->blijk", dG) + np.einsum("blia,bajk->blijk", G, G)
        return t - np.swapaxes(t, 2, 3)

    @cached_property
    def riemann(self):
        return conventions.CURVATURE_OPERATOR_SIGN * np.einsum("blm,bmijk->bijkl", self.g, self._rs)

    @cached_property
    def ricci(self):
        return np.einsum("bpq,bipjq->bij", self.ginv, self.riemann)

    @cached_property
    def scalar(self):
        return np.einsum("bij,bij->b", self.ginv, self.ricci)

    @cached_property
    def _drs(self):
        dG, G, d2G = self.dgamma, self.gamma, self.d2gamma
        t = (np.einsum("bmiljk->bmlijk", d2G)
             + np.einsum("bmlia,bajk->bmlijk", dG, G)
             + np.einsum("blia,bmajk->bmlijk", G, dG))
        return t - np.swapaxes(t, 3, 4)

    @cached_property
    def d_riemann(self):
        """d_m R_ijkl with the derivative index first."""
        s = conventions.CURVATURE_OPERATOR_SIGN
        return s * (np.einsum("bmla,baijk->bmijkl", self._need(1), self._rs)
                    + np.einsum("bla,bmaijk->bmijkl", self.g, self._drs))

    @cached_property
    def nabla_ricci(self):
        d_ric = (np.einsum("bmpq,bipjq->bmij", self.dginv, self.riemann)
                 + np.einsum("bpq,bmipjq->bmij", self.ginv, self.d_riemann))
        G, ric = self.gamma, self.ricci
        return d_ric - np.einsum("bami,baj->bmij", G, ric) - np.einsum("bamj,bia->bmij", G, ric)

    @cached_property
    def nabla_scalar(self):
        return np.einsum("bij,bmij->bm", self.ginv, self.nabla_ricci)

    @cached_property
    def schouten(self):
        n = self.n
        return self.ricci - (self.scalar / (2.0 * (n - 1)))[:, None, None] * self.g

    @cached_property
    def nabla_schouten(self):
        n = self.n
        return self.nabla_ricci - np.einsum("bm,bij->bmij", self.nabla_scalar, self.g) / (2.0 * (n - 1))

    @cached_property
    def cotton(self):
        """C_ijk = nabla_i S_jk - nabla_j S_ik from exact third-order jets."""
        ns = self.nabla_schouten
        return ns - np.swapaxes(ns, 1, 2)


def geometry(chart: MetricChart, points, order=2) -> LocalGeometry:
    return LocalGeometry(chart, points, order)


def _single(chart, p):
    return chart.point(p)[None, :]


# ---------------------------------------------------------------------------
# Single-point operations
# ---------------------------------------------------------------------------

def christoffel(chart: MetricChart, p) -> DenseTensor:
    """Gamma^k_ij at ``p`` as a (contra, co, co) tensor symmetric in the lower pair."""
    geo = LocalGeometry(chart, _single(chart, p), order=1)
    return DenseTensor(geo.gamma[0], (CONTRA, CO, CO), ("sym(1,2)",))


def riemann(chart: MetricChart, p) -> DenseTensor:
    geo = LocalGeometry(chart, _single(chart, p), order=2)
    return DenseTensor(geo.riemann[0], (CO,) * 4, ("riemann",))


def ricci_scalar(chart: MetricChart, p):
    """(Ricci tensor, scalar curvature) at ``p``."""
    geo = LocalGeometry(chart, _single(chart, p), order=2)
    return DenseTensor(geo.ricci[0], (CO, CO), ("sym(0,1)",)), float(geo.scalar[0])


def metric(chart: MetricChart, p) -> DenseTensor:
    return DenseTensor(chart.metric_values(_single(chart, p))[0], (CO, CO), ("sym(0,1)",))


def inverse_metric(chart: MetricChart, p) -> DenseTensor:
    geo = LocalGeometry(chart, _single(chart, p), order=0)
    return DenseTensor(geo.ginv[0], (CONTRA, CONTRA), ("sym(0,1)",))


def scalar_jets(chart: MetricChart, f, points, order=2):
    """Value and coordinate partials of a scalar expression at ``points``."""
    f = as_expr(f)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if not f.free_vars <= set(chart.coords):
        raise ValueError(f"expression uses variables outside the chart: {sorted(f.free_vars - set(chart.coords))}")
    if chart.mode == "fd":
        return _fd_scalar_jets(chart, f, points, order)
    return jet_arrays(taylor(f, chart._values(points), chart.coords, order), chart.dim, order)


def _fd_scalar_jets(chart, f, points, order):
    B, n = points.shape
    h = chart.h
    eye = np.eye(n) * h
    val = lambda q: taylor(f, chart._values(q), (), 0)[0]
    out = [val(points)]
    if order >= 1:
        out.append(np.stack([(val(points + eye[k]) - val(points - eye[k])) / (2 * h) for k in range(n)], -1))
    if order >= 2:
        d2 = np.zeros((B, n, n))
        for k in range(n):
            for m in range(k, n):
                v = (val(points + eye[k] + eye[m]) - val(points + eye[k] - eye[m])
                     - val(points - eye[k] + eye[m]) + val(points - eye[k] - eye[m])) / (4 * h * h)
                d2[:, k, m] = d2[:, m, k] = v
        out.append(d2)
    return out


def hessian_batch(chart: MetricChart, f, points):
    geo = LocalGeometry(chart, points, order=1)
    _, d1, d2 = scalar_jets(chart, f, geo.points, 2)
    return d2 - np.einsum("bkij,bk->bij", geo.gamma, d1), geo


def hessian(chart: MetricChart, f, p) -> DenseTensor:
    """nabla nabla f = d_i d_j f - Gamma^k_ij d_k f."""
    hess, _ = hessian_batch(chart, f, _single(chart, p))
    return DenseTensor(hess[0], (CO, CO), ("sym(0,1)",))


# ---------------------------------------------------------------------------
# Tensor fields and field-level covariant derivatives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TensorField:
    """Pointwise evaluator ``points (B, n) -> components (B, n, ..., n)``."""

    evaluate: Callable
    valence: tuple
    name: str = ""
    sym: tuple = ()

    @property
    def rank(self):
        return len(self.valence)

    def at(self, chart, p) -> DenseTensor:
        return DenseTensor(self.evaluate(_single(chart, p))[0], self.valence, self.sym)


def metric_field(chart):
    return TensorField(chart.metric_values, (CO, CO), "g", ("sym(0,1)",))


def scalar_field(chart, f):
    f = as_expr(f)
    return TensorField(lambda pts: scalar_jets(chart, f, pts, 0)[0], (), str(f))


def scalar_curvature_field(chart):
    return TensorField(lambda pts: LocalGeometry(chart, pts, 2).scalar, (), "R")


def ricci_field(chart):
    return TensorField(lambda pts: LocalGeometry(chart, pts, 2).ricci, (CO, CO), "Ric", ("sym(0,1)",))


def schouten_field(chart):
    return TensorField(lambda pts: LocalGeometry(chart, pts, 2).schouten, (CO, CO), "S", ("sym(0,1)",))


def cotton_field(chart):
    return TensorField(lambda pts: LocalGeometry(chart, pts, 3).cotton, (CO, CO, CO), "C", ("skew(0,1)",))


def _stencil_steps(h, richardson):
    return (h, h / 2) if richardson else (h,)


def nabla_batch(chart: MetricChart, T: TensorField, points, h=FIELD_STEP, richardson=True):
    """nabla_i T at ``points`` (derivative index first), partials by central
    differences of the field with optional one-level Richardson extrapolation."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    B, n = points.shape
    chart.require_inside(points, reach=h)
    steps = _stencil_steps(h, richardson)
    offs = []
    for s in steps:
        for k in range(n):
            e = np.zeros(n)
            e[k] = s
            offs.extend([e, -e])
    offs = np.array(offs)
    pts = (points[:, None, :] + offs[None]).reshape(-1, n)
    vals = np.asarray(T.evaluate(pts))
    vals = vals.reshape((B, len(steps), n, 2) + vals.shape[1:])
    diffs = (vals[:, :, :, 0] - vals[:, :, :, 1]) / (2 * np.array(steps)).reshape((1, -1, 1) + (1,) * T.rank)
    partial = (4 * diffs[:, 1] - diffs[:, 0]) / 3 if richardson else diffs[:, 0]
    gamma = LocalGeometry(chart, points, order=1).gamma
    out = partial.copy()
    center = np.asarray(T.evaluate(points)) if T.rank else None
    letters = "pqrstuvw"
    for slot, v in enumerate(T.valence):
        idx = letters[: T.rank]
        src = idx[:slot] + "a" + idx[slot + 1:]
        if v == CO:
            # - Gamma^a_{i j_slot} T_{.. a ..}
            out -= np.einsum(f"bai{idx[slot]},b{src}->bi{idx}", gamma, center)
        else:
            out += np.einsum(f"b{idx[slot]}ia,b{src}->bi{idx}", gamma, center)
    return out


def nabla_field(chart, T: TensorField, h=FIELD_STEP, richardson=True) -> TensorField:
    return TensorField(lambda pts: nabla_batch(chart, T, pts, h, richardson), (CO,) + T.valence, f"nabla {T.name}")


def covariant_derivative(chart: MetricChart, T: TensorField, p, h=FIELD_STEP, richardson=True) -> DenseTensor:
    """Field-level covariant derivative of ``T`` at ``p`` (rank + 1, derivative slot first)."""
    comp = nabla_batch(chart, T, _single(chart, p), h, richardson)[0]
    return DenseTensor(comp, (CO,) + T.valence)

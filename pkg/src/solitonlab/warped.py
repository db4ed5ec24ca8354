"""Closed-form curvature of warped products dr^2 + f(r)^2 gbar with f = F'.

Components are returned in the coordinate basis (r, x^a) where x^a are the
fiber coordinates, so ``g_ab = f^2 gbar_ab``. Index 1 below means ``r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import BPoly, CubicSpline
from scipy.integrate import quad

from . import catalog
from .chart import LocalGeometry, MetricChart
from .conventions import WARP_EPS, WARPED_FIBER_TERM_SIGN
from .errors import DimensionError, DomainError, FiberDataInsufficient, OutOfInterval
from .expr import Func1D, Var, as_expr, is_zero, jet_arrays, mul, num, power, taylor, to_text
from .tensor import CO, DenseTensor


def _kn(a, b):
    """(a ∧ b)_abcd = a_ac b_bd - a_ad b_bc for the last two axes of each operand."""
    return np.einsum("...ac,...bd->...abcd", a, b) - np.einsum("...ad,...bc->...abcd", a, b)


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Profile:
    """The warping function f = F' of r, with f' = F'' and f'' = F'''.

    Build with :meth:`from_expr` or :meth:`from_samples`. Sampled profiles use
    a cubic spline through the values, or a Hermite interpolant when the
    derivative columns are supplied too.
    """

    expr: object = None
    knots: tuple = None
    interval: tuple = (-math.inf, math.inf)
    _interp: object = field(default=None, compare=False, repr=False)

    @classmethod
    def from_expr(cls, e, interval=(-math.inf, math.inf)):
        e = as_expr(e)
        if not e.free_vars <= {"r"}:
            raise ValueError(f"profile may only depend on r, got {sorted(e.free_vars)}")
        return cls(expr=e, interval=tuple(map(float, interval)))

    @classmethod
    def from_samples(cls, r, f, fp=None, fpp=None):
        r = np.asarray(r, dtype=float)
        cols = [np.asarray(c, dtype=float) for c in (f, fp, fpp) if c is not None]
        if r.ndim != 1 or len(r) < 4 or np.any(np.diff(r) <= 0):
            raise ValueError("samples need at least 4 strictly increasing r values")
        if any(c.shape != r.shape for c in cols):
            raise ValueError("sample columns must match r")
        if len(cols) == 1:
            interp = CubicSpline(r, cols[0])
        else:
            interp = BPoly.from_derivatives(r, np.stack(cols, axis=1))
        knots = (tuple(r), tuple(tuple(c) for c in cols))
        return cls(knots=knots, interval=(float(r[0]), float(r[-1])), _interp=interp)

    @property
    def sampled(self):
        return self.expr is None

    def derivs(self, r, order=2):
        """[f, f', ..., f^(order)] at ``r`` (order <= 3)."""
        r = np.asarray(r, dtype=float)
        if self.sampled:
            return [self._interp(r, k) if k else self._interp(r) for k in range(order + 1)]
        flat = np.atleast_1d(r).ravel()
        jets = jet_arrays(taylor(self.expr, {"r": flat}, ("r",), order), 1, order)
        out = [jets[0]] + [jets[k].reshape(len(flat), -1)[:, 0] for k in range(1, order + 1)]
        return [o.reshape(r.shape) for o in out]

    def __call__(self, r):
        return self.derivs(r, 0)[0]

    def as_expr(self):
        """Expression of ``r`` usable inside chart metrics."""
        if not self.sampled:
            return self.expr
        interp = self._interp
        return Func1D("profile", lambda x, k: interp(x, k) if k else interp(x), Var("r"))

    def potential(self, r, r0=None, F0=0.0):
        """F(r) = F0 + integral of f from r0 to r."""
        r0 = self.interval[0] if r0 is None else r0
        if self.sampled:
            anti = self._interp.antiderivative()
            return F0 + anti(r) - anti(r0)
        fn = lambda x: float(self(x))
        return F0 + np.vectorize(lambda x: quad(fn, r0, x, epsabs=1e-13, epsrel=1e-13)[0])(r)

    def potential_expr(self, r0=None, F0=0.0):
        """F as an expression of ``r`` (a Func1D whose derivatives come from the profile)."""
        def fn(x, k):
            return self.potential(x, r0, F0) if k == 0 else self.derivs(x, k - 1)[k - 1]
        return Func1D("F", fn, Var("r"))

    def max_knot_error(self):
        if not self.sampled:
            return 0.0
        r = np.array(self.knots[0])
        return float(np.max(np.abs(self._interp(r) - np.array(self.knots[1][0]))))

    def to_json(self):
        if not self.sampled:
            d = {"expr": to_text(self.expr)}
            if all(math.isfinite(x) for x in self.interval):
                d["interval"] = list(self.interval)
            return d
        r, cols = self.knots
        d = {"samples": {"r": list(r), "f": list(cols[0])}}
        for name, c in zip(("fp", "fpp"), cols[1:]):
            d["samples"][name] = list(c)
        return d

    @classmethod
    def from_json(cls, d):
        if "expr" in d:
            return cls.from_expr(d["expr"], d.get("interval", (-math.inf, math.inf)))
        s = d["samples"]
        return cls.from_samples(s["r"], s["f"], s.get("fp"), s.get("fpp"))


# ---------------------------------------------------------------------------
# Fibers
# ---------------------------------------------------------------------------

def _default_point(chart):
    # generic interior point, away from symmetric spots of model charts
    return np.array([lo + 0.37 * (hi - lo) for lo, hi in chart.domain])


@dataclass(frozen=True)
class SpaceForm:
    """Simply connected space form of dimension ``m`` and curvature ``c``."""

    m: int
    c: float

    kind = "spaceform"

    @cached_property
    def chart(self):
        if self.c < 0:
            names = ("s",) + catalog.angle_names(self.m - 1)
        else:
            names = None
        return catalog.space_form(self.m, self.c, names=names)

    @cached_property
    def point(self):
        return _default_point(self.chart)

    def gbar(self):
        return self.chart.metric_values(self.point[None])[0]

    def riemann(self):
        g = self.gbar()
        return self.c * _kn(g, g)

    def ricci(self):
        return (self.m - 1) * self.c * self.gbar()

    def scalar(self):
        return self.m * (self.m - 1) * self.c

    def grad_scalar(self):
        return np.zeros(self.m)

    def to_json(self):
        return {"kind": self.kind, "c": self.c}


@dataclass(frozen=True)
class Einstein:
    """Einstein fiber known only through its scalar curvature; works in an orthonormal frame."""

    m: int
    Rbar: float

    kind = "einstein"
    chart = None

    def gbar(self):
        return np.eye(self.m)

    def riemann(self):
        raise FiberDataInsufficient("an Einstein fiber given by its scalar curvature has no full curvature tensor")

    def ricci(self):
        return self.Rbar / self.m * np.eye(self.m)

    def scalar(self):
        return float(self.Rbar)

    def grad_scalar(self):
        raise FiberDataInsufficient("gradient of the fiber scalar curvature needs an explicit chart")

    def to_json(self):
        return {"kind": self.kind, "Rbar": self.Rbar}


@dataclass(frozen=True)
class ExplicitChart:
    """Fiber given by a metric chart, evaluated at ``point``."""

    chart: MetricChart
    point: tuple

    kind = "chart"

    def __post_init__(self):
        object.__setattr__(self, "point", tuple(map(float, self.chart.point(self.point))))
        if "r" in self.chart.coords:
            raise ValueError("fiber chart may not use the coordinate name 'r'")

    @property
    def m(self):
        return self.chart.dim

    @cached_property
    def _geo(self):
        return LocalGeometry(self.chart, np.array(self.point)[None], 3)

    def gbar(self):
        return self._geo.g[0]

    def riemann(self):
        return self._geo.riemann[0]

    def ricci(self):
        return self._geo.ricci[0]

    def scalar(self):
        return float(self._geo.scalar[0])

    def grad_scalar(self):
        return self._geo.nabla_scalar[0]

    def to_json(self):
        return {"kind": self.kind, "chart": self.chart.to_json(), "point": list(self.point)}


def fiber_from_json(d, m):
    kind = d.get("kind")
    if kind == "spaceform":
        return SpaceForm(m, float(d["c"]))
    if kind == "einstein":
        return Einstein(m, float(d["Rbar"]))
    if kind == "chart":
        chart = MetricChart.from_json(d["chart"])
        if chart.dim != m:
            raise DimensionError(f"fiber chart has dimension {chart.dim}, expected {m}")
        return ExplicitChart(chart, d.get("point", _default_point(chart)))
    raise ValueError(f"unknown fiber kind {kind!r}")


# ---------------------------------------------------------------------------
# Warped model and closed forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WarpedModel:
    n: int
    profile: Profile
    fiber: object
    interval: tuple

    def __post_init__(self):
        object.__setattr__(self, "interval", tuple(map(float, self.interval)))
        if self.n < 3:
            raise DimensionError("warped models need n >= 3")
        if self.fiber.m != self.n - 1:
            raise DimensionError(f"fiber dimension {self.fiber.m} does not match n - 1 = {self.n - 1}")
        lo, hi = self.interval
        plo, phi = self.profile.interval
        if not (plo <= lo < hi <= phi):
            raise OutOfInterval(f"interval {self.interval} not inside profile validity {self.profile.interval}")

    def warp(self, r, order=2):
        """[f, f', f''] at r after checking the interval and f >= WARP_EPS."""
        lo, hi = self.interval
        if not lo <= r <= hi:
            raise OutOfInterval(f"r = {r} outside {self.interval}")
        d = [float(x) for x in self.profile.derivs(r, order)]
        if d[0] < WARP_EPS:
            raise DomainError(f"warping function F'({r}) = {d[0]:.3g} below {WARP_EPS}")
        return d

    def to_json(self):
        return {"n": self.n, "profile": self.profile.to_json(),
                "fiber": self.fiber.to_json(), "interval": list(self.interval)}

    @classmethod
    def from_json(cls, d):
        n = int(d["n"])
        return cls(n, Profile.from_json(d["profile"]), fiber_from_json(d["fiber"], n - 1),
                   tuple(d["interval"]))


def warped_riemann(wm: WarpedModel, r) -> dict:
    """Blocks R_1a1b, R_1abc, R_abcd."""
    f, fp, fpp = wm.warp(r)
    gb, m = wm.fiber.gbar(), wm.fiber.m
    rb = wm.fiber.riemann()
    return {
        "1a1b": -f * fpp * gb,
        "1abc": np.zeros((m, m, m)),
        # ḡ_ad ḡ_bc - ḡ_ac ḡ_bd = -(ḡ ∧ ḡ)
        "abcd": f * f * rb - WARPED_FIBER_TERM_SIGN * (f * fp) ** 2 * _kn(gb, gb),
    }


def warped_ricci(wm: WarpedModel, r) -> dict:
    """Blocks R_11, R_1a, R_ab."""
    f, fp, fpp = wm.warp(r)
    n = wm.n
    return {
        "11": -(n - 1) * fpp / f,
        "1a": np.zeros(n - 1),
        "ab": wm.fiber.ricci() - ((n - 2) * fp * fp + f * fpp) * wm.fiber.gbar(),
    }


def scalar_from_warp(n, Rbar, f, fp, fpp):
    """R = Rbar/f^2 - (n-1)(n-2)(f'/f)^2 - 2(n-1) f''/f (array friendly)."""
    return Rbar / f**2 - (n - 1) * (n - 2) * (fp / f) ** 2 - 2 * (n - 1) * fpp / f


def warped_scalar(wm: WarpedModel, r) -> float:
    f, fp, fpp = wm.warp(r)
    return float(scalar_from_warp(wm.n, wm.fiber.scalar(), f, fp, fpp))


def fiber_weyl(fiber) -> np.ndarray:
    """Weyl tensor of the fiber itself (fiber dimension >= 3)."""
    m = fiber.m
    if m < 3:
        raise DimensionError("fiber Weyl tensor needs fiber dimension >= 3")
    gb, ric, R = fiber.gbar(), fiber.ricci(), fiber.scalar()
    return (fiber.riemann() - (_kn(ric, gb) + _kn(gb, ric)) / (m - 2)
            + R * _kn(gb, gb) / ((m - 1) * (m - 2)))


def warped_weyl(wm: WarpedModel, r, blocks=("1a1b", "1abc", "abcd")) -> dict:
    """Weyl blocks of the warped metric in terms of fiber data.

    W_1a1b = -Rbar_ab/(n-2) + Rbar gbar_ab/((n-1)(n-2)), W_1abc = 0 and
    W_abcd = f^2 (Wbar_abcd + (K_abcd - 2 Rbar (gbar ∧ gbar)_abcd/(n-1)) / ((n-2)(n-3)))
    with K = Ricbar ∧ gbar + gbar ∧ Ricbar. ``abcd`` requires n >= 4.
    """
    n = wm.n
    if "abcd" in blocks and n < 4:
        raise DimensionError("W_abcd needs n >= 4")
    f, _, _ = wm.warp(r)
    gb, ric, R = wm.fiber.gbar(), wm.fiber.ricci(), wm.fiber.scalar()
    out = {}
    if "1a1b" in blocks:
        out["1a1b"] = -ric / (n - 2) + R * gb / ((n - 1) * (n - 2))
    if "1abc" in blocks:
        out["1abc"] = np.zeros((n - 1,) * 3)
    if "abcd" in blocks:
        K = _kn(ric, gb) + _kn(gb, ric)
        extra = (K - 2.0 * R / (n - 1) * _kn(gb, gb)) / ((n - 2) * (n - 3))
        out["abcd"] = f * f * (fiber_weyl(wm.fiber) + extra)
    return out


def radial_cotton(wm: WarpedModel, r) -> DenseTensor:
    """C_1a1 = d_a Rbar / (2(n-1) f^2), a covector over the fiber coordinates."""
    f, _, _ = wm.warp(r)
    return DenseTensor(wm.fiber.grad_scalar() / (2.0 * (wm.n - 1) * f * f), (CO,))


def radial_cao_chen(wm: WarpedModel, r) -> DenseTensor:
    """D_1ab = f/(n-2) (R_ab - (R - R_11)/(n-1) g_ab); zero iff the fiber is Einstein."""
    f, _, _ = wm.warp(r)
    n = wm.n
    ric = warped_ricci(wm, r)
    R = warped_scalar(wm, r)
    g_ab = f * f * wm.fiber.gbar()
    d = f / (n - 2) * (ric["ab"] - (R - ric["11"]) / (n - 1) * g_ab)
    return DenseTensor(d, (CO, CO), ("sym(0,1)",))


# ---------------------------------------------------------------------------
# Assembly into full n-dimensional tensors
# ---------------------------------------------------------------------------

def assemble_riemann(blocks: dict) -> np.ndarray:
    """Full R_ijkl (coordinates (r, x^a)) from the 1a1b, 1abc and abcd blocks."""
    a1, abc, abcd = blocks["1a1b"], blocks["1abc"], blocks["abcd"]
    m = a1.shape[0]
    R = np.zeros((m + 1,) * 4)
    s = slice(1, None)
    R[s, s, s, s] = abcd
    R[0, s, 0, s] = a1
    R[s, 0, s, 0] = a1
    R[0, s, s, 0] = -a1
    R[s, 0, 0, s] = -a1
    R[0, s, s, s] = abc
    R[s, 0, s, s] = -abc
    R[s, s, 0, s] = np.transpose(abc, (1, 2, 0))
    R[s, s, s, 0] = -np.transpose(abc, (1, 2, 0))
    return R


def assemble_ricci(blocks: dict) -> np.ndarray:
    m = blocks["ab"].shape[0]
    out = np.zeros((m + 1, m + 1))
    out[0, 0] = blocks["11"]
    out[0, 1:] = out[1:, 0] = blocks["1a"]
    out[1:, 1:] = blocks["ab"]
    return out


def model_point(wm: WarpedModel, r) -> np.ndarray:
    """Point (r, fiber point) of :func:`build_warped_chart`."""
    return np.concatenate([[float(r)], np.asarray(wm.fiber.point, dtype=float)])


def build_warped_chart(wm: WarpedModel, mode="analytic", h=None) -> MetricChart:
    """Explicit chart g = dr^2 + f(r)^2 gbar_ab(x) dx^a dx^b."""
    fc = wm.fiber.chart
    if fc is None:
        raise FiberDataInsufficient("building a chart needs a space-form or explicit fiber")
    n = wm.n
    f2 = power(wm.profile.as_expr(), 2)
    g = [[num(0)] * n for _ in range(n)]
    g[0][0] = num(1)
    for a in range(n - 1):
        for b in range(n - 1):
            gab = fc.g[a][b]
            g[a + 1][b + 1] = num(0) if is_zero(gab) else mul(f2, gab)
    kwargs = {} if h is None else {"h": h}
    return MetricChart(("r",) + fc.coords, tuple(map(tuple, g)), (wm.interval,) + fc.domain,
                       mode=mode, name=f"warped{n}", **kwargs)

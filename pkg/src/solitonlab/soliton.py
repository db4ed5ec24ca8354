"""Soliton profile ODE, branch classification and level-set geometry.

A rotationally symmetric gradient conformal soliton is a warped product
dr^2 + F'(r)^2 gbar with F'' = phi. For the Yamabe driver phi = R - rho and R
from the warped scalar curvature formula, which closes into a third-order ODE
for F.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .chart import MetricChart, hessian_batch, scalar_jets
from .conventions import WARP_EPS
from .errors import (BlowUp, CriticalPoint, FiberDataInsufficient, Inconclusive,
                     StepUnderflow)
from .expr import as_expr, compile_expr, jet_arrays, taylor, to_text
from .tensor import CO, DenseTensor
from .warped import Einstein, ExplicitChart, Profile, SpaceForm, WarpedModel, fiber_from_json, scalar_from_warp

DEFAULT_STEP = 1e-3
DEFAULT_SPAN = 10.0
DEFAULT_ZERO_TOL = 1e-6
BLOWUP = 1e12
MIN_STEP = 1e-14

DRIVER_VARS = ("r", "F", "Fp", "R")


@dataclass(frozen=True)
class Yamabe:
    rho: float

    def to_json(self):
        return {"kind": "yamabe", "rho": self.rho}


@dataclass(frozen=True)
class GenericConformal:
    """F'' = phi(r, F, Fp, R); ``Fp`` stands for F'."""

    phi: object

    def __post_init__(self):
        e = as_expr(self.phi)
        if not e.free_vars <= set(DRIVER_VARS):
            raise ValueError(f"phi may only use {DRIVER_VARS}, got {sorted(e.free_vars)}")
        object.__setattr__(self, "phi", e)

    def to_json(self):
        return {"kind": "phi", "expr": to_text(self.phi)}


def driver_from_json(d):
    if d["kind"] == "yamabe":
        return Yamabe(float(d["rho"]))
    return GenericConformal(d["expr"])


@dataclass(frozen=True)
class SolitonSpec:
    n: int
    fiber: object
    driver: object
    init: tuple = (0.0, 0.0, 1.0, 0.0)
    step: float = DEFAULT_STEP
    span: float = DEFAULT_SPAN
    zero_tol: float = DEFAULT_ZERO_TOL

    def __post_init__(self):
        object.__setattr__(self, "init", tuple(float(x) for x in self.init))
        if len(self.init) != 4:
            raise ValueError("init must be (r0, F0, F'0, F''0)")
        if self.n < 3:
            raise ValueError("n must be >= 3")
        if self.fiber.m != self.n - 1:
            raise ValueError(f"fiber dimension {self.fiber.m} does not match n - 1")
        if not self.init[2] > WARP_EPS:
            raise ValueError("initial F' must be positive")
        if not (self.step > 0 and self.span > 0 and self.zero_tol > 0):
            raise ValueError("step, span and zero tolerance must be positive")

    @property
    def Rbar(self):
        if isinstance(self.fiber, ExplicitChart):
            raise FiberDataInsufficient("the profile ODE needs a constant fiber scalar curvature "
                                        "(space-form or Einstein fiber)")
        return self.fiber.scalar()

    def to_json(self):
        return {"n": self.n, "fiber": self.fiber.to_json(), "driver": self.driver.to_json(),
                "init": list(self.init), "step": self.step, "span": self.span,
                "zero_tol": self.zero_tol}

    @classmethod
    def from_json(cls, d):
        n = int(d["n"])
        return cls(n, fiber_from_json(d["fiber"], n - 1), driver_from_json(d["driver"]),
                   tuple(d["init"]), float(d.get("step", DEFAULT_STEP)),
                   float(d.get("span", DEFAULT_SPAN)), float(d.get("zero_tol", DEFAULT_ZERO_TOL)))


@dataclass
class ProfileSolution:
    """Sampled solution, sorted by r. ``zeros`` are fitted zeros of F'."""

    n: int
    Rbar: float
    r: np.ndarray
    F: np.ndarray
    Fp: np.ndarray
    Fpp: np.ndarray
    Fppp: np.ndarray
    phi: np.ndarray
    R: np.ndarray
    zeros: list = field(default_factory=list)
    termination: dict = field(default_factory=dict)
    spec: object = None

    CSV_COLUMNS = ("r", "F", "Fp", "Fpp", "phi", "R")

    @property
    def span(self):
        return (float(self.r[0]), float(self.r[-1]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for row in zip(*(getattr(self, c) for c in self.CSV_COLUMNS)):
            w.writerow(["%.17g" % x for x in row])
        return buf.getvalue()

    def to_json(self, branch=None):
        d = {"n": self.n, "Rbar": self.Rbar,
             "spec": self.spec.to_json() if self.spec is not None else None,
             "termination": self.termination, "zeros": list(self.zeros),
             "span": list(self.span)}
        if branch is not None:
            d["branch"] = branch.to_json()
        d["columns"] = {c: getattr(self, c).tolist() for c in self.CSV_COLUMNS + ("Fppp",)}
        return d

    @classmethod
    def from_json(cls, d):
        cols = {k: np.asarray(v, dtype=float) for k, v in d["columns"].items()}
        spec = SolitonSpec.from_json(d["spec"]) if d.get("spec") else None
        fppp = cols.get("Fppp", np.gradient(cols["Fpp"], cols["r"]))
        return cls(int(d["n"]), float(d["Rbar"]), cols["r"], cols["F"], cols["Fp"], cols["Fpp"],
                   fppp, cols["phi"], cols["R"], list(d.get("zeros", [])),
                   dict(d.get("termination", {})), spec)

    def profile(self) -> Profile:
        """Hermite interpolant of F' with F'' and F''' as derivative data."""
        return Profile.from_samples(self.r, self.Fp, self.Fpp, self.Fppp)

    def warped_model(self, fiber) -> WarpedModel:
        return WarpedModel(self.n, self.profile(), fiber, self.span)

    def potential_expr(self):
        """F as an expression of r, anchored at the first sample."""
        return self.profile().potential_expr(self.r[0], self.F[0])


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def yamabe_third(n, Rbar, rho, fp, fpp):
    """F''' from the Yamabe closure phi = R - rho = F''."""
    return (Rbar / fp**2 - (n - 1) * (n - 2) * (fpp / fp) ** 2 - fpp - rho) * fp / (2 * (n - 1))


def _rk4(rhs, r, y, h):
    k1 = rhs(r, y)
    k2 = rhs(r + h / 2, [a + h / 2 * b for a, b in zip(y, k1)])
    k3 = rhs(r + h / 2, [a + h / 2 * b for a, b in zip(y, k2)])
    k4 = rhs(r + h, [a + h * b for a, b in zip(y, k3)])
    return [a + h / 6 * (b + 2 * c + 2 * d + e) for a, b, c, d, e in zip(y, k1, k2, k3, k4)]


def _march(rhs, r0, y0, direction, spec, fp_index):
    """Integrate one direction. Returns (rs, ys, termination, zero or None)."""
    rs, ys = [r0], [list(y0)]
    r, y = r0, list(y0)
    h = spec.step
    end = r0 + direction * spec.span
    while True:
        remaining = (end - r) * direction
        if remaining <= 1e-12 * spec.step:
            return rs, ys, "span", None
        hh = min(h, remaining)
        if abs(y[fp_index]) < 10 * spec.zero_tol:
            hh = min(hh, h / 2)
        while True:
            try:
                y_new = _rk4(rhs, r, y, direction * hh)
            except (ZeroDivisionError, OverflowError):
                y_new = None
            ok = y_new is not None and all(math.isfinite(v) for v in y_new) and y_new[fp_index] > 0
            if ok:
                break
            hh /= 2
            if hh < MIN_STEP:
                if abs(y[fp_index]) < 10 * spec.zero_tol:
                    return rs, ys, "zero", _fit_zero(rhs, r, y, fp_index)
                raise StepUnderflow(f"step underflow at r = {r}")
        r, y = r + direction * hh, y_new
        rs.append(r)
        ys.append(y)
        if abs(rhs(r, y)[fp_index]) > BLOWUP:
            return rs, ys, "blowup", None
        if y[fp_index] < spec.zero_tol:
            return rs, ys, "zero", _fit_zero(rhs, r, y, fp_index)
        h = hh if abs(y[fp_index]) < 10 * spec.zero_tol else spec.step


def _fit_zero(rhs, r, y, i):
    # F' ~ phi0 (r - r*) near the zero, phi0 = F''
    slope = rhs(r, y)[i]
    return r - y[i] / slope if slope != 0 else r


def solve_profile(spec: SolitonSpec) -> ProfileSolution:
    """Fixed-step RK4 from r0 in both directions until the span, a zero of F' or blow-up."""
    n, Rbar = spec.n, spec.Rbar
    r0, F0, Fp0, Fpp0 = spec.init
    drv = spec.driver
    uses_R = isinstance(drv, GenericConformal) and "R" in drv.phi.free_vars

    if isinstance(drv, Yamabe):
        rho = drv.rho
        rhs = lambda r, y: (y[1], y[2], yamabe_third(n, Rbar, rho, y[1], y[2]))
        y0 = (F0, Fp0, Fpp0)
    elif uses_R:
        rhs = _implicit_rhs(spec)
        y0 = (F0, Fp0, Fpp0)
    else:
        phi = compile_expr(drv.phi, DRIVER_VARS[:3])
        rhs = lambda r, y: (y[1], phi(r, y[0], y[1]))
        y0 = (F0, Fp0)

    halves = []
    terms = {}
    zeros = []
    blown = False
    for direction, side in ((-1, "left"), (1, "right")):
        rs, ys, why, z = _march(rhs, r0, y0, direction, spec, 1)
        terms[side] = why
        blown |= why == "blowup"
        if z is not None:
            zeros.append(z)
        halves.append((rs, ys))
    (rl, yl), (rr, yr) = halves
    r = np.array(rl[::-1] + rr[1:])
    Y = np.array(yl[::-1] + yr[1:])
    sol = _complete(spec, r, Y, sorted(zeros), terms)
    if blown:
        raise BlowUp("|F''| exceeded %g" % BLOWUP, sol)
    return sol


def _implicit_rhs(spec):
    """phi depends on R, which depends on F'''; solve phi(..., R(F''')) = F'' by Newton."""
    n, Rbar = spec.n, spec.Rbar
    e = spec.driver.phi

    def rhs(r, y):
        F, fp, fpp = y
        base = Rbar / fp**2 - (n - 1) * (n - 2) * (fpp / fp) ** 2
        t = 0.0
        for _ in range(50):
            R = base - 2 * (n - 1) * t / fp
            jet = jet_arrays(taylor(e, {"r": r, "F": F, "Fp": fp, "R": R}, ("R",), 1), 1, 1)
            resid = float(jet[0]) - fpp
            dres = float(np.ravel(jet[1])[0]) * (-2 * (n - 1) / fp)
            if dres == 0:
                raise ZeroDivisionError("phi does not determine F'''")
            dt = resid / dres
            t -= dt
            if abs(dt) <= 1e-14 * (1 + abs(t)):
                break
        return (fp, fpp, t)

    return rhs


def _complete(spec, r, Y, zeros, terms):
    n, Rbar = spec.n, spec.Rbar
    drv = spec.driver
    F, Fp = Y[:, 0], Y[:, 1]
    if Y.shape[1] == 3:
        Fpp = Y[:, 2]
        if isinstance(drv, Yamabe):
            Fppp = yamabe_third(n, Rbar, drv.rho, Fp, Fpp)
        else:
            rhs = _implicit_rhs(spec)
            Fppp = np.array([rhs(a, y)[2] for a, y in zip(r, Y)])
    else:
        env = {"r": r, "F": F, "Fp": Fp}
        jets = jet_arrays(taylor(drv.phi, env, ("r", "F", "Fp"), 1), 3, 1)
        Fpp = jets[0]
        d = jets[1]
        Fppp = d[:, 0] + d[:, 1] * Fp + d[:, 2] * Fpp
    with np.errstate(divide="ignore", invalid="ignore"):
        R = scalar_from_warp(n, Rbar, Fp, Fpp, Fppp)
    phi = Fpp.copy()
    return ProfileSolution(n, float(Rbar), r, F, Fp, Fpp, Fppp, phi, R, zeros, terms, spec)


def solution_from_profile(fprime, r, n=3, Rbar=float("nan"), zero_tol=DEFAULT_ZERO_TOL, F0=0.0):
    """ProfileSolution sampled from a given F'(r) expression on the grid ``r``.

    Zeros of F' are located by sign changes (refined by the linear fit) or by
    samples within ``zero_tol`` of zero.
    """
    r = np.asarray(r, dtype=float)
    Fp, Fpp, Fppp = Profile.from_expr(fprime).derivs(r, 2)
    F = Profile.from_samples(r, Fp, Fpp, Fppp).potential(r, r[0], F0)
    zeros = []
    for i in range(len(r) - 1):
        a, b = Fp[i], Fp[i + 1]
        if abs(a) < zero_tol:
            if not zeros or abs(zeros[-1] - r[i]) > 2 * (r[1] - r[0]):
                zeros.append(float(r[i] - a / Fpp[i]) if Fpp[i] else float(r[i]))
        elif a * b < 0:
            zeros.append(float(r[i] - a * (r[i + 1] - r[i]) / (b - a)))
    if abs(Fp[-1]) < zero_tol and (not zeros or abs(zeros[-1] - r[-1]) > 2 * (r[1] - r[0])):
        zeros.append(float(r[-1]))
    with np.errstate(divide="ignore", invalid="ignore"):
        R = scalar_from_warp(n, Rbar, Fp, Fpp, Fppp)
    return ProfileSolution(n, float(Rbar), r, np.asarray(F, dtype=float), Fp, Fpp, Fppp, Fpp.copy(),
                           R, zeros, {"left": "span", "right": "span"})


# ---------------------------------------------------------------------------
# Classification and identities
# ---------------------------------------------------------------------------

BRANCHES = {2: "Compact", 1: "HalfLine", 0: "FullLine"}


@dataclass(frozen=True)
class BranchReport:
    zeros: tuple
    branch: str
    provisional: bool
    span: tuple

    def to_json(self):
        return {"branch": self.branch, "zeros": list(self.zeros),
                "provisional": self.provisional, "span": list(self.span)}


def classify_branch(sol: ProfileSolution) -> BranchReport:
    """Compact (two zeros of F'), HalfLine (one) or FullLine (none, provisional within the span)."""
    if "blowup" in sol.termination.values():
        raise Inconclusive("solution blew up; branch undetermined")
    k = len(sol.zeros)
    if k not in BRANCHES:
        raise Inconclusive(f"{k} zeros of F' found; at most 2 are possible")
    return BranchReport(tuple(sol.zeros), BRANCHES[k], k == 0, sol.span)


def scalar_relation_residual(sol: ProfileSolution, fiber=None) -> float:
    """max |F'^2 R - Rbar + (n-1)(n-2) phi^2 + 2(n-1) F' phi'| where F' > WARP_EPS."""
    n = sol.n
    Rbar = sol.Rbar if fiber is None else fiber.scalar()
    ok = sol.Fp > WARP_EPS
    fp, R, phi, dphi = sol.Fp[ok], sol.R[ok], sol.phi[ok], sol.Fppp[ok]
    res = fp**2 * R - Rbar + (n - 1) * (n - 2) * phi**2 + 2 * (n - 1) * fp * dphi
    return float(np.max(np.abs(res))) if res.size else 0.0


def driver_residual(sol: ProfileSolution) -> float:
    """max |F'' - phi| with phi recomputed from the driver (R - rho for Yamabe)."""
    drv = sol.spec.driver if sol.spec is not None else None
    if isinstance(drv, Yamabe):
        target = sol.R - drv.rho
    elif isinstance(drv, GenericConformal):
        env = {"r": sol.r, "F": sol.F, "Fp": sol.Fp, "R": sol.R}
        target = taylor(drv.phi, env, (), 0)[0]
    else:
        target = sol.phi
    return float(np.max(np.abs(sol.Fpp - target)))


def chart_closure_residual(sol: ProfileSolution, fiber, indices) -> float:
    """max ||nabla nabla F - phi g|| on the explicit warped chart, evaluated at
    the solution nodes ``indices`` so that phi is the integrator's own value."""
    from .warped import build_warped_chart, model_point
    wm = sol.warped_model(fiber)
    M = build_warped_chart(wm)
    idx = np.asarray(indices, dtype=int)
    pts = np.array([model_point(wm, sol.r[i]) for i in idx])
    hess, geo = hessian_batch(M, sol.potential_expr(), pts)
    diff = hess - sol.phi[idx][:, None, None] * geo.g
    return float(np.max(np.sqrt(np.sum(diff**2, axis=(1, 2)))))


# ---------------------------------------------------------------------------
# Level sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelSetReport:
    grad_norm: float
    phi: float
    B: DenseTensor
    H: float
    residual_B: float
    residual_H: float

    def to_json(self):
        return {"grad_norm": self.grad_norm, "phi": self.phi, "B": self.B.to_json(), "H": self.H,
                "residual_B": self.residual_B, "residual_H": self.residual_H}


def _tangent_frame(g, normal):
    """g-orthonormal basis of the complement of ``normal`` (a g-unit vector)."""
    n = g.shape[0]
    proj = np.eye(n) - np.outer(normal, normal @ g)  # columns: projected coordinate vectors
    order = np.argsort(-np.einsum("ik,ij,jk->k", proj, g, proj))
    basis = []
    for k in order[: n - 1]:
        v = proj[:, k]
        for u in basis:
            v = v - (u @ g @ v) * u
        basis.append(v / math.sqrt(v @ g @ v))
    return np.array(basis)


def levelset_report(M: MetricChart, F, p, eps=WARP_EPS) -> LevelSetReport:
    """Second fundamental form and mean curvature of the level set of F through p."""
    F = as_expr(F)
    pts = M.point(p)[None]
    hess, geo = hessian_batch(M, F, pts)
    _, dF = scalar_jets(M, F, geo.points, 1)
    g, ginv, dF, hess = geo.g[0], geo.ginv[0], dF[0], hess[0]
    n = M.dim
    grad = ginv @ dF
    gn = math.sqrt(max(float(dF @ grad), 0.0))
    if gn <= eps:
        raise CriticalPoint(f"|grad F| = {gn:.3g} at {[float(x) for x in pts[0]]}")
    phi = float(np.einsum("ij,ij->", ginv, hess)) / n
    E = _tangent_frame(g, grad / gn)
    B = E @ hess @ E.T / gn
    H = float(np.trace(B))
    target = phi / gn
    res_B = float(np.linalg.norm(B - target * np.eye(n - 1)))
    res_H = abs(H - (n - 1) * target)
    return LevelSetReport(gn, phi, DenseTensor(B, (CO, CO), ("sym(0,1)",)), H, res_B, res_H)


def sample_level_set(M: MetricChart, F, p, k=8, radius=0.2, seed=0, iters=30):
    """k points on the level set of F through p, found by stepping along random
    tangent directions and projecting back with Newton steps along grad F."""
    F = as_expr(F)
    p = M.point(p)
    c = float(scalar_jets(M, F, p[None], 0)[0][0])
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(k):
        _, dF = scalar_jets(M, F, p[None], 1)
        geo_g = M.metric_values(p[None])[0]
        grad = np.linalg.solve(geo_g, dF[0])
        v = rng.normal(size=M.dim)
        v -= (v @ dF[0]) / (grad @ dF[0]) * grad
        x = p + radius * v / np.linalg.norm(v)
        for _ in range(iters):
            val, d = scalar_jets(M, F, x[None], 1)
            gx = np.linalg.solve(M.metric_values(x[None])[0], d[0])
            step = (val[0] - c) / (gx @ d[0]) * gx
            x = x - step
            if np.max(np.abs(step)) < 1e-15:
                break
        out.append(x)
    return np.array(out)

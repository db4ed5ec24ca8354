"""Seeded, deterministic property suite.

Each check evaluates one identity or model value, reports its largest
residual and compares it with a tolerance. Checks run in a fixed family
order; failures are recorded and the run continues.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import catalog, chart as ch, conformal as cf, soliton as sol, tensor as tn, warped as wp

FAMILIES = (
    "calibration",
    "riemann-symmetry",
    "warped-vs-chart",
    "warped-scalar-models",
    "conformal-traces",
    "weyl-n3",
    "cotton-identities",
    "triple-divergence",
    "einstein-fiber",
    "soliton-closure",
    "scalar-relation",
    "levelset",
    "branch",
)

# public operation -> families whose checks exercise it
COVERAGE = {
    "tensor.contract": ("riemann-symmetry",),
    "tensor.check_symmetry": ("riemann-symmetry",),
    "chart.christoffel": ("riemann-symmetry",),
    "chart.riemann": ("riemann-symmetry", "warped-vs-chart"),
    "chart.ricci_scalar": ("calibration", "warped-vs-chart"),
    "chart.hessian": ("soliton-closure", "levelset"),
    "chart.covariant_derivative": ("riemann-symmetry",),
    "conformal.schouten": ("conformal-traces",),
    "conformal.cotton": ("conformal-traces", "warped-vs-chart"),
    "conformal.weyl": ("conformal-traces", "weyl-n3", "warped-vs-chart"),
    "conformal.cao_chen": ("warped-vs-chart",),
    "conformal.div_cotton": ("conformal-traces",),
    "conformal.cotton_identity_residuals": ("cotton-identities",),
    "conformal.triple_divergence_residual": ("triple-divergence",),
    "warped.warped_riemann": ("warped-vs-chart",),
    "warped.warped_ricci": ("warped-vs-chart",),
    "warped.warped_scalar": ("warped-vs-chart", "warped-scalar-models"),
    "warped.warped_weyl": ("warped-vs-chart", "einstein-fiber"),
    "warped.radial_cotton": ("warped-vs-chart",),
    "warped.radial_cao_chen": ("warped-vs-chart", "einstein-fiber"),
    "warped.build_warped_chart": ("warped-vs-chart", "soliton-closure"),
    "soliton.solve_profile": ("soliton-closure", "scalar-relation", "branch"),
    "soliton.classify_branch": ("branch",),
    "soliton.scalar_relation_residual": ("scalar-relation",),
    "soliton.levelset_report": ("levelset",),
}

DEFAULT_SEED = 42


@dataclass
class CheckResult:
    name: str
    family: str
    anchor: str
    kind: str
    residual: float
    tolerance: float
    relation: str
    passed: bool
    runtime: float
    error: str = ""


@dataclass
class VerificationReport:
    seed: int
    mode: str
    checks: list = field(default_factory=list)
    runtime: float = 0.0

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    def to_json(self, runtimes=True):
        rows = []
        for c in self.checks:
            d = asdict(c)
            if not runtimes:
                d.pop("runtime")
            rows.append(d)
        d = {"seed": self.seed, "mode": self.mode, "passed": self.passed,
             "n_checks": len(self.checks), "n_failed": len(self.failures), "checks": rows}
        if runtimes:
            d["runtime"] = self.runtime
        return d

    def table(self) -> str:
        w = max([len(c.name) for c in self.checks] + [5])
        lines = [f"{'check':<{w}}  {'family':<20} {'kind':<8} {'residual':>11} {'rel':>3} {'tol':>9}  result  time"]
        for c in self.checks:
            res = "FAIL" if not c.passed else "ok"
            lines.append(f"{c.name:<{w}}  {c.family:<20} {c.kind:<8} {c.residual:11.3e} {c.relation:>3} "
                         f"{c.tolerance:9.1e}  {res:<6} {c.runtime:5.2f}s")
        lines.append(f"{len(self.checks)} checks, {len(self.failures)} failed, seed {self.seed}, "
                     f"{self.runtime:.2f}s")
        return "\n".join(lines)


@dataclass
class _Check:
    name: str
    family: str
    anchor: str
    kind: str
    tolerance: float
    run: Callable
    relation: str = "<="


# ---------------------------------------------------------------------------
# Check builders (one function per family, each returning a list of _Check)
# ---------------------------------------------------------------------------

def _calibration(seed):
    out = []
    for mode, tol in (("analytic", 1e-6), ("fd", 1e-3)):
        for n in (2, 3, 4):
            for label, make, sign in (("S", catalog.sphere, 1), ("H", catalog.hyperbolic, -1)):
                def run(n=n, make=make, sign=sign, mode=mode):
                    M = make(n).with_mode(mode)
                    pts = catalog.interior_points(seed, n, M, 3)
                    R = ch.LocalGeometry(M, pts, 2).scalar
                    return float(np.max(np.abs(R - sign * n * (n - 1))))
                out.append(_Check(f"calibration/{label}{n}-{mode}", "calibration",
                                  f"R = {'+' if sign > 0 else '-'}n(n-1) on unit {label}^n", mode, tol, run))
    return out


def _riemann_symmetry(seed):
    def symmetry(mode, count):
        worst = 0.0
        for i in range(count):
            M = catalog.random_chart(seed, i, mode=mode)
            pts = catalog.interior_points(seed, i, M, 3)
            R = ch.LocalGeometry(M, pts, 2).riemann
            worst = max(worst, max(tn.riemann_deviations(R).values()))
        return worst

    def fd_agreement():
        worst = 0.0
        for i in range(5):
            M = catalog.random_chart(seed, i)
            pts = catalog.interior_points(seed, i, M, 3)
            a = ch.LocalGeometry(M, pts, 2).riemann
            b = ch.LocalGeometry(M.with_mode("fd"), pts, 2).riemann
            worst = max(worst, float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(a)))))
        return worst

    def christoffel():
        G = ch.christoffel(catalog.polar2d(), [2.0, 0.3]).comp
        return max(abs(G[0, 1, 1] + 2.0), abs(G[1, 0, 1] - 0.5), abs(G[1, 1, 0] - 0.5))

    def contraction():
        M = catalog.sphere(3)
        p = [1.0, 1.2, 0.4]
        Rm = ch.riemann(M, p)
        ric = tn.contract(Rm, (1, 3), ch.inverse_metric(M, p))
        return max(float(np.max(np.abs(ric.comp - 2 * ch.metric(M, p).comp))), tn.check_symmetry(Rm)["riemann"])

    def compatibility():
        worst = 0.0
        for i in range(3):
            M = catalog.random_chart(seed, i)
            for p in catalog.interior_points(seed, i, M, 2):
                worst = max(worst, float(np.max(np.abs(ch.covariant_derivative(M, ch.metric_field(M), p).comp))))
        return worst

    def bianchi():
        worst = 0.0
        for i in range(3):
            M = catalog.random_chart(seed, i)
            for p in catalog.interior_points(seed, i, M, 2):
                nr = ch.covariant_derivative(M, ch.ricci_field(M), p).comp
                gi = ch.inverse_metric(M, p).comp
                d = 0.5 * np.einsum("jk,ijk->i", gi, nr) - np.einsum("ij,ijk->k", gi, nr)
                worst = max(worst, float(np.max(np.abs(d))))
        return worst

    fam = "riemann-symmetry"
    return [
        _Check("riemann-symmetry/corpus-analytic", fam, "R_ijkl = -R_jikl = -R_ijlk = R_klij, first Bianchi",
               "analytic", 1e-8, lambda: symmetry("analytic", 20)),
        _Check("riemann-symmetry/corpus-fd", fam, "R_ijkl symmetries with finite-difference metric jets",
               "fd", 1e-4, lambda: symmetry("fd", 5)),
        _Check("riemann-symmetry/analytic-vs-fd", fam, "analytic and FD curvature agree (relative)",
               "fd", 1e-4, fd_agreement),
        _Check("riemann-symmetry/christoffel-polar", fam, "Gamma^r_thth = -r, Gamma^th_rth = 1/r",
               "analytic", 1e-12, christoffel),
        _Check("riemann-symmetry/contract-S3", fam, "R_ij = R_ipjp = 2 g_ij on unit S^3; riemann tag holds",
               "analytic", 1e-10, contraction),
        _Check("riemann-symmetry/metric-compatibility", fam, "nabla g = 0", "fd", 1e-8, compatibility),
        _Check("riemann-symmetry/contracted-bianchi", fam, "nabla^i R_ij = (1/2) nabla_j R", "fd", 1e-6, bianchi),
    ]


def _model(expr, fiber, interval=(0.1, 3.0)):
    return wp.WarpedModel(fiber.m + 1, wp.Profile.from_expr(expr), fiber, interval)


RADII = tuple(np.linspace(0.3, 2.7, 10))
PROFILES = (("r", 0.0), ("sin(r)", 6.0), ("sinh(r)", -6.0), ("1", 2.0))


def _warped_vs_chart(seed):
    def closed_vs_chart(expr, mode, radii=RADII):
        wm = _model(expr, wp.SpaceForm(2, 1.0))
        M = wp.build_warped_chart(wm, mode=mode)
        pts = np.array([wp.model_point(wm, r) for r in radii])
        geo = ch.LocalGeometry(M, pts, 2)
        worst = 0.0
        for b, r in enumerate(radii):
            Rm = wp.assemble_riemann(wp.warped_riemann(wm, r))
            Ric = wp.assemble_ricci(wp.warped_ricci(wm, r))
            worst = max(worst, float(np.max(np.abs(Rm - geo.riemann[b]))),
                        float(np.max(np.abs(Ric - geo.ricci[b]))),
                        abs(wp.warped_scalar(wm, r) - float(geo.scalar[b])))
        return worst

    def weyl_blocks():
        fiber = wp.ExplicitChart(catalog.sphere_product([1.0, 0.5]), (1.0, 0.3, 1.2, 0.4))
        wm = _model("2 + sin(r)", fiber)
        M = wp.build_warped_chart(wm)
        worst = 0.0
        for r in RADII[:4]:
            W = cf.weyl(M, wp.model_point(wm, r)).comp
            blk = wp.warped_weyl(wm, r)
            worst = max(worst, float(np.max(np.abs(W[0, 1:, 0, 1:] - blk["1a1b"]))),
                        float(np.max(np.abs(W[0, 1:, 1:, 1:] - blk["1abc"]))),
                        float(np.max(np.abs(W[1:, 1:, 1:, 1:] - blk["abcd"]))))
        return worst

    def cao_chen():
        fiber = wp.ExplicitChart(catalog.sphere_product([1.0, 0.5]), (1.0, 0.3, 1.2, 0.4))
        wm = _model("r", fiber)
        M = wp.build_warped_chart(wm)
        F = wp.Profile.from_expr("r").potential_expr(0.1)
        worst = 0.0
        for r in RADII[:4]:
            D = cf.cao_chen(M, F, wp.model_point(wm, r)).comp
            worst = max(worst, float(np.max(np.abs(D[0, 1:, 1:] - wp.radial_cao_chen(wm, r).comp))))
        return worst

    def radial_cotton():
        fiber = wp.ExplicitChart(catalog.product(catalog.perturbed_sphere2(), catalog.sphere(2, 0.7, names=("a", "b"))),
                                 (1.0, 0.5, 1.0, 1.0))
        wm = _model("2 + sin(r)", fiber)
        M = wp.build_warped_chart(wm)
        worst = 0.0
        for r in RADII[:3]:
            C = cf.cotton(M, wp.model_point(wm, r), method="jet").comp
            worst = max(worst, float(np.max(np.abs(C[0, 1:, 0] - wp.radial_cotton(wm, r).comp))))
        return worst

    fam = "warped-vs-chart"
    out = [_Check(f"warped-vs-chart/{e}", fam, "closed-form R_1a1b, R_abcd, R_11, R_ab, R vs chart engine",
                  "analytic", 1e-6, lambda e=e: closed_vs_chart(e, "analytic")) for e, _ in PROFILES]
    out.append(_Check("warped-vs-chart/sin(r)-fd", fam, "closed forms vs FD chart engine", "fd", 1e-3,
                      lambda: closed_vs_chart("sin(r)", "fd")))
    out.append(_Check("warped-vs-chart/weyl-n5", fam, "W_1a1b, W_1abc, W_abcd blocks vs chart Weyl",
                      "analytic", 1e-8, weyl_blocks))
    out.append(_Check("warped-vs-chart/cao-chen-n5", fam, "D_1ab closed form vs chart Cao-Chen",
                      "analytic", 1e-8, cao_chen))
    out.append(_Check("warped-vs-chart/radial-cotton-n5", fam, "C_1a1 = d_a Rbar / (2(n-1) f^2) vs chart Cotton",
                      "analytic", 1e-8, radial_cotton))
    return out


def _warped_scalar_models(seed):
    out = []
    for e, target in PROFILES:
        def run(e=e, target=target):
            wm = _model(e, wp.SpaceForm(2, 1.0))
            return max(abs(wp.warped_scalar(wm, r) - target) for r in RADII)
        out.append(_Check(f"warped-scalar-models/{e}", "warped-scalar-models",
                          f"R = Rbar/f^2 - (n-1)(n-2)(f'/f)^2 - 2(n-1)f''/f = {target:g}",
                          "analytic", 1e-10, run))
    return out


def _conformal_traces(seed):
    def cotton_props():
        worst = 0.0
        for i in range(20):
            M = catalog.random_chart(seed, i)
            pts = catalog.interior_points(seed, i, M, 2)
            C = cf.cotton_batch(M, pts)
            geo = ch.LocalGeometry(M, pts, 0)
            tr = cf.trace_deviations(C, geo.ginv, [(0, 1), (0, 2), (1, 2)])
            worst = max(worst, float(np.max(np.abs(C + np.swapaxes(C, 1, 2)))), *tr.values())
        return worst

    def weyl_traces():
        worst = 0.0
        for i in range(20):
            M = catalog.random_chart(seed, i, n=4, amplitude=0.05, terms=4)
            pts = catalog.interior_points(seed, i, M, 2)
            geo = ch.LocalGeometry(M, pts, 2)
            W = cf.weyl_from(geo.riemann, geo.ricci, geo.scalar, geo.g)
            tr = cf.trace_deviations(W, geo.ginv, [(0, 2), (0, 3), (1, 2), (1, 3), (0, 1), (2, 3)])
            worst = max(worst, *tr.values())
        return worst

    def conformally_flat():
        worst = 0.0
        for i in range(5):
            M = catalog.conformally_flat_chart(seed, i)
            for p in catalog.interior_points(seed, i, M, 2):
                worst = max(worst, cf.norm(cf.cotton(M, p), M, p))
        return worst

    def div_conf_flat():
        M = catalog.conformally_flat_chart(seed, 0)
        return max(float(np.max(np.abs(cf.div_cotton(M, p).comp))) for p in catalog.interior_points(seed, 0, M, 2))

    def schouten_s3():
        M = catalog.sphere(3)
        p = [1.0, 1.2, 0.4]
        return float(np.max(np.abs(cf.schouten(M, p).comp - 0.5 * ch.metric(M, p).comp)))

    def product_weyl():
        M = catalog.sphere_product([1.0, 1.0])
        p = [1.0, 0.3, 1.2, 0.4]
        return cf.norm(cf.weyl(M, p), M, p)

    fam = "conformal-traces"
    return [
        _Check("conformal-traces/cotton-skew-tracefree", fam, "C_ijk = -C_jik, g^jk C_ijk = g^ik C_ijk = 0",
               "fd", 1e-6, cotton_props),
        _Check("conformal-traces/weyl-tracefree-n4", fam, "all metric traces of W vanish", "analytic", 1e-10,
               weyl_traces),
        _Check("conformal-traces/conformally-flat-cotton", fam, "|C| = 0 for g = exp(2u) delta", "fd", 1e-5,
               conformally_flat),
        _Check("conformal-traces/conformally-flat-div-cotton", fam, "div C = 0 when C = 0", "fd", 1e-4,
               div_conf_flat),
        _Check("conformal-traces/schouten-S3", fam, "S = Ric - R g/(2(n-1)) = g/2 on unit S^3", "analytic",
               1e-10, schouten_s3),
        _Check("conformal-traces/weyl-S2xS2", fam, "|W| > 0.1 on S^2 x S^2", "analytic", 0.1, product_weyl,
               relation=">="),
    ]


def _weyl_n3(seed):
    def run():
        worst = 0.0
        for i in range(20):
            M = catalog.random_chart(seed, i)
            pts = catalog.interior_points(seed, i, M, 3)
            geo = ch.LocalGeometry(M, pts, 2)
            W = cf.weyl_from(geo.riemann, geo.ricci, geo.scalar, geo.g)
            worst = max(worst, float(np.max(np.sqrt(np.maximum(cf.full_norm_sq(W, geo.ginv), 0)))))
        return worst
    return [_Check("weyl-n3/corpus", "weyl-n3", "W = 0 identically in dimension 3", "analytic", 1e-8, run)]


def _cotton_identity_reports(seed):
    reps = []
    for i in range(5):
        M = catalog.random_chart(seed, i)
        for p in catalog.interior_points(seed, i, M, 5):
            reps.append(cf.cotton_identity_report(M, p))
    return reps


def _cotton_identities(seed):
    cache = {}

    def reports():
        if "r" not in cache:
            cache["r"] = _cotton_identity_reports(seed)
        return cache["r"]

    def ratio():
        M = catalog.random_chart(seed, 0)
        p = catalog.interior_points(seed, 0, M, 1)[0]
        a = cf.cotton_identity_report(M, p, h=0.02, richardson=False)
        b = cf.cotton_identity_report(M, p, h=0.01, richardson=False)
        return abs(a.m2 / b.m2 - 4.0)

    fam = "cotton-identities"
    return [
        _Check("cotton-identities/m2", fam, "C^ijk nabla_i R_jk = |C|^2 / 2 (relative to max(1, |C|^2))", "fd", 1e-4,
               lambda: max(r.m2 / r.m2_scale for r in reports())),
        _Check("cotton-identities/m1", fam, "nabla^i nabla^k C_kij = -C_j^ip R_ip (relative to max(1, |C||Ric|))", "fd",
               1e-3, lambda: max(r.m1 / r.m1_scale for r in reports())),
        _Check("cotton-identities/m2-step-order", fam, "m2 residual shrinks 4x when h halves (|ratio - 4|)", "fd", 0.5,
               ratio),
    ]


def _triple_divergence(seed):
    def run():
        worst = 0.0
        for i in range(2):
            M = catalog.random_chart(seed, i)
            for p in catalog.interior_points(seed, i, M, 1):
                res, scale = cf.triple_divergence_residual(M, p)
                worst = max(worst, res / scale)
        return worst
    return [_Check("triple-divergence/random", "triple-divergence",
                   "nabla_i nabla_j nabla_k C_kji = -nabla_i C_ijk R_jk - C_ijk nabla_i R_jk", "fd", 1e-2, run)]


def _fiber_norms(fiber, profile="2 + sin(r)"):
    wm = _model(profile, fiber)
    d = w = 0.0
    for r in RADII:
        d = max(d, float(np.linalg.norm(wp.radial_cao_chen(wm, r).comp)))
        w = max(w, float(np.linalg.norm(wp.warped_weyl(wm, r, blocks=("1a1b",))["1a1b"])))
    return d, w


def _einstein_fiber(seed):
    s4 = wp.SpaceForm(4, 1.0)
    s2s2 = lambda radii: wp.ExplicitChart(catalog.sphere_product(radii), (1.0, 0.3, 1.2, 0.4))
    fam = "einstein-fiber"
    out = []
    for label, fib in (("S4", lambda: s4), ("S2xS2", lambda: s2s2([1.0, 1.0]))):
        out.append(_Check(f"einstein-fiber/{label}", fam, "Einstein fiber: D_1ab = 0 and W_1a1b = 0",
                          "analytic", 1e-6, lambda fib=fib: max(_fiber_norms(fib()))))
    out.append(_Check("einstein-fiber/S2xS2(1/2)", fam, "non-Einstein fiber: D_1ab and W_1a1b both nonzero",
                      "analytic", 1e-3, lambda: min(_fiber_norms(s2s2([1.0, 0.5]))), relation=">="))
    return out


def _yamabe_solution(step=sol.DEFAULT_STEP, span=5.0):
    spec = sol.SolitonSpec(3, wp.SpaceForm(2, 1.0), sol.Yamabe(0.0), (1.0, 0.0, 1.0, 0.0), step=step, span=span)
    return sol.solve_profile(spec)


def _soliton_closure(seed):
    def steady():
        spec = sol.SolitonSpec(3, wp.SpaceForm(2, 1.0), sol.Yamabe(2.0), (0.0, 0.0, 1.0, 0.0))
        s = sol.solve_profile(spec)
        return max(float(np.max(np.abs(s.Fpp))), float(np.max(np.abs(s.Fp - 1))), float(np.max(np.abs(s.R - 2))))

    def chart_check():
        s = _yamabe_solution()
        idx = catalog.corpus_rng(seed, 30_000).integers(100, len(s.r) - 100, 10)
        return sol.chart_closure_residual(s, wp.SpaceForm(2, 1.0), idx)

    def order():
        ref = _yamabe_solution(step=0.0025, span=2.0)
        errs = []
        for h in (0.04, 0.02):
            s = _yamabe_solution(step=h, span=2.0)
            errs.append(abs(s.Fp[-1] - ref.Fp[-1]) + abs(s.Fpp[-1] - ref.Fpp[-1]))
        return abs(errs[0] / errs[1] - 16.0)

    fam = "soliton-closure"
    return [
        _Check("soliton-closure/yamabe-driver", fam, "F'' = R - rho along the solution", "analytic", 1e-8,
               lambda: sol.driver_residual(_yamabe_solution())),
        _Check("soliton-closure/chart-hessian", fam, "|nabla nabla F - phi g| on the induced warped chart",
               "analytic", 1e-5, chart_check),
        _Check("soliton-closure/product-steady-state", fam, "rho = Rbar, F' = 1: F'' = 0, R = 2", "analytic",
               1e-12, steady),
        _Check("soliton-closure/rk4-order", fam, "halving the step cuts the error 16x (|ratio - 16|)",
               "analytic", 2.0, order),
    ]


def _scalar_relation(seed):
    def corrupted():
        s = _yamabe_solution()
        expected = 0.1 * float(np.max(s.Fp**2))
        s.R = s.R + 0.1
        return abs(sol.scalar_relation_residual(s) - expected) / expected
    fam = "scalar-relation"
    return [
        _Check("scalar-relation/yamabe", fam, "|grad F|^2 R = Rbar - (n-1)(n-2) phi^2 - 2(n-1) F' phi'",
               "analytic", 1e-8, lambda: sol.scalar_relation_residual(_yamabe_solution())),
        _Check("scalar-relation/fault-injection", fam, "R + 0.1 is detected with residual 0.1 max F'^2 (relative)",
               "analytic", 1e-6, corrupted),
    ]


LEVELSET_CASES = (
    ("flat-gaussian", lambda: catalog.flat(3), "0.5*(x^2 + y^2 + z^2)", (2 / math.sqrt(3),) * 3),
    ("S3-cosine", lambda: catalog.sphere(3), "-cos(r)", (math.pi / 3, 1.0, 0.5)),
    ("H3-cosh", lambda: catalog.hyperbolic(3), "cosh(r)", (1.0, 1.0, 0.5)),
)


def _levelset(seed):
    out = []
    for label, make, F, p in LEVELSET_CASES:
        def run(make=make, F=F, p=p):
            rep = sol.levelset_report(make(), F, p)
            return max(rep.residual_B, rep.residual_H)
        out.append(_Check(f"levelset/{label}", "levelset", "B_ab = (phi/|grad F|) g_ab, H = (n-1) phi/|grad F|",
                          "analytic", 1e-6, run))

    def constancy():
        worst = 0.0
        for label, make, F, p in LEVELSET_CASES:
            M = make()
            base = sol.levelset_report(M, F, p)
            for q in sol.sample_level_set(M, F, p, k=6, seed=seed):
                rep = sol.levelset_report(M, F, q)
                worst = max(worst, abs(rep.grad_norm - base.grad_norm), abs(rep.phi - base.phi))
        return worst
    out.append(_Check("levelset/constant-on-level", "levelset", "|grad F| and phi constant on a level set",
                      "analytic", 1e-6, constancy))
    return out


BRANCH_FIXTURES = (
    ("sin(r)", (-0.3, math.pi + 0.3), "Compact"),
    ("r", (-1.0, 1.0), "HalfLine"),
    ("cosh(r)", (-2.0, 2.0), "FullLine"),
)


def _branch(seed):
    out = []
    for e, (a, b), want in BRANCH_FIXTURES:
        def run(e=e, a=a, b=b, want=want):
            rep = sol.classify_branch(sol.solution_from_profile(e, np.linspace(a, b, 2001)))
            return 0.0 if rep.branch == want else 1.0
        out.append(_Check(f"branch/{e}", "branch", f"F' = {e}: {want}", "analytic", 0.0, run))

    def oscillator():
        spec = sol.SolitonSpec(3, wp.SpaceForm(2, 0.0), sol.GenericConformal("-F"), (0.0, 0.0, 1.0, 0.0))
        s = sol.solve_profile(spec)
        if len(s.zeros) != 2 or sol.classify_branch(s).branch != "Compact":
            return 1.0
        return abs(s.zeros[1] - s.zeros[0] - math.pi)
    out.append(_Check("branch/oscillator-zeros", "branch", "F'' = -F: two zeros of F' spaced pi", "analytic",
                      1e-6, oscillator))
    return out


BUILDERS = {
    "calibration": _calibration,
    "riemann-symmetry": _riemann_symmetry,
    "warped-vs-chart": _warped_vs_chart,
    "warped-scalar-models": _warped_scalar_models,
    "conformal-traces": _conformal_traces,
    "weyl-n3": _weyl_n3,
    "cotton-identities": _cotton_identities,
    "triple-divergence": _triple_divergence,
    "einstein-fiber": _einstein_fiber,
    "soliton-closure": _soliton_closure,
    "scalar-relation": _scalar_relation,
    "levelset": _levelset,
    "branch": _branch,
}


def checks_for(selection="all", seed=DEFAULT_SEED):
    if selection in ("all", None):
        families = FAMILIES
    else:
        families = [selection] if isinstance(selection, str) else list(selection)
        unknown = [f for f in families if f not in FAMILIES]
        if unknown:
            raise ValueError(f"unknown check families {unknown}; choose from {list(FAMILIES)}")
    # manifest order, not request order
    return [c for fam in FAMILIES if fam in families for c in BUILDERS[fam](seed)]


def _tolerance(check, overrides):
    for key in (check.name, check.family, check.kind):
        if key in overrides:
            return float(overrides[key])
    return check.tolerance


def run_suite(selection="all", seed=DEFAULT_SEED, tolerances=None) -> VerificationReport:
    """Run the selected families. ``tolerances`` maps a check name, family or
    kind ("analytic"/"fd") to a tolerance; the most specific key wins."""
    overrides = dict(tolerances or {})
    report = VerificationReport(seed=seed, mode="analytic+fd")
    t_all = time.perf_counter()
    for c in checks_for(selection, seed):
        tol = _tolerance(c, overrides)
        t0 = time.perf_counter()
        err = ""
        try:
            res = float(c.run())
        except Exception as exc:  # a crashing check is a failed check
            res, err = math.nan, f"{type(exc).__name__}: {exc}"
        ok = (res <= tol) if c.relation == "<=" else (res >= tol)
        report.checks.append(CheckResult(c.name, c.family, c.anchor, c.kind, res, tol, c.relation,
                                         bool(ok), time.perf_counter() - t0, err))
    report.runtime = time.perf_counter() - t_all
    return report

"""Built-in charts: model spaces, products and the seeded random corpus.

Polar-type charts exclude a guard band of width ``POLE_GUARD`` around
coordinate singularities (r = 0, polar angles 0 and pi).
"""

from __future__ import annotations

import math

import numpy as np

from .chart import MetricChart
from .conventions import POLE_GUARD
from .expr import Expr, num, parse_expr, rename

G = POLE_GUARD
_ANGLES = ("omega", "chi", "psi", "theta", "phi")
_CART = ("x", "y", "z", "w", "u", "v")


def angle_names(m: int) -> tuple:
    """Coordinate names of the round m-sphere chart (last one is azimuthal)."""
    if not 1 <= m <= len(_ANGLES):
        raise ValueError("sphere dimension out of range")
    return _ANGLES[-m:]


def _diag(entries):
    n = len(entries)
    return tuple(tuple(entries[i] if i == j else num(0) for j in range(n)) for i in range(n))


def _sphere_factors(names):
    """Diagonal entries of the unit round metric in hyperspherical angles."""
    entries = [parse_expr("1")]
    factors = []
    for name in names[:-1]:
        factors.append(f"sin({name})^2")
        entries.append(parse_expr("*".join(factors)))
    return entries


def _angle_domain(m):
    return tuple((G, math.pi - G) for _ in range(m - 1)) + ((-math.pi, math.pi),)


def flat(n: int, half_width: float = 5.0) -> MetricChart:
    coords = _CART[:n]
    return MetricChart(coords, _diag([num(1)] * n), ((-half_width, half_width),) * n, name=f"flat{n}")


def polar2d() -> MetricChart:
    return MetricChart(("r", "theta"), _diag([num(1), parse_expr("r^2")]),
                       ((G, 10.0), (-math.pi, math.pi)), name="polar2")


def sphere(n: int, radius: float = 1.0, names=None, radial="r") -> MetricChart:
    """Round n-sphere of the given radius.

    For n >= 3 the first coordinate is the polar distance ``radial`` so that
    the chart reads dr^2 + sin(r)^2 g_{S^(n-1)}; pass ``radial=None`` (as
    fibers do) to use angle names throughout.
    """
    if names is None:
        names = ((radial,) + angle_names(n - 1)) if (radial and n >= 3) else angle_names(n)
    names = tuple(names)
    base = _sphere_factors(angle_names(n))
    mapping = dict(zip(angle_names(n), names))
    scale = radius * radius
    entries = [rename(e, mapping) for e in base]
    if scale != 1.0:
        entries = [parse_expr(f"{scale!r}*({e})") for e in entries]
    return MetricChart(names, _diag(entries), _angle_domain(n), name=f"S{n}({radius:g})")


def hyperbolic(n: int, curvature: float = -1.0, names=None) -> MetricChart:
    """Hyperbolic space in geodesic polar coordinates, dr^2 + (sinh(k r)/k)^2 g_S."""
    if curvature >= 0:
        raise ValueError("curvature must be negative")
    k = math.sqrt(-curvature)
    names = tuple(names) if names else ("r",) + angle_names(n - 1)
    rest = _sphere_factors(angle_names(n - 1))
    mapping = dict(zip(angle_names(n - 1), names[1:]))
    r = names[0]
    warp = f"sinh({r})^2" if k == 1.0 else f"(sinh({k!r}*{r})/{k!r})^2"
    entries = [num(1)] + [parse_expr(f"{warp}*({rename(e, mapping)})") for e in rest]
    domain = ((G, 3.0),) + _angle_domain(n - 1)
    return MetricChart(names, _diag(entries), domain, name=f"H{n}({curvature:g})")


def space_form(n: int, c: float, names=None) -> MetricChart:
    """Simply connected space form of constant curvature ``c`` (angles only for c > 0)."""
    if c > 0:
        return sphere(n, 1.0 / math.sqrt(c), names=names, radial=None)
    if c == 0:
        coords = tuple(names) if names else _CART[:n]
        return MetricChart(coords, _diag([num(1)] * n), ((-5.0, 5.0),) * n, name=f"E{n}")
    return hyperbolic(n, c, names=names)


def product(*charts: MetricChart, name="") -> MetricChart:
    """Riemannian product with block-diagonal metric."""
    coords = sum((c.coords for c in charts), ())
    n = len(coords)
    g = [[num(0)] * n for _ in range(n)]
    off = 0
    for c in charts:
        for i in range(c.dim):
            for j in range(c.dim):
                g[off + i][off + j] = c.g[i][j]
        off += c.dim
    domain = sum((c.domain for c in charts), ())
    return MetricChart(coords, tuple(map(tuple, g)), domain,
                       name=name or "x".join(c.name for c in charts))


def sphere_product(radii, prefix_names=True) -> MetricChart:
    """Product of round 2-spheres, e.g. ``sphere_product([1, 0.5])``."""
    parts = [sphere(2, a, names=(f"theta{k + 1}", f"phi{k + 1}")) for k, a in enumerate(radii)]
    return product(*parts)


def perturbed_sphere2(amplitude: float = 0.2, names=("theta", "phi")) -> MetricChart:
    """Round S^2 times a non-constant conformal factor; scalar curvature varies."""
    th, ph = names
    factor = f"(1 + {amplitude!r}*cos({th}))"
    entries = [parse_expr(factor), parse_expr(f"{factor}*sin({th})^2")]
    return MetricChart(tuple(names), _diag(entries), _angle_domain(2), name="S2~")


# ---------------------------------------------------------------------------
# Random corpus
# ---------------------------------------------------------------------------

def corpus_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, index); independent of call order."""
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), int(index)]))


def _monomial(rng, coords, min_deg, max_deg):
    deg = int(rng.integers(min_deg, max_deg + 1))
    picks = rng.integers(0, len(coords), size=deg)
    return "*".join(coords[p] for p in sorted(picks))


def random_chart(seed: int, index: int, n: int = 3, amplitude: float = 0.05,
                 terms: int = 4, mode: str = "analytic") -> MetricChart:
    """Flat metric on [-1, 1]^n plus a random polynomial perturbation.

    Each entry gets ``terms`` monomials of degree 1..4 with coefficients
    uniform in [-amplitude, amplitude]. Gershgorin keeps the metric positive
    definite on the box while ``n * terms * amplitude < 1``.
    """
    if n * terms * amplitude >= 1:
        raise ValueError("perturbation too large to guarantee positive-definiteness")
    rng = corpus_rng(seed, index)
    coords = _CART[:n]
    g = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            parts = ["1"] if i == j else []
            for _ in range(terms):
                a = float(rng.uniform(-amplitude, amplitude))
                parts.append(f"{a!r}*{_monomial(rng, coords, 1, 4)}")
            e = parse_expr(" + ".join(parts))
            g[i][j] = g[j][i] = e
    return MetricChart(coords, tuple(map(tuple, g)), ((-1.0, 1.0),) * n, mode=mode,
                       name=f"random{n}[{seed}:{index}]")


def conformally_flat_chart(seed: int, index: int, n: int = 3, amplitude: float = 0.1) -> MetricChart:
    """g = exp(2u) delta with u a random quadratic polynomial."""
    rng = corpus_rng(seed, 10_000 + index)
    coords = _CART[:n]
    parts = []
    for _ in range(4):
        a = float(rng.uniform(-amplitude, amplitude))
        parts.append(f"{a!r}*{_monomial(rng, coords, 1, 2)}")
    u = " + ".join(parts)
    factor = parse_expr(f"exp(2*({u}))")
    return MetricChart(coords, _diag([factor] * n), ((-1.0, 1.0),) * n, name=f"conf{n}[{seed}:{index}]")


def interior_points(seed: int, index: int, chart: MetricChart, k: int = 5, shrink: float = 0.5):
    """k points drawn from the central part of the chart's domain."""
    rng = corpus_rng(seed, 20_000 + index)
    lo = np.array([d[0] for d in chart.domain])
    hi = np.array([d[1] for d in chart.domain])
    mid, half = (lo + hi) / 2, (hi - lo) / 2 * shrink
    return mid + half * rng.uniform(-1, 1, size=(k, chart.dim))

"""Scalar expression language with exact derivatives up to third order.

Expressions are parsed with a Pratt parser into an immutable tree. Evaluation
propagates truncated multivariate Taylor coefficients forward through the
tree, so partial derivatives are exact up to roundoff. All evaluation is
batched: variable values may be arrays of any common shape.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | IDENT | IDENT '(' args ')' | '(' expr ')'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ArityError, DomainError, ExprSyntaxError

MAX_ORDER = 3

FUNCTIONS = {
    "sin": 1, "cos": 1, "tan": 1,
    "sinh": 1, "cosh": 1, "tanh": 1,
    "exp": 1, "log": 1, "sqrt": 1,
    "pow": 2,
}
CONSTANTS = {"pi": math.pi, "e": math.e}


# ---------------------------------------------------------------------------
# Tree
# ---------------------------------------------------------------------------

class Expr:
    """Base class for expression nodes."""

    __slots__ = ()

    @property
    def free_vars(self) -> frozenset:
        return frozenset(_free_vars(self))

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Const(Expr):
    name: str


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    name: str
    args: tuple


@dataclass(frozen=True, eq=False)
class Func1D(Expr):
    """A univariate function supplied as code, e.g. a spline through samples.

    ``fn(x, k)`` must return the k-th derivative at ``x`` for k = 0..3.
    Not expressible in text; printing yields ``label(arg)``.
    """

    label: str
    fn: Callable
    arg: Expr


def _free_vars(e):
    if isinstance(e, Var):
        yield e.name
    elif isinstance(e, Neg):
        yield from _free_vars(e.arg)
    elif isinstance(e, BinOp):
        yield from _free_vars(e.left)
        yield from _free_vars(e.right)
    elif isinstance(e, Call):
        for a in e.args:
            yield from _free_vars(a)
    elif isinstance(e, Func1D):
        yield from _free_vars(e.arg)


# small constructors used when assembling metrics programmatically

def num(x) -> Num:
    return Num(float(x))


def add(a, b):
    return BinOp("+", a, b)


def mul(a, b):
    return BinOp("*", a, b)


def power(a, k):
    return BinOp("^", a, num(k))


def is_zero(e) -> bool:
    return isinstance(e, Num) and e.value == 0.0


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)

_BINARY_BP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_UNARY_BP = 25


@dataclass
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(src: str):
    toks = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.lastgroup is None:
            start = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {src[start]!r}", _byte(src, start))
        toks.append(_Tok(m.lastgroup, m.group(m.lastgroup), _byte(src, m.start(m.lastgroup))))
        pos = m.end()
    toks.append(_Tok("end", "", _byte(src, len(src))))
    return toks


def _byte(src, i):
    return len(src[:i].encode("utf-8"))


class _Parser:
    def __init__(self, src):
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.next()
        if t.text != text:
            what = "end of input" if t.kind == "end" else repr(t.text)
            raise ExprSyntaxError(f"expected {text!r}, got {what}", t.offset)
        return t

    def parse(self):
        e = self.expression(0)
        t = self.peek()
        if t.kind != "end":
            raise ExprSyntaxError(f"unexpected {t.text!r}", t.offset)
        return e

    def expression(self, rbp):
        left = self.prefix()
        while True:
            t = self.peek()
            if t.kind != "op" or t.text not in _BINARY_BP:
                break
            lbp = _BINARY_BP[t.text]
            if lbp <= rbp:
                break
            self.next()
            if t.text == "^":
                # right associative; the exponent may carry a unary minus
                right = self.expression(lbp - 1)
            else:
                right = self.expression(lbp)
            left = BinOp(t.text, left, right)
        return left

    def prefix(self):
        t = self.next()
        if t.kind == "num":
            return Num(float(t.text))
        if t.kind == "ident":
            if self.peek().text == "(":
                return self.call(t)
            if t.text in CONSTANTS:
                return Const(t.text)
            if t.text in FUNCTIONS:
                raise ExprSyntaxError(f"function {t.text!r} used without arguments", t.offset)
            return Var(t.text)
        if t.text == "-":
            return Neg(self.expression(_UNARY_BP))
        if t.text == "(":
            e = self.expression(0)
            self.expect(")")
            return e
        what = "end of input" if t.kind == "end" else repr(t.text)
        raise ExprSyntaxError(f"unexpected {what}", t.offset)

    def call(self, name_tok):
        name = name_tok.text
        if name not in FUNCTIONS:
            raise ExprSyntaxError(f"unknown function {name!r}", name_tok.offset)
        self.expect("(")
        args = []
        if self.peek().text != ")":
            args.append(self.expression(0))
            while self.peek().text == ",":
                self.next()
                args.append(self.expression(0))
        self.expect(")")
        if len(args) != FUNCTIONS[name]:
            raise ArityError(f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}")
        return Call(name, tuple(args))


def parse_expr(src: str) -> Expr:
    """Parse expression text. Unknown identifiers become free variables."""
    if not isinstance(src, str) or not src.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(src).parse()


def as_expr(e) -> Expr:
    if isinstance(e, Expr):
        return e
    if isinstance(e, (int, float)):
        return num(e)
    return parse_expr(e)


def to_text(e: Expr) -> str:
    """Fully parenthesised text; re-parsing it yields an equal tree."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, (Const, Var)):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_text(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(to_text(a) for a in e.args)})"
    if isinstance(e, Func1D):
        return f"{e.label}({to_text(e.arg)})"
    raise TypeError(e)


# ---------------------------------------------------------------------------
# Truncated Taylor arithmetic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Basis:
    nvars: int
    order: int
    monos: tuple          # multi-indices, graded
    mul_i: np.ndarray
    mul_j: np.ndarray
    scatter: np.ndarray   # (M, P) 0/1 matrix summing products into targets
    unit: tuple           # index of e_k for each variable

    @property
    def size(self):
        return len(self.monos)


@lru_cache(maxsize=None)
def _basis(nvars: int, order: int) -> _Basis:
    monos = []
    for deg in range(order + 1):
        for combo in combinations_with_replacement(range(nvars), deg):
            alpha = [0] * nvars
            for v in combo:
                alpha[v] += 1
            monos.append(tuple(alpha))
    index = {m: k for k, m in enumerate(monos)}
    ii, jj, kk = [], [], []
    for a, ma in enumerate(monos):
        for b, mb in enumerate(monos):
            s = tuple(x + y for x, y in zip(ma, mb))
            if sum(s) <= order:
                ii.append(a)
                jj.append(b)
                kk.append(index[s])
    scatter = np.zeros((len(monos), len(ii)))
    scatter[kk, np.arange(len(ii))] = 1.0
    unit = tuple(index[tuple(int(i == k) for i in range(nvars))] for k in range(nvars)) if order else ()
    return _Basis(nvars, order, tuple(monos), np.array(ii), np.array(jj), scatter, unit)


class _Series:
    """Truncated Taylor coefficients, shape (M, *batch)."""

    __slots__ = ("c", "basis", "const")

    def __init__(self, c, basis, const):
        self.c = c
        self.basis = basis
        self.const = const

    @property
    def value(self):
        return self.c[0]

    def _new(self, c, const):
        return _Series(c, self.basis, const)

    def scale(self, s):
        return self._new(self.c * s, self.const)

    def add(self, other, sign=1.0):
        return self._new(self.c + sign * other.c, self.const and other.const)

    def mul(self, other):
        if self.const:
            return other.scale(self.c[0])
        if other.const:
            return self.scale(other.c[0])
        b = self.basis
        prod = self.c[b.mul_i] * other.c[b.mul_j]
        shape = prod.shape
        out = b.scatter @ prod.reshape(shape[0], -1)
        return self._new(out.reshape((b.size,) + shape[1:]), False)

    def compose(self, derivs):
        """f(self) given [f(a0), f'(a0), f''(a0), f'''(a0)] at the constant term."""
        if self.const or self.basis.order == 0:
            c = np.zeros_like(self.c)
            c[0] = derivs[0]
            return self._new(c, self.const)
        v = self._new(self.c.copy(), False)
        v.c[0] = 0.0
        order = self.basis.order
        fact = (1.0, 1.0, 2.0, 6.0)
        # Horner in the nilpotent part
        acc = self._const_like(derivs[order] / fact[order])
        for k in range(order - 1, -1, -1):
            acc = acc.mul(v)
            acc.c[0] = acc.c[0] + derivs[k] / fact[k]
        acc.const = False
        return acc

    def _const_like(self, value):
        c = np.zeros_like(self.c)
        c[0] = value
        return self._new(c, True)


def _const_series(value, basis, shape):
    c = np.zeros((basis.size,) + shape)
    c[0] = value
    return _Series(c, basis, True)


def _var_series(value, k, basis, shape):
    c = np.zeros((basis.size,) + shape)
    c[0] = value
    if basis.order:
        c[basis.unit[k]] = 1.0
    return _Series(c, basis, False)


def _check(cond, msg):
    if np.any(cond):
        raise DomainError(msg)


def _recip(s):
    a = s.value
    _check(a == 0.0, "division by zero")
    return s.compose([1 / a, -1 / a**2, 2 / a**3, -6 / a**4])


def _ipow(s, k):
    if k == 0:
        return _const_series(1.0, s.basis, s.c.shape[1:])
    if k < 0:
        return _recip(_ipow(s, -k))
    out = None
    base = s
    while k:
        if k & 1:
            out = base if out is None else out.mul(base)
        k >>= 1
        if k:
            base = base.mul(base)
    return out


def _rpow(s, p):
    a = s.value
    _check(a <= 0.0, "non-integer power of non-positive base")
    return s.compose([a**p, p * a ** (p - 1), p * (p - 1) * a ** (p - 2),
                      p * (p - 1) * (p - 2) * a ** (p - 3)])


def _apply(name, s):
    a = s.value
    if name == "sin":
        sa, ca = np.sin(a), np.cos(a)
        return s.compose([sa, ca, -sa, -ca])
    if name == "cos":
        sa, ca = np.sin(a), np.cos(a)
        return s.compose([ca, -sa, -ca, sa])
    if name == "tan":
        ca = np.cos(a)
        _check(np.abs(ca) < 1e-300, "tan at a pole")
        t = np.tan(a)
        sec2 = 1 + t * t
        return s.compose([t, sec2, 2 * t * sec2, 2 * sec2 * (1 + 3 * t * t)])
    if name == "sinh":
        sh, ch = np.sinh(a), np.cosh(a)
        return s.compose([sh, ch, sh, ch])
    if name == "cosh":
        sh, ch = np.sinh(a), np.cosh(a)
        return s.compose([ch, sh, ch, sh])
    if name == "tanh":
        t = np.tanh(a)
        d1 = 1 - t * t
        return s.compose([t, d1, -2 * t * d1, d1 * (6 * t * t - 2)])
    if name == "exp":
        ex = np.exp(a)
        return s.compose([ex, ex, ex, ex])
    if name == "log":
        _check(a <= 0.0, "log of non-positive value")
        return s.compose([np.log(a), 1 / a, -1 / a**2, 2 / a**3])
    if name == "sqrt":
        _check(a < 0.0, "sqrt of negative value")
        if s.basis.order and not s.const:
            _check(a == 0.0, "sqrt is not differentiable at 0")
        r = np.sqrt(a)
        with np.errstate(divide="ignore", invalid="ignore"):
            return s.compose([r, 0.5 / r, -0.25 / (a * r), 0.375 / (a * a * r)])
    raise ValueError(name)


def _integer_exponent(s):
    if not s.const:
        return None
    v = np.asarray(s.value)
    first = v.flat[0]
    if float(first).is_integer() and np.all(v == first) and abs(first) < 2**31:
        return int(first)
    return None


def _pow(base, expo):
    k = _integer_exponent(expo)
    if k is not None:
        return _ipow(base, k)
    if expo.const:
        p = np.asarray(expo.value)
        if p.ndim == 0 or np.all(p == p.flat[0]):
            return _rpow(base, float(p.flat[0]))
    _check(base.value <= 0.0, "non-integer power of non-positive base")
    return _apply("exp", expo.mul(_apply("log", base)))


def _eval(e, env, basis, shape):
    if isinstance(e, Num):
        return _const_series(e.value, basis, shape)
    if isinstance(e, Const):
        return _const_series(CONSTANTS[e.name], basis, shape)
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise DomainError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Neg):
        return _eval(e.arg, env, basis, shape).scale(-1.0)
    if isinstance(e, BinOp):
        a = _eval(e.left, env, basis, shape)
        b = _eval(e.right, env, basis, shape)
        if e.op == "+":
            return a.add(b)
        if e.op == "-":
            return a.add(b, -1.0)
        if e.op == "*":
            return a.mul(b)
        if e.op == "/":
            if b.const:
                _check(b.value == 0.0, "division by zero")
                return a.scale(1.0 / b.value)
            return a.mul(_recip(b))
        if e.op == "^":
            return _pow(a, b)
        raise ValueError(e.op)
    if isinstance(e, Call):
        args = [_eval(a, env, basis, shape) for a in e.args]
        if e.name == "pow":
            return _pow(*args)
        return _apply(e.name, args[0])
    if isinstance(e, Func1D):
        s = _eval(e.arg, env, basis, shape)
        a = s.value
        return s.compose([np.asarray(e.fn(a, k), dtype=float) for k in range(4)])
    raise TypeError(e)


def taylor(e: Expr, values: Mapping[str, object], variables: Sequence[str], order: int):
    """Evaluate ``e`` to truncated Taylor coefficients in ``variables``.

    Returns an array of shape (M, *batch) in the graded monomial order of
    the internal basis; use :func:`jet_arrays` to obtain dense partials.
    Variables not listed in ``variables`` are treated as constants.
    """
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in 0..{MAX_ORDER}")
    arrays = {k: np.asarray(v, dtype=float) for k, v in values.items()}
    shape = np.broadcast_shapes(*(a.shape for a in arrays.values())) if arrays else ()
    basis = _basis(len(variables), order)
    pos = {name: k for k, name in enumerate(variables)}
    env = {}
    for name, a in arrays.items():
        a = np.broadcast_to(a, shape)
        if name in pos:
            env[name] = _var_series(a, pos[name], basis, shape)
        else:
            env[name] = _const_series(a, basis, shape)
    with np.errstate(over="ignore"):
        out = _eval(e, env, basis, shape)
    return np.broadcast_to(out.c, (basis.size,) + shape)


@lru_cache(maxsize=None)
def _partial_maps(nvars, order):
    """For each derivative order, index/factor arrays over the dense grid."""
    basis = _basis(nvars, order)
    index = {m: k for k, m in enumerate(basis.monos)}
    maps = []
    for k in range(1, order + 1):
        grid = np.indices((nvars,) * k).reshape(k, -1).T
        idx, fac = [], []
        for tup in grid:
            alpha = [0] * nvars
            for v in tup:
                alpha[v] += 1
            idx.append(index[tuple(alpha)])
            fac.append(math.prod(math.factorial(a) for a in alpha))
        maps.append((np.array(idx), np.array(fac, dtype=float)))
    return maps


def jet_arrays(coeffs, nvars, order):
    """Split Taylor coefficients into [value, d1, d2, d3] dense arrays.

    Derivative axes are trailing: d2 has shape (*batch, n, n).
    """
    out = [np.asarray(coeffs[0])]
    batch = coeffs.shape[1:]
    for k, (idx, fac) in enumerate(_partial_maps(nvars, order), start=1):
        d = coeffs[idx] * fac.reshape((-1,) + (1,) * len(batch))
        d = np.moveaxis(d, 0, -1).reshape(batch + (nvars,) * k)
        out.append(d)
    return out


@dataclass(frozen=True)
class Jet:
    """Value and dense symmetric partial-derivative arrays at one point."""

    value: float
    partials: tuple
    variables: tuple

    @property
    def order(self):
        return len(self.partials)

    def derivative(self, *names):
        """Partial derivative by variable names, e.g. ``jet.derivative('x', 'y')``."""
        if not names:
            return self.value
        idx = tuple(self.variables.index(n) for n in names)
        return float(self.partials[len(names) - 1][idx])

    def truncate(self, order):
        return Jet(self.value, self.partials[:order], self.variables)

    def as_tuple(self):
        """Univariate convenience: (f, f', f'', f''') up to the jet order."""
        if len(self.variables) != 1:
            raise ValueError("as_tuple needs a single variable")
        return (self.value,) + tuple(float(p.reshape(-1)[0]) for p in self.partials)


def eval_jet(e, point: Mapping[str, float], order: int = 0, variables=None) -> Jet:
    """Value and partial derivatives up to ``order`` of ``e`` at ``point``.

    Partials are taken with respect to ``variables`` (default: the keys of
    ``point`` in insertion order).
    """
    e = as_expr(e)
    missing = e.free_vars - set(point)
    if missing:
        raise DomainError(f"unbound variables: {sorted(missing)}")
    variables = tuple(point) if variables is None else tuple(variables)
    coeffs = taylor(e, point, variables, order)
    parts = jet_arrays(coeffs, len(variables), order)
    return Jet(float(parts[0]), tuple(np.array(p) for p in parts[1:]), variables)


def evaluate(e, point: Mapping[str, object]):
    """Plain (order 0) evaluation; accepts scalar or array values."""
    e = as_expr(e)
    v = taylor(e, point, (), 0)[0]
    return float(v) if np.ndim(v) == 0 else np.array(v)


def compile_expr(e, args: Sequence[str]) -> Callable:
    """Compile to a plain-float Python function of ``args`` (fast scalar path)."""
    e = as_expr(e)
    src = _py(e)
    code = f"lambda {', '.join(args)}: {src}" if args else f"lambda: {src}"
    fn = eval(code, {"_m": math, "_F": _f1d_registry(e)})  # noqa: S307 - source built from the tree

    def wrapped(*a):
        try:
            return fn(*a)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise DomainError(str(exc)) from None

    return wrapped


def _f1d_registry(e):
    reg = {}

    def walk(n):
        if isinstance(n, Func1D):
            reg[id(n)] = n.fn
            walk(n.arg)
        elif isinstance(n, Neg):
            walk(n.arg)
        elif isinstance(n, BinOp):
            walk(n.left)
            walk(n.right)
        elif isinstance(n, Call):
            for a in n.args:
                walk(a)

    walk(e)
    return reg


def _py(e):
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Const):
        return repr(CONSTANTS[e.name])
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{_py(e.arg)})"
    if isinstance(e, BinOp):
        if e.op == "^":
            return f"_m.pow({_py(e.left)}, {_py(e.right)})" if not (
                isinstance(e.right, Num) and e.right.value.is_integer()
            ) else f"({_py(e.left)} ** {int(e.right.value)})"
        return f"({_py(e.left)} {e.op} {_py(e.right)})"
    if isinstance(e, Call):
        if e.name == "pow":
            return f"_m.pow({_py(e.args[0])}, {_py(e.args[1])})"
        return f"_m.{e.name}({_py(e.args[0])})"
    if isinstance(e, Func1D):
        return f"float(_F[{id(e)}]({_py(e.arg)}, 0))"
    raise TypeError(e)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace free variables by expressions."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Call):
        return Call(e.name, tuple(substitute(a, mapping) for a in e.args))
    if isinstance(e, Func1D):
        return Func1D(e.label, e.fn, substitute(e.arg, mapping))
    return e


def rename(e: Expr, names: Mapping[str, str]) -> Expr:
    return substitute(e, {old: Var(new) for old, new in names.items()})

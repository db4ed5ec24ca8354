"""Command-line front end: ``solitonlab {construct,tensors,classify,levelset,verify}``.

Exit codes: 0 success, 1 computation error (JSON on stderr), 2 usage error,
3 verification failures. Floats are printed with 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import conformal, soliton, verify
from .chart import MetricChart
from .errors import SolitonLabError
from .warped import Einstein, SpaceForm

SEED_ENV = "SOLITONLAB_SEED"


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return "%.17g" % x


def dumps(obj, indent=2, _level=0) -> str:
    """JSON text with every float written as %.17g."""
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent, _level + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# Argument types
# ---------------------------------------------------------------------------

def positive_float(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not x > 0 or not math.isfinite(x):
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return x


def floats(text):
    try:
        return tuple(float(x) for x in str(text).split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}")


def fiber_arg(text):
    kind, _, val = str(text).partition(":")
    if kind not in ("spaceform", "einstein") or not val:
        raise argparse.ArgumentTypeError("fiber must be spaceform:C or einstein:RBAR")
    try:
        return kind, float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad fiber value {val!r}")


def driver_arg(text):
    kind, _, val = str(text).partition(":")
    if kind == "yamabe":
        try:
            return soliton.Yamabe(float(val))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad rho {val!r}")
    if kind == "phi" and val:
        return soliton.GenericConformal(val)
    raise argparse.ArgumentTypeError("driver must be yamabe:RHO or phi:EXPR")


def split_top_level(text, sep=","):
    """Split on ``sep`` outside parentheses, so expressions may contain commas."""
    parts, depth, cur = [], 0, []
    for ch in text:
        depth += (ch == "(") - (ch == ")")
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def report_arg(text):
    kinds, F = [], None
    for item in split_top_level(text):
        name, _, rest = item.partition(":")
        if name not in conformal.REPORT_KINDS:
            raise argparse.ArgumentTypeError(f"unknown report {name!r}; choose from {conformal.REPORT_KINDS}")
        if rest:
            if not rest.startswith("F="):
                raise argparse.ArgumentTypeError(f"expected {name}:F=EXPR")
            F = rest[2:]
        kinds.append(name)
    return tuple(kinds), F


def families_arg(text):
    fams = split_top_level(text)
    unknown = [f for f in fams if f not in verify.FAMILIES]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown families {unknown}; choose from {', '.join(verify.FAMILIES)}")
    return fams


def tol_arg(text):
    key, _, val = str(text).partition("=")
    if not key or not val:
        raise argparse.ArgumentTypeError("tolerance override must be KEY=VALUE")
    return key, positive_float(val)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option defaults (flags override it)")

    p = argparse.ArgumentParser(prog="solitonlab", description="Gradient conformal soliton laboratory.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("construct", parents=[common], help="integrate a soliton profile")
    c.add_argument("--dim", type=int, help="manifold dimension n >= 3")
    c.add_argument("--fiber", type=fiber_arg, help="spaceform:C or einstein:RBAR")
    c.add_argument("--driver", type=driver_arg, help="yamabe:RHO or phi:EXPR in r, F, Fp, R")
    c.add_argument("--init", type=floats, help="R0,F0,FP0,FPP0")
    c.add_argument("--step", type=positive_float, default=soliton.DEFAULT_STEP)
    c.add_argument("--span", type=positive_float, default=soliton.DEFAULT_SPAN)
    c.add_argument("--zero-tol", type=positive_float, default=soliton.DEFAULT_ZERO_TOL)
    c.add_argument("-o", "--output", help="output file; .json gives JSON, anything else CSV")
    c.add_argument("--format", choices=("csv", "json"))

    t = sub.add_parser("tensors", parents=[common], help="conformal tensor report at a point")
    t.add_argument("--metric", help="metric-spec JSON file")
    t.add_argument("--point", type=floats)
    t.add_argument("--report", type=report_arg, default=report_arg("schouten,cotton,weyl"),
                   help="comma list of schouten,cotton,weyl,caochen[:F=EXPR],ricci,riemann")
    t.add_argument("-o", "--output")

    k = sub.add_parser("classify", parents=[common], help="branch of a profile")
    k.add_argument("--profile", help="profile JSON (from construct) or {profile: {expr}, interval}")
    k.add_argument("--samples", type=int, default=2001, help="grid size for expression profiles")
    k.add_argument("-o", "--output")

    ls = sub.add_parser("levelset", parents=[common], help="level-set geometry of F at a point")
    ls.add_argument("--metric")
    ls.add_argument("--F", dest="F")
    ls.add_argument("--point", type=floats)
    ls.add_argument("-o", "--output")

    v = sub.add_parser("verify", parents=[common], help="run the property suite")
    v.add_argument("--only", type=families_arg, help="comma list of check families")
    v.add_argument("--seed", type=int)
    v.add_argument("--tol", type=tol_arg, action="append", default=[],
                   help="KEY=VALUE tolerance override; KEY is a check name, family, or analytic/fd")
    v.add_argument("--format", choices=("table", "json"), default="table")
    v.add_argument("-o", "--output")
    return p


REQUIRED = {"construct": ("dim", "fiber", "driver", "init"), "tensors": ("metric", "point"),
            "classify": ("profile",), "levelset": ("metric", "F", "point")}

# config-file values are raw JSON; route them through the same converters as flags
CONVERTERS = {"fiber": fiber_arg, "driver": driver_arg, "init": floats, "point": floats,
              "report": report_arg, "step": positive_float, "span": positive_float,
              "zero_tol": positive_float, "only": lambda s: families_arg(s)}


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = _load_json(args.config)
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config: {exc}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        given = {a.dest for a in sub._actions for opt in a.option_strings
                 for tok in argv if tok == opt or tok.startswith(opt + "=")}
        for key, val in cfg.items():
            dest = key.replace("-", "_")
            if dest not in known or dest in ("config", "help"):
                parser.error(f"unknown config key {key!r}")
            if dest in given:
                continue
            if dest in CONVERTERS:
                text = ",".join(map(str, val)) if isinstance(val, list) else str(val)
                try:
                    val = CONVERTERS[dest](text)
                except argparse.ArgumentTypeError as exc:
                    parser.error(f"config {key}: {exc}")
            setattr(args, dest, val)
    missing = [f"--{m.replace('_', '-')}" for m in REQUIRED.get(args.command, ()) if getattr(args, m) is None]
    if missing:
        parser.error(f"{args.command}: missing required option(s) {', '.join(missing)}")
    return args


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_construct(args):
    kind, val = args.fiber
    m = args.dim - 1
    fiber = SpaceForm(m, val) if kind == "spaceform" else Einstein(m, val)
    spec = soliton.SolitonSpec(args.dim, fiber, args.driver, args.init, args.step, args.span, args.zero_tol)
    sol = soliton.solve_profile(spec)
    branch = soliton.classify_branch(sol)
    fmt = args.format or ("json" if (args.output or "").endswith(".json") else "csv")
    _emit(dumps(sol.to_json(branch)) if fmt == "json" else sol.to_csv(), args.output)
    return 0


def _chart(path):
    return MetricChart.from_json(_load_json(path))


def cmd_tensors(args):
    M = _chart(args.metric)
    kinds, F = args.report
    rep = conformal.conformal_report(M, args.point, kinds, F)
    _emit(dumps(rep.to_json()), args.output)
    return 0


def cmd_classify(args):
    d = _load_json(args.profile)
    if "columns" in d:
        sol = soliton.ProfileSolution.from_json(d)
    elif "profile" in d and "expr" in d["profile"]:
        lo, hi = d.get("interval") or d["profile"]["interval"]
        sol = soliton.solution_from_profile(d["profile"]["expr"], np.linspace(lo, hi, args.samples),
                                            n=int(d.get("n", 3)))
    else:
        raise ValueError("profile JSON needs 'columns' (construct output) or 'profile.expr' with an interval")
    _emit(dumps(soliton.classify_branch(sol).to_json()), args.output)
    return 0


def cmd_levelset(args):
    M = _chart(args.metric)
    rep = soliton.levelset_report(M, args.F, args.point)
    _emit(dumps(rep.to_json()), args.output)
    return 0


def cmd_verify(args):
    seed = args.seed
    if seed is None:
        env = os.environ.get(SEED_ENV)
        seed = int(env) if env else verify.DEFAULT_SEED
    report = verify.run_suite(args.only or "all", seed, dict(args.tol))
    _emit(dumps(report.to_json()) if args.format == "json" else report.table(), args.output)
    return 0 if report.passed else 3


COMMANDS = {"construct": cmd_construct, "tensors": cmd_tensors, "classify": cmd_classify,
            "levelset": cmd_levelset, "verify": cmd_verify}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except SolitonLabError as exc:
        err = exc.to_dict()
    except (ValueError, OSError, KeyError, TypeError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(dumps(err) + "\n")
    return 1


if __name__ == "__main__":
    sys.exit(main())

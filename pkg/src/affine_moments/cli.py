"""Command-line front end.

Exit codes: 0 success, 1 usage or unreadable input, 2 parameters fail
validation, 3 domain errors (including unmet hypotheses), 4 numerical
non-convergence.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys

import numpy as np

from . import spec_io
from .errors import ConvergenceError, DomainError, StructuralError, UnsupportedError
from .levy import build_family
from .mc_oracle import compare
from .pricing import (ShortRateSpec, bond_price, european_call, european_put, fourier_price,
                      martingale_check, asset_explosion_time)
from .riccati import explosion_time, solve_complex, solve_extended
from .state_space import validate
from .transform import char_function, exp_moment

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_DOMAIN, EXIT_NUMERIC = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_number(tok: str):
    tok = tok.strip()
    if tok.endswith("i"):
        return complex(tok[:-1] + "j")
    return float(tok)


def parse_vector(text):
    if text is None:
        return None
    vals = [parse_number(t) for t in text.split(",") if t.strip()]
    if any(isinstance(v, complex) for v in vals):
        return np.array(vals, dtype=complex)
    return np.array(vals, dtype=float)


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    s = format(v, ".17g")
    return s if any(c in s for c in ".e") else s + ".0"


def dumps(obj) -> str:
    """JSON with every float written to 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, (complex, np.complexfloating)):
        return dumps([obj.real, obj.imag])
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    return fmt(obj)


def flatten(obj, prefix=""):
    """``(key, value)`` rows of a nested document, for CSV output."""
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, (list, tuple, np.ndarray)):
        for k, v in enumerate(obj):
            yield from flatten(v, f"{prefix}[{k}]")
    elif isinstance(obj, (complex, np.complexfloating)):
        yield from flatten([obj.real, obj.imag], prefix)
    else:
        yield prefix, obj


def to_csv(doc) -> str:
    buf = io.StringIO()
    buf.write("key,value\n")
    for k, v in flatten(doc):
        val = v if isinstance(v, str) else ("" if v is None else fmt(v))
        if isinstance(v, str) and ("," in v or '"' in v):
            val = '"' + v.replace('"', '""') + '"'
        buf.write(f"{k},{val}\n")
    return buf.getvalue()


def _scenario(spec, args, key):
    val = getattr(args, key, None)
    if val is not None:
        return val
    sc = spec.scenarios.get(args.scenario, {}) if args.scenario else {}
    if key in sc:
        raw = sc[key]
        return ",".join(str(v) for v in np.ravel(raw)) if isinstance(raw, list) else raw
    return None


def _vec(spec, args, key, required=True):
    v = _scenario(spec, args, key)
    if v is None:
        if required:
            raise UsageError(f"--{key} is required")
        return None
    return parse_vector(str(v))


def _num(spec, args, key, default=None):
    v = _scenario(spec, args, key)
    if v is None:
        if default is None:
            raise UsageError(f"--{key} is required")
        return default
    return float(v)


def _rate(spec, args, family):
    if args.l is not None or args.lam is not None:
        lam = parse_vector(args.lam) if args.lam else np.zeros(family.size)
        return ShortRateSpec(float(args.l or 0.0), tuple(lam))
    if spec.rate is not None:
        return spec.rate
    return ShortRateSpec(0.0, tuple(np.zeros(family.size)))


def _theta(spec, args):
    if args.theta is not None:
        return parse_vector(args.theta)
    if spec.theta is not None:
        return spec.theta
    raise UsageError("asset direction needed: --theta or an 'asset' block in the model")


def _check(params):
    rep = validate(params)
    if not rep.passed:
        raise StructuralError("parameters fail admissibility: " + ", ".join(rep.identifiers))


# -- subcommands -----------------------------------------------------------------


def cmd_validate(spec, args):
    rep = validate(spec.params)
    return rep.to_json(), (EXIT_OK if rep.passed else EXIT_INVALID)


def cmd_solve(spec, args):
    _check(spec.params)
    family = build_family(spec.params)
    T = _num(spec, args, "T")
    if args.u is not None:
        traj = solve_complex(family, parse_vector(args.u).astype(complex).reshape(family.state_shape), T)
    else:
        traj = solve_extended(family, _vec(spec, args, "y").reshape(family.state_shape), T)
    if args.format == "csv":
        return traj.to_csv(), EXIT_OK
    doc = traj.to_json()
    doc["times"] = traj.times
    doc["p_path"] = traj.p
    doc["q_path"] = traj.q.reshape(len(traj.times), -1)
    return doc, EXIT_OK


def cmd_moment(spec, args):
    _check(spec.params)
    res = exp_moment(spec.params, _vec(spec, args, "x"), _vec(spec, args, "y"), _num(spec, args, "T"))
    return res.to_json(), EXIT_OK


def cmd_cf(spec, args):
    _check(spec.params)
    u = _vec(spec, args, "u").astype(complex)
    res = char_function(spec.params, _vec(spec, args, "x"), u, _num(spec, args, "T"))
    return res.to_json(), EXIT_OK


def cmd_explosion(spec, args):
    _check(spec.params)
    t_max = _num(spec, args, "t_max", 100.0)
    tol = args.tol if args.tol is not None else 1e-6
    if args.theta is not None or (spec.theta is not None and args.asset):
        res = asset_explosion_time(spec.params, _theta(spec, args), _vec(spec, args, "y"), t_max, tol)
    else:
        res = explosion_time(spec.params, _vec(spec, args, "y"), t_max, tol)
    return res.to_json(), EXIT_OK


def cmd_bond(spec, args):
    _check(spec.params)
    family = build_family(spec.params)
    res = bond_price(spec.params, _rate(spec, args, family), _vec(spec, args, "x"),
                     _num(spec, args, "t", 0.0), _num(spec, args, "T"))
    return res.to_json(), EXIT_OK


def cmd_martingale(spec, args):
    _check(spec.params)
    family = build_family(spec.params)
    rep = martingale_check(spec.params, _theta(spec, args), _rate(spec, args, family),
                           horizon=_num(spec, args, "T", 1.0))
    return rep.to_json(), EXIT_OK


def cmd_fourier(spec, args):
    _check(spec.params)
    family = build_family(spec.params)
    theta = _theta(spec, args)
    strike = _num(spec, args, "strike")
    if args.kind == "call":
        payoff = european_call(strike, theta, args.damping if args.damping is not None else 1.5)
    else:
        payoff = european_put(strike, theta, args.damping if args.damping is not None else -0.5)
    res = fourier_price(spec.params, _rate(spec, args, family), payoff, _vec(spec, args, "x"),
                        _num(spec, args, "t", 0.0), _num(spec, args, "T"))
    return res.to_json(), EXIT_OK


def cmd_mc_verify(spec, args):
    _check(spec.params)
    x = _vec(spec, args, "x")
    T = _num(spec, args, "T")
    kw = dict(n_steps=args.steps, n_paths=args.paths, seed=args.seed)
    if args.u is not None:
        rep = compare(spec.params, x, T, u=parse_vector(args.u).astype(complex), **kw)
    else:
        rep = compare(spec.params, x, T, y=_vec(spec, args, "y"), **kw)
    return rep.to_json(), EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "moment": cmd_moment,
    "cf": cmd_cf,
    "explosion": cmd_explosion,
    "bond": cmd_bond,
    "martingale": cmd_martingale,
    "fourier": cmd_fourier,
    "mc-verify": cmd_mc_verify,
}


def build_parser():
    parser = _Parser(prog="affine-moments", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--model", required=True, help="JSON model specification")
        p.add_argument("--scenario", help="named scenario block supplying defaults")
        p.add_argument("--out", help="write the result here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"),
                       default="csv" if name == "solve" else "json")
        if name == "validate":
            continue
        p.add_argument("--T", dest="T", help="horizon / maturity")
        p.add_argument("--x", help="initial state, comma separated")
        p.add_argument("--y", help="real exponent vector")
        p.add_argument("--u", help="complex exponent vector, tokens like 0.5+2i")
        p.add_argument("--t", dest="t", help="valuation time (bond, fourier)")
        p.add_argument("--tol", type=float)
        p.add_argument("--t-max", dest="t_max", help="search horizon for explosion times")
        p.add_argument("--theta", help="asset direction, S = exp(<theta, X>)")
        p.add_argument("--asset", action="store_true", help="explosion of the asset moment y + theta")
        p.add_argument("--l", type=float, help="constant short-rate part")
        p.add_argument("--lam", help="linear short-rate coefficients")
        p.add_argument("--strike")
        p.add_argument("--kind", choices=("call", "put"), default="call")
        p.add_argument("--damping", type=float)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--paths", type=int, default=100_000)
        p.add_argument("--steps", type=int, default=200)
    return parser


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        spec = spec_io.load(args.model)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read model: {exc}", file=stderr)
        return EXIT_USAGE
    except StructuralError as exc:
        print(f"malformed model: {exc}", file=stderr)
        return EXIT_USAGE
    try:
        doc, code = COMMANDS[args.command](spec, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=stderr)
        return EXIT_USAGE
    except ValueError as exc:
        if isinstance(exc, StructuralError):
            print(f"validation failure: {exc}", file=stderr)
            return EXIT_INVALID
        if isinstance(exc, DomainError):
            print(f"domain error: {exc}", file=stderr)
            return EXIT_DOMAIN
        print(f"usage error: {exc}", file=stderr)
        return EXIT_USAGE
    except UnsupportedError as exc:
        print(f"hypothesis not met: {exc}", file=stderr)
        return EXIT_DOMAIN
    except ConvergenceError as exc:
        print(f"no convergence: {exc} (achieved {exc.achieved})", file=stderr)
        return EXIT_NUMERIC
    text = doc if isinstance(doc, str) else (to_csv(doc) if args.format == "csv" else dumps(doc) + "\n")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return code


def main():
    sys.exit(run())

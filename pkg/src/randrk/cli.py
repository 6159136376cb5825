"""Command-line front end; every command writes CSV to ``--out`` or stdout.

    randrk convergence --problem sir --scheme rrk2 --n-list 100,200,400 --reps 500
    randrk stability area --kind ms --resolution 1000
    randrk stability eval --z -1,0
"""

from __future__ import annotations

import argparse
import os
import re
import sys

from ._fmt import fmt
from .core import DomainError, make_problem
from .experiments import PROTOCOLS, convergence_study
from .noise import ALIASES, KINDS
from .solver import SCHEMES, SolverOverflow
from .stability import (
    F_value,
    InvariantViolation,
    QuadratureError,
    RegionKind,
    interval_endpoints,
    ln_moment2,
    mc_verify,
    phi_mid,
    phi_ms,
    region_area,
    region_grid,
)

THREADS_ENV = "RANDRK_THREADS"


class UsageError(Exception):
    pass


def _floats(text: str, count: int, what: str):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{what}: expected {count} comma-separated numbers, got {text!r}")
    if len(vals) != count:
        raise UsageError(f"{what}: expected {count} comma-separated numbers, got {text!r}")
    return vals


def _n_list(text: str):
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--n-list: expected comma-separated integers, got {text!r}")


def _delta_policy(text: str):
    m = re.fullmatch(r"h\^([0-9.eE+-]+):([0-9.eE+-]+)", text.strip())
    if not m:
        raise UsageError(f"--delta-policy: expected 'h^q:c', got {text!r}")
    q, c = float(m.group(1)), float(m.group(2))
    return c, q


def _workers(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _sp_note(kind: RegionKind) -> str:
    return "# sp coincides with as\n" if kind is RegionKind.SP else ""


def cmd_convergence(args) -> str:
    params = {}
    if args.problem == "example1":
        params["gamma"] = args.gamma
    elif args.problem == "linear":
        params.update(lam=args.lam, eta=args.eta)
    if args.delta is not None and args.delta_policy is not None:
        raise UsageError("--delta and --delta-policy are mutually exclusive")
    if args.protocol is not None and args.noise != "none":
        raise UsageError("--protocol replaces --noise; give one of them")
    if args.p < 2:
        raise UsageError("--p must be >= 2")
    n_list = _n_list(args.n_list)
    if len(n_list) < 3 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise UsageError("--n-list must be strictly increasing with at least 3 entries")
    try:
        problem = make_problem(args.problem, **params)
    except DomainError as exc:
        raise UsageError(str(exc))
    noise = args.protocol or ALIASES.get(args.noise, args.noise)
    policy = _delta_policy(args.delta_policy) if args.delta_policy else None
    table = convergence_study(
        problem, args.scheme, n_list, delta=args.delta or 0.0, delta_policy=policy,
        noise=noise, p=args.p, M=args.reps, mode=args.mode, master_seed=args.seed,
        workers=_workers(args),
    )
    return table.to_csv()


def cmd_region(args) -> str:
    kind = RegionKind.parse(args.kind)
    grid = region_grid(kind, _floats(args.box, 4, "--box"), args.nx, args.ny)
    return _sp_note(kind) + grid.to_csv()


def cmd_area(args) -> str:
    kind = RegionKind.parse(args.kind)
    if args.resolution < 100:
        raise UsageError("--resolution must be at least 100")
    return _sp_note(kind) + region_area(kind, args.resolution).to_csv()


def cmd_interval(args) -> str:
    kind = RegionKind.parse(args.kind)
    lo, hi = interval_endpoints(kind)
    return _sp_note(kind) + f"{fmt(lo)},{fmt(hi)}\n"


def cmd_verify(args) -> str:
    kind = RegionKind.parse(args.kind)
    a, b = _floats(args.z, 2, "--z")
    v = mc_verify(complex(a, b), kind, args.kmax, args.reps, args.seed)
    return _sp_note(kind) + v.to_csv()


def cmd_eval(args) -> str:
    a, b = _floats(args.z, 2, "--z")
    z = complex(a, b)
    vals = [a, b, phi_ms(z), phi_mid(z), F_value(a, b), ln_moment2(a, b)]
    return "a,b,phi_ms,phi_mid,F,ln_moment2\n" + ",".join(fmt(v) for v in vals) + "\n"


def _kind_arg(p):
    p.add_argument("--kind", required=True, type=str.lower, choices=["ms", "as", "sp", "mid"])


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="randrk", parents=[common],
                                     description="Randomized Runge-Kutta experiments and stability regions.")
    sub = parser.add_subparsers(dest="command", required=True)

    conv = sub.add_parser("convergence", parents=[common], help="error vs n table with log-log slope")
    conv.add_argument("--problem", required=True, choices=["example1", "sir", "linear"])
    conv.add_argument("--gamma", type=float, default=2.0, help="example1 exponent")
    conv.add_argument("--lam", type=float, default=-1.0, help="linear problem rate")
    conv.add_argument("--eta", type=float, default=1.0, help="linear problem initial value")
    conv.add_argument("--scheme", default="rrk2", choices=SCHEMES)
    conv.add_argument("--n-list", required=True)
    conv.add_argument("--p", type=float, default=2.0)
    conv.add_argument("--reps", type=int, default=None)
    conv.add_argument("--mode", default="terminal", choices=["terminal", "uniform"])
    conv.add_argument("--noise", default="none",
                      choices=["none", "const+", "const-", "uniform", "relative", *KINDS[1:3]])
    conv.add_argument("--protocol", choices=PROTOCOLS)
    conv.add_argument("--delta", type=float)
    conv.add_argument("--delta-policy")
    conv.set_defaults(func=cmd_convergence)

    stab = sub.add_parser("stability", parents=[common], help="stability regions")
    verbs = stab.add_subparsers(dest="verb", required=True)
    region = verbs.add_parser("region", parents=[common])
    _kind_arg(region)
    region.add_argument("--box", default="-3.5,0.5,-3.5,3.5", help="xmin,xmax,ymin,ymax")
    region.add_argument("--nx", type=int, default=400)
    region.add_argument("--ny", type=int, default=700)
    region.set_defaults(func=cmd_region)
    area = verbs.add_parser("area", parents=[common])
    _kind_arg(area)
    area.add_argument("--resolution", type=int, default=1000)
    area.set_defaults(func=cmd_area)
    interval = verbs.add_parser("interval", parents=[common])
    _kind_arg(interval)
    interval.set_defaults(func=cmd_interval)
    verify = verbs.add_parser("verify", parents=[common])
    verify.add_argument("--z", required=True)
    verify.add_argument("--kind", type=str.lower, default="as", choices=["ms", "as", "sp", "mid"])
    verify.add_argument("--kmax", type=int, default=2000)
    verify.add_argument("--reps", type=int, default=200)
    verify.set_defaults(func=cmd_verify)
    ev = verbs.add_parser("eval", parents=[common])
    ev.add_argument("--z", required=True)
    ev.set_defaults(func=cmd_eval)
    return parser


_NUM_LIST = re.compile(r"-[0-9.]+([eE][+-]?[0-9]+)?(,[-+0-9.eE]+)+")


def _join_negative_lists(argv):
    """Turn ``--box -3,0,-1,1`` into ``--box=-3,0,-1,1`` so argparse keeps the value."""
    out, i = [], 0
    argv = list(argv)
    while i < len(argv):
        a = argv[i]
        if a.startswith("--") and "=" not in a and i + 1 < len(argv) and _NUM_LIST.fullmatch(argv[i + 1]):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
        else:
            out.append(a)
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_negative_lists(sys.argv[1:] if argv is None else argv))
    for name, default in (("seed", 0), ("out", None), ("threads", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        text = args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"randrk: error: {exc}", file=sys.stderr)
        return 2
    except (SolverOverflow, QuadratureError, InvariantViolation, FloatingPointError) as exc:
        print(f"randrk: numerical failure: {exc}", file=sys.stderr)
        return 1
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 theorem or property check failure,
3 internal consistency error.
"""

from __future__ import annotations

import argparse
import os
import sys
import traceback

import numpy as np

from .cocycle import Repeller, lyapunov_spectrum
from .dimension import box_dimension, bowen_root
from .errors import BowenLabError, InputError, TheoremCheckFailure
from .exceptional import CONVENTIONS, avoid_series
from .models import load_model
from .pressure import Family, pressure_separated, pressure_spectral, limit_pressure
from .report import write_csv
from .symbolic import topological_entropy

THREADS_ENV = "BOWENLAB_THREADS"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_range(text: str) -> list:
    """Inclusive ``lo:hi`` integer range."""
    try:
        lo, hi = (int(p) for p in text.split(":"))
    except ValueError as exc:
        raise InputError(f"expected lo:hi, got {text!r}") from exc
    if hi < lo:
        raise InputError(f"empty range {text!r}")
    return list(range(lo, hi + 1))


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:steps`` with ``steps`` points, endpoints included."""
    try:
        lo, hi, steps = text.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError as exc:
        raise InputError(f"expected lo:hi:steps, got {text!r}") from exc
    if steps < 2 or hi <= lo:
        raise InputError(f"bad grid {text!r}")
    return np.linspace(lo, hi, steps)


def thread_count(requested: int | None) -> int:
    if requested is not None:
        n = requested
    elif os.environ.get(THREADS_ENV):
        try:
            n = int(os.environ[THREADS_ENV])
        except ValueError as exc:
            raise InputError(f"{THREADS_ENV} must be an integer") from exc
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise InputError("thread count must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bowenlab", description="Pressure, Bowen roots and exceptional sets of expanding maps.")
    p.add_argument("--threads", type=int, default=None, help=f"worker threads (default: ${THREADS_ENV} or all cores)")
    p.add_argument("--seed", type=int, default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_arg(q):
        q.add_argument("--model", required=True, help="model JSON file")

    q = sub.add_parser("pressure", help="topological pressure at s or on a grid")
    model_arg(q)
    q.add_argument("--family", choices=["sub", "super"], default="sub")
    g = q.add_mutually_exclusive_group(required=True)
    g.add_argument("--s", type=float)
    g.add_argument("--s-grid", help="lo:hi:steps")
    q.add_argument("--method", choices=["spectral", "separated"], default="spectral")
    q.add_argument("--depth", type=int, default=None, help="block depth m (spectral) or orbit length n (separated)")
    q.add_argument("--eps", type=float, default=0.05)
    q.add_argument("--out", default=None)

    q = sub.add_parser("root", help="root of the Bowen equation")
    model_arg(q)
    q.add_argument("--family", choices=["sub", "super"], default="sub")
    q.add_argument("--tol", type=float, default=1e-10)

    q = sub.add_parser("avoid", help="sub-repellers avoiding a target point")
    model_arg(q)
    q.add_argument("--target", required=True, help="comma-separated coordinates, fractions allowed")
    q.add_argument("--depths", required=True, help="lo:hi")
    q.add_argument("--theorem", choices=["a", "b", "both"], default="both")
    q.add_argument("--convention", choices=list(CONVENTIONS), default="itinerary")
    q.add_argument("--out", default=None)

    q = sub.add_parser("lyapunov", help="Lyapunov exponents")
    model_arg(q)
    q.add_argument("--measure", choices=["parry", "lebesgue"], default="parry")
    q.add_argument("--depth", type=int, default=8)

    q = sub.add_parser("entropy", help="topological entropy")
    model_arg(q)

    q = sub.add_parser("boxdim", help="box-counting dimension")
    model_arg(q)
    q.add_argument("--max-depth", type=int, default=10)

    sub.add_parser("selftest", help="run the invariant suite")
    return p


def _repeller(path) -> Repeller:
    return Repeller.full(load_model(path))


def cmd_pressure(args) -> int:
    rep = _repeller(args.model)

    def value(family, s):
        if args.method == "separated":
            return pressure_separated(rep, family, s, args.depth or 10, args.eps).value
        if args.depth is None:
            return limit_pressure(rep, family, s)
        return pressure_spectral(rep, family, s, args.depth).value

    if args.s is not None:
        print(f"P_{args.family}({args.s:g}) = {value(args.family, args.s):.9f}")
        return 0
    grid = parse_grid(args.s_grid)
    if grid[0] < 0 or grid[-1] > rep.d:
        raise InputError(f"grid must lie in [0, {rep.d}]")
    table = [{"s": float(s), "pressure_sub": value("sub", s), "pressure_super": value("super", s)} for s in grid]
    write_csv(table, args.out)
    return 0


def cmd_root(args) -> int:
    rep = _repeller(args.model)
    res = bowen_root(rep, args.family, tol=args.tol)
    name = "alpha0" if Family.parse(args.family) is Family.SUB else "s_star"
    note = " (degenerate: zero entropy)" if res.degenerate else ""
    print(f"{name} = {res.root:.9f}{note}")
    return 0


def cmd_avoid(args) -> int:
    rep = _repeller(args.model)
    target = tuple(p for p in args.target.split(",") if p.strip())
    try:
        series = avoid_series(
            rep, target, parse_range(args.depths), theorem=args.theorem,
            convention=args.convention, threads=thread_count(args.threads),
        )
    except TheoremCheckFailure as exc:
        if exc.row is not None:
            print(f"failing row: {exc.row.as_row()}", file=sys.stderr)
        raise
    write_csv([r.as_row() for r in series.rows], args.out)
    return 0


def cmd_lyapunov(args) -> int:
    rep = _repeller(args.model)
    spec = lyapunov_spectrum(rep, args.measure, depth=args.depth, seed=args.seed)
    for i, (lam, err) in enumerate(zip(spec.exponents, spec.stderr), 1):
        tail = f" +/- {err:.2g}" if err > 0 else ""
        print(f"lambda_{i} = {lam:.9f}{tail}")
    print(f"sum = {spec.total:.9f}  ({spec.method})")
    return 0


def cmd_entropy(args) -> int:
    rep = _repeller(args.model)
    h = topological_entropy(rep.sft)
    print(f"h_top = {h:.9f}")
    return 0


def cmd_boxdim(args) -> int:
    rep = _repeller(args.model)
    est = box_dimension(rep, max_depth=args.max_depth)
    print(f"box_dim = {est.dimension:.6f}  (rms residual {est.residual:.2g}, {len(est.scales)} scales)")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return 0 if run_selftest(threads=thread_count(args.threads)) else 2


COMMANDS = {
    "pressure": cmd_pressure,
    "root": cmd_root,
    "avoid": cmd_avoid,
    "lyapunov": cmd_lyapunov,
    "entropy": cmd_entropy,
    "boxdim": cmd_boxdim,
    "selftest": cmd_selftest,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except BowenLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

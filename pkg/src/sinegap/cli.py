"""Command-line front end.

Every successful run writes one JSON document to stdout with the echoed
inputs, the results, error estimates and the wall-clock time.  Exit codes:
0 success, 2 usage error, 3 accuracy error, 4 domain error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
from typing import Optional, Sequence

import numpy as np

from .constants import NAMES, named_constant
from .errors import SineGapError, UsageError
from .linalg import operator_diagnostics
from .routes import IDENTITIES, ROUTES, extract_constant, gap_logdet, identity_residual

EXIT_OK, EXIT_USAGE, EXIT_ACCURACY, EXIT_DOMAIN = 0, 2, 3, 4

DEFAULT_COMPARE = ("toeplitz", "hankel", "resolvent", "split", "asymptotic")


def to_json(obj) -> str:
    """Serialize with floats at 17 significant digits; NaN and infinities become null."""
    if obj is None or isinstance(obj, bool):
        return "null" if obj is None else ("true" if obj else "false")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return format(v, ".17g") if math.isfinite(v) else "null"
    if isinstance(obj, complex):
        return to_json({"re": obj.real, "im": obj.imag})
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{to_json(str(k))}: {to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _table(args, name: str, header: Sequence[str], rows) -> dict:
    rows = [list(r) for r in rows]
    if args.csv:
        return {f"{name}_csv": _csv(header, rows)}
    return {name: [dict(zip(header, r)) for r in rows]}


def _int(text: str) -> int:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v.is_integer():
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(v)


def _float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def _route_params(args, route: str) -> dict:
    p = {}
    if route in ("toeplitz", "hankel", "resolvent") and args.n is not None:
        p["n"] = args.n
    if route in ("resolvent", "split") and args.N is not None:
        p["N"] = args.N
    if route == "nystrom" and args.m is not None:
        p["m"] = args.m
    if route in ("nystrom", "hankel") and args.precision is not None:
        p["precision"] = args.precision
    return p


def cmd_constants(args) -> dict:
    out = {name: named_constant(name).value for name in NAMES}
    methods = {name: named_constant(name).method for name in NAMES}
    return {"results": out, "methods": methods}


def cmd_gap(args) -> dict:
    est = gap_logdet(args.alpha, args.route, **_route_params(args, args.route))
    return {"results": est.as_dict(), "error_estimate": est.error_estimate}


def cmd_compare(args) -> dict:
    routes = args.route.split(",") if args.route else list(DEFAULT_COMPARE)
    for r in routes:
        if r not in ROUTES:
            raise UsageError(f"unknown route {r!r}")
    ref = gap_logdet(args.alpha, "nystrom", **_route_params(args, "nystrom"))
    rows = [["nystrom", ref.logdet.log_abs, 0.0, ref.error_estimate]]
    for r in routes:
        if r == "nystrom":
            continue
        est = gap_logdet(args.alpha, r, **_route_params(args, r))
        rows.append([r, est.logdet.log_abs, est.logdet.log_abs - ref.logdet.log_abs, est.error_estimate])
    header = ("route", "logdet", "difference_from_nystrom", "error_estimate")
    return {"results": _table(args, "routes", header, rows)}


def cmd_fit(args) -> dict:
    if args.points < 1:
        raise UsageError("--points must be >= 1")
    betas = np.linspace(args.beta_min, args.beta_max, args.points) if args.points > 1 else np.array([args.beta_min])
    route = args.route or "nystrom"
    rep = extract_constant(betas, route, args.order, **_route_params(args, route))
    d = rep.as_dict()
    rows = [[b, ld] for b, ld in zip(d.pop("beta_grid"), d.pop("logdets"))]
    d.update(_table(args, "grid", ("beta", "logdet"), rows))
    return {"results": d, "error_estimate": abs(d["C_error"])}


def cmd_identities(args) -> dict:
    p = {}
    if args.which in ("prop21_BO", "prop23", "prop32", "prop33", "thm24"):
        p["n"] = args.n
    if args.which in ("prop33", "f64", "thm24") and args.alpha is not None:
        p["alpha"] = args.alpha
    if args.which in ("prop21_BO", "f64", "block_tab") and args.N is not None:
        p["N"] = args.N
    if args.which == "f64" and args.m is not None:
        p["m"] = args.m
    if args.which == "prop33" and args.precision is not None:
        p["precision"] = args.precision
    res = identity_residual(args.which, **p)
    tol = args.tol if args.tol is not None else 1e-8
    ok = res <= tol
    out = {"results": {"which": args.which, "residual": res, "tol": tol, "passed": ok}}
    if not ok:
        out["_exit"] = EXIT_ACCURACY
    return out


def cmd_diagnostics(args) -> dict:
    alpha = args.alpha if args.alpha is not None else 1.0
    n = args.n if args.n is not None else 4
    N = args.N if args.N is not None else 1024
    d = operator_diagnostics(alpha, n, N).as_dict()
    nuc = d.pop("nuclear")
    rows = [[float(mu), label, val] for mu, entries in nuc.items() for label, val in entries.items()]
    d.update(_table(args, "nuclear", ("mu", "operator", "nuclear_surrogate"), rows))
    return {"results": d}


COMMANDS = {
    "constants": cmd_constants,
    "gap": cmd_gap,
    "compare": cmd_compare,
    "fit-constant": cmd_fit,
    "identities": cmd_identities,
    "diagnostics": cmd_diagnostics,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sinegap", description="Sine-kernel gap probability and its constant term.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, alpha_required=False):
        p.add_argument("--alpha", type=_float, required=alpha_required, help="interval length of K_alpha")
        p.add_argument("--n", type=_int, help="matrix order")
        p.add_argument("--N", type=_int, help="truncation order")
        p.add_argument("--m", type=_int, help="Nystrom nodes")
        p.add_argument("--precision", choices=("double", "extended"))
        p.add_argument("--csv", action="store_true", help="render tables as CSV")

    sub.add_parser("constants", help="special constants").add_argument("--csv", action="store_true")

    p = sub.add_parser("gap", help="log det(I - K_alpha) by one route")
    common(p, alpha_required=True)
    p.add_argument("--route", choices=ROUTES, required=True)

    p = sub.add_parser("compare", help="all routes against Nystrom")
    common(p, alpha_required=True)
    p.add_argument("--route", help="comma-separated routes (default: all discrete routes)")

    p = sub.add_parser("fit-constant", help="fit the constant term over a beta grid")
    common(p)
    p.add_argument("--beta-min", type=_float, required=True)
    p.add_argument("--beta-max", type=_float, required=True)
    p.add_argument("--points", type=_int, required=True)
    p.add_argument("--order", type=_int, required=True)
    p.add_argument("--route", choices=ROUTES)

    p = sub.add_parser("identities", help="residual of a determinant identity")
    common(p)
    p.add_argument("--which", choices=IDENTITIES, required=True)
    p.add_argument("--tol", type=_float)
    p.set_defaults(n=None)

    p = sub.add_parser("diagnostics", help="operator diagnostics")
    common(p)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.command == "identities" and args.n is None:
        sys.stderr.write("sinegap identities: error: --n is required\n")
        return EXIT_USAGE
    inputs = {k: v for k, v in sorted(vars(args).items()) if v is not None and k != "csv"}
    start = time.perf_counter()
    try:
        out = COMMANDS[args.command](args)
    except SineGapError as exc:
        sys.stderr.write(f"sinegap {args.command}: {type(exc).__name__}: {exc}\n")
        return exc.exit_code
    code = out.pop("_exit", EXIT_OK)
    report = {"command": args.command, "inputs": inputs}
    report.update(out)
    report["seconds"] = time.perf_counter() - start
    sys.stdout.write(to_json(report) + "\n")
    if code != EXIT_OK:
        sys.stderr.write(f"sinegap {args.command}: residual above tolerance\n")
    return code


if __name__ == "__main__":
    sys.exit(main())

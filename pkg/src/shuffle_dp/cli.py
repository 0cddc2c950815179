"""Command-line front end for the shuffle-model accountant.

Every number is printed with six significant digits. Exit status is 0 on
success, 2 for a parameter outside its domain, 3 when a closed-form bound
does not apply, and 64 for usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from .clones import SearchConfig, delta_upper, eps_upper
from .closed_form import (
    LocalPrivacy,
    approx_dp_bound,
    eps0_for_frequency,
    eps_closed_form,
    eps_krr,
    sgd_accounting,
)
from .dist import CloneInstance
from .errors import ApplicabilityError, ParameterDomainError
from .renyi import (
    clone_rdp_curve,
    compose_advanced_route,
    compose_rdp_route,
    default_alphas,
    rdp_clones_many,
    rdp_lower_2rr,
)
from .rr_lower import eps_lower_2rr, log_delta_grid, tail_sweep, tail_transition

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_APPLICABILITY = 3
EXIT_USAGE = 64

DEFAULT_N = 1_000_000
DEFAULT_DELTA = 1e-6

SWEEP_HEADER = ("variable", "value", "method", "eps", "delta", "direction", "terminated")
SWEEP_METHODS = ("closed-form", "numeric", "krr", "lower-2rr", "rdp", "approx-dp")
# rdp evaluation: C-mass below this is bounded analytically instead of summed
RDP_MASS_TOL = 1e-20


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def fmt(x: float) -> str:
    """Six significant digits, trailing zeros kept, locale independent."""
    return "%#.6g" % x


def fmt_log(log_x: float) -> str:
    """Format exp(log_x) with six significant digits, even below the float range."""
    if log_x == -math.inf:
        return fmt(0.0)
    if log_x > -700.0:
        return fmt(math.exp(log_x))
    exp10 = log_x / math.log(10.0)
    power = math.floor(exp10)
    mant = 10.0 ** (exp10 - power)
    text = "%.5f" % mant
    if text.startswith("10."):
        power += 1
        text = "%.5f" % (mant / 10.0)
    return f"{text}e{power:+03d}"


def _int_arg(text: str) -> int:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(val) or val != int(val):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(val)


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _jobs(value: int | None) -> int:
    if value is None:
        env = os.environ.get("SHUFFLE_DP_JOBS")
        if env:
            try:
                value = int(env)
            except ValueError:
                raise ParameterDomainError(f"SHUFFLE_DP_JOBS must be an integer, got {env!r}") from None
        else:
            value = 1
    if value < 1:
        raise ParameterDomainError("jobs must be >= 1")
    return value


def _add_common(p: argparse.ArgumentParser, *, eps0: bool = True) -> None:
    p.add_argument("--n", type=_int_arg, default=DEFAULT_N)
    if eps0:
        p.add_argument("--eps0", type=float, required=True)
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)


def _search_cfg(args) -> SearchConfig:
    return SearchConfig(iterations=args.iters, stride=args.stride)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shuffle-dp", description="Privacy accounting for shuffled local randomizers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bound", help="central epsilon for one shuffled round")
    _add_common(p)
    p.add_argument("--method", choices=("closed-form", "numeric", "approx-dp", "lower-2rr"), default="numeric")
    p.add_argument("--delta0", type=float, default=0.0)
    p.add_argument("--stride", type=_int_arg, default=None)
    p.add_argument("--iters", type=_int_arg, default=40)

    p = sub.add_parser("krr", help="closed-form bound for k-ary randomized response")
    _add_common(p)
    p.add_argument("--k", type=_int_arg, required=True)

    p = sub.add_parser("lower-2rr", help="lower bound from shuffled binary randomized response")
    _add_common(p)
    p.add_argument("--iters", type=_int_arg, default=40)

    p = sub.add_parser("rdp", help="Renyi DP of the clone pair")
    _add_common(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--alpha", type=float)
    group.add_argument("--alpha-grid", help="comma-separated orders, or 'default'")

    p = sub.add_parser("compose", help="epsilon after repeated shuffled rounds")
    _add_common(p)
    p.add_argument("--reps", type=_int_arg, required=True)
    p.add_argument("--route", choices=("rdp", "advanced"), default="rdp")
    p.add_argument("--stride", type=_int_arg, default=None)
    p.add_argument("--iters", type=_int_arg, default=40)

    p = sub.add_parser("sweep", help="grid of bounds as CSV or JSON")
    p.add_argument("--variable", choices=("n", "eps0", "delta", "alpha", "reps"), required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--values", type=_float_list, help="explicit comma-separated values")
    group.add_argument("--logspace", type=_float_list, help="START,STOP,COUNT log-spaced values")
    p.add_argument("--methods", default="closed-form,numeric,lower-2rr")
    p.add_argument("--n", type=_int_arg, default=DEFAULT_N)
    p.add_argument("--eps0", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--reps", type=_int_arg, default=1)
    p.add_argument("--k", type=_int_arg, default=2)
    p.add_argument("--stride", type=_int_arg, default=None)
    p.add_argument("--iters", type=_int_arg, default=40)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=_int_arg, default=None)

    p = sub.add_parser("tail", help="lower-bound epsilon over a deep, log-spaced delta grid")
    _add_common(p, eps0=True)
    p.add_argument("--delta-max", default="1e-2")
    p.add_argument("--delta-min", default="1e-300")
    p.add_argument("--points", type=_int_arg, default=40)
    p.add_argument("--iters", type=_int_arg, default=40)

    p = sub.add_parser("freq-eps0", help="local epsilon for a central frequency-estimation target")
    p.add_argument("--n", type=_int_arg, default=DEFAULT_N)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)

    p = sub.add_parser("sgd", help="one shuffled pass of noisy SGD")
    p.add_argument("--n", type=_int_arg, default=DEFAULT_N)
    p.add_argument("--eps0", type=float, required=True)
    p.add_argument("--delta0", type=float, required=True)
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    return parser


def _cmd_bound(args, out) -> None:
    if args.method == "closed-form":
        print(f"eps={fmt(eps_closed_form(args.n, args.eps0, args.delta))} direction=upper", file=out)
    elif args.method == "numeric":
        eps = eps_upper(CloneInstance(args.n, args.eps0), args.delta, _search_cfg(args))
        print(f"eps={fmt(eps)} direction=upper", file=out)
    elif args.method == "approx-dp":
        res = approx_dp_bound(args.n, LocalPrivacy(args.eps0, args.delta0), args.delta)
        print(f"eps={fmt(res.eps)} delta={fmt(res.delta)} direction=upper", file=out)
    else:
        eps = eps_lower_2rr(args.n, args.eps0, args.delta, args.iters)
        print(f"eps={fmt(eps)} direction=lower", file=out)


def _cmd_krr(args, out) -> None:
    print(f"eps={fmt(eps_krr(args.n, args.k, args.eps0, args.delta))} direction=upper", file=out)


def _cmd_lower(args, out) -> None:
    eps = eps_lower_2rr(args.n, args.eps0, args.delta, args.iters)
    print(f"eps={fmt(eps)} direction=lower", file=out)


def _cmd_rdp(args, out) -> None:
    inst = CloneInstance(args.n, args.eps0)
    if args.alpha is not None:
        val = rdp_clones_many(inst, [args.alpha], RDP_MASS_TOL, None)[0]
        print(f"alpha={fmt(args.alpha)} eps={fmt(min(val.upper, inst.eps0))} direction=upper", file=out)
        return
    if args.alpha_grid.strip() == "default":
        alphas = default_alphas()
    else:
        try:
            alphas = _float_list(args.alpha_grid)
        except argparse.ArgumentTypeError as exc:
            raise ParameterDomainError(str(exc)) from None
    curve = clone_rdp_curve(inst, alphas)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("alpha", "eps", "direction"))
    for a, e in curve.points:
        writer.writerow((fmt(a), fmt(e), "upper"))


def _cmd_compose(args, out) -> None:
    inst = CloneInstance(args.n, args.eps0)
    if args.route == "rdp":
        res = compose_rdp_route(inst, args.delta, args.reps)
    else:
        res = compose_advanced_route(inst, args.delta, args.reps, SearchConfig(args.iters, args.stride))
    print(f"eps={fmt(res.eps)} delta={fmt(res.delta)} direction=upper route={args.route}", file=out)


def _sweep_values(args) -> list[float]:
    if args.values is not None:
        values = args.values
    else:
        if len(args.logspace) != 3 or args.logspace[2] != int(args.logspace[2]):
            raise ParameterDomainError("--logspace takes START,STOP,COUNT")
        start, stop, count = args.logspace
        if start <= 0 or stop <= 0 or count < 1:
            raise ParameterDomainError("--logspace needs positive bounds and count >= 1")
        values = list(np.geomspace(start, stop, int(count)))
    if not values:
        raise ParameterDomainError("sweep values must be nonempty")
    diffs = np.diff(values)
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ParameterDomainError("sweep values must be strictly monotone")
    return [float(v) for v in values]


def _sweep_row(args, variable: str, value: float, method: str) -> dict:
    params = {"n": args.n, "eps0": args.eps0, "delta": args.delta, "alpha": args.alpha, "reps": args.reps}
    params[variable] = value
    n, eps0, delta, alpha, reps = params["n"], params["eps0"], params["delta"], params["alpha"], params["reps"]
    if variable in ("n", "reps"):
        if value != int(value):
            raise ParameterDomainError(f"{variable} must be an integer, got {value!r}")
        n, reps = int(params["n"]), int(params["reps"])
    row = {"variable": variable, "value": value, "method": method, "eps": None, "delta": None,
           "direction": "n/a", "terminated": ""}
    cfg = SearchConfig(args.iters, args.stride)
    single = reps == 1 and variable != "alpha"
    try:
        if method == "closed-form" and single:
            row.update(eps=eps_closed_form(n, eps0, delta), delta=delta, direction="upper")
        elif method == "krr" and single:
            row.update(eps=eps_krr(n, args.k, eps0, delta), delta=delta, direction="upper")
        elif method == "numeric" and single:
            inst = CloneInstance(n, eps0)
            eps = eps_upper(inst, delta, cfg)
            status = delta_upper(inst, eps, SearchConfig(cfg.iterations, cfg.stride, delta)).terminated
            row.update(eps=eps, delta=delta, direction="upper", terminated=status)
        elif method == "lower-2rr" and variable == "alpha":
            row.update(eps=float(rdp_lower_2rr(n, eps0, alpha)), direction="lower")
        elif method == "lower-2rr" and single:
            row.update(eps=eps_lower_2rr(n, eps0, delta, cfg.iterations), delta=delta, direction="lower")
        elif method == "rdp" and variable == "alpha":
            val = rdp_clones_many(CloneInstance(n, eps0), [alpha], RDP_MASS_TOL, None)[0]
            row.update(eps=min(val.upper, eps0), direction="upper")
        elif method == "rdp":
            res = compose_rdp_route(CloneInstance(n, eps0), delta, reps)
            row.update(eps=res.eps, delta=res.delta, direction="upper")
        elif method == "approx-dp" and variable != "alpha":
            res = compose_advanced_route(CloneInstance(n, eps0), delta, reps, cfg)
            row.update(eps=res.eps, delta=res.delta, direction="upper")
    except ApplicabilityError:
        pass
    return row


def _cmd_sweep(args, out) -> None:
    values = _sweep_values(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = [m for m in methods if m not in SWEEP_METHODS]
    if unknown or not methods:
        raise ParameterDomainError(f"unknown sweep methods {unknown}; choose from {', '.join(SWEEP_METHODS)}")
    jobs = _jobs(args.jobs)
    tasks = [(v, m) for v in values for m in methods]
    work: Callable[[tuple], dict] = lambda t: _sweep_row(args, args.variable, t[0], t[1])
    if jobs == 1:
        rows = [work(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(work, tasks))

    text = render_json(rows) if args.format == "json" else render_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)


def _cell(x) -> str:
    return "" if x is None else fmt(x)


def render_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for r in rows:
        writer.writerow((r["variable"], fmt(r["value"]), r["method"], _cell(r["eps"]), _cell(r["delta"]),
                         r["direction"], r["terminated"]))
    return buf.getvalue()


def render_json(rows: Sequence[dict]) -> str:
    def num(x):
        return None if x is None else float(fmt(x))

    payload = [
        {**r, "value": num(r["value"]), "eps": num(r["eps"]), "delta": num(r["delta"])}
        for r in rows
    ]
    return json.dumps({"rows": payload}, indent=1) + "\n"


def _cmd_tail(args, out) -> None:
    grid = log_delta_grid(args.delta_max, args.delta_min, args.points)
    points = tail_sweep(args.n, args.eps0, log_delta_grid=grid, iterations=args.iters)
    star = tail_transition(points, args.eps0)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("log_delta", "delta", "eps", "transition"))
    for pt in points:
        writer.writerow((fmt(pt.log_delta), fmt_log(pt.log_delta), fmt(pt.eps), int(pt is star)))


def _cmd_freq(args, out) -> None:
    print(f"eps0={fmt(eps0_for_frequency(args.n, args.eps, args.delta))}", file=out)


def _cmd_sgd(args, out) -> None:
    res = sgd_accounting(args.n, LocalPrivacy(args.eps0, args.delta0), args.delta)
    g = res.guarantee
    print(f"eps={fmt(g.eps)} delta={fmt(g.delta)} sigma={fmt(res.sigma)} direction={g.direction}", file=out)


_COMMANDS = {
    "bound": _cmd_bound,
    "krr": _cmd_krr,
    "lower-2rr": _cmd_lower,
    "rdp": _cmd_rdp,
    "compose": _cmd_compose,
    "sweep": _cmd_sweep,
    "tail": _cmd_tail,
    "freq-eps0": _cmd_freq,
    "sgd": _cmd_sgd,
}


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    """Execute one command; returns the exit status."""
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=err)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        _COMMANDS[args.command](args, out)
    except ApplicabilityError as exc:
        limit = "" if exc.max_eps0 is None else f" (admissible eps0 <= {exc.max_eps0:.3g})"
        print(f"error: not applicable: {exc}{limit}", file=err)
        return EXIT_APPLICABILITY
    except ParameterDomainError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_DOMAIN
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

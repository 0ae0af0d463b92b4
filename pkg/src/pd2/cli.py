"""Command-line front end.

    pd2 <command> [options]

Exit status is 0 on success, 1 for invalid input (one line on stderr
starting with ``error:``) and 2 for numerical failure (quadrature or a
degenerate importance ensemble). Output tables are described in
docs/formats.md.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__
from . import asymptotics as asy
from .analytics import cdf_v1, joint_density, load_or_estimate_g
from .experiments import (
    ExperimentConfig,
    ScanError,
    clt_hm_check,
    consistency_suite,
    mdp_p1_scan,
    mdp_v1_scan,
    small_param_scan,
)
from .sampler import (
    DEFAULT_JUMP_FLOOR,
    DEFAULT_STOP_EPS,
    Params,
    gem_sample,
    importance_ensemble,
    rank_descending,
    sample_pd_subordinator,
)
from .special import QuadratureError, RngStream
from .tables import Table, to_columnar, to_structured

STOCHASTIC = {"sample", "density", "mdp-p1", "clt-hm", "small-ldp"}
GLOBAL_DEFAULTS = {"seed": None, "workers": 1, "out": None, "format": "columnar-text"}


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    def __init__(self, message, table=None, config=None):
        super().__init__(message)
        self.table = table
        self.config = config


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# argument types
# ---------------------------------------------------------------------------


def parse_grid(text: str) -> list[float]:
    """Comma list "1e3,1e4" or geometric "start:stop:count"."""
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            count = int(count)
            if count < 1:
                raise ValueError
            if count == 1:
                return [float(start)]
            return [float(v) for v in np.geomspace(float(start), float(stop), count)]
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("grid is empty")
    return values


def parse_seed(text: str) -> int:
    try:
        seed = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed {text!r}") from None
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _global_flags(parser):
    parser.add_argument("--seed", type=parse_seed, default=argparse.SUPPRESS,
                        help="master seed, required for stochastic commands")
    parser.add_argument("--workers", type=positive_int, default=argparse.SUPPRESS)
    parser.add_argument("--out", default=argparse.SUPPRESS, help="output file (default stdout)")
    parser.add_argument("--format", choices=["columnar-text", "structured-text", "columnar", "structured"],
                        default=argparse.SUPPRESS)


def build_parser() -> Parser:
    parser = Parser(prog="pd2", description="Two-parameter Poisson-Dirichlet tools.")
    parser.add_argument("--version", action="version", version=__version__)
    _global_flags(parser)
    common = Parser(add_help=False)
    _global_flags(common)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("sample", parents=[common], help="draw ranked PD(alpha, theta) weights")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--method", choices=["gem", "subordinator", "importance"], default="gem")
    p.add_argument("--n", type=positive_int, default=1, help="number of draws")
    p.add_argument("--tail-eps", type=float, default=1e-3, help="expected residual mass (gem)")
    p.add_argument("--stop-eps", type=float, default=DEFAULT_STOP_EPS, help="jump stopping ratio (importance)")
    p.add_argument("--jump-floor", type=float, default=DEFAULT_JUMP_FLOOR, help="smallest jump (subordinator)")
    p.add_argument("--top", type=positive_int, default=20, help="atoms reported per draw")

    p = sub.add_parser("cdf-v1", parents=[common], help="P(V_1(T) <= s)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--s-grid", type=parse_grid, required=True)

    p = sub.add_parser("density", parents=[common], help="joint density of the top n atoms")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--n-dim", type=positive_int, default=1)
    p.add_argument("--points", type=float_list, action="append", required=True,
                   help="comma-separated point; repeat for more points")
    p.add_argument("--g-cache-dir", default=os.environ.get("PD2_CACHE_DIR"))
    p.add_argument("--g-samples", type=positive_int, default=100000)

    p = sub.add_parser("rates", parents=[common], help="evaluate a rate function")
    p.add_argument("--which", choices=["j1", "i", "s1", "s", "sn", "lambda-star", "sigma2"], required=True)
    p.add_argument("--x", type=float_list, help="point (j1, i, lambda-star)")
    p.add_argument("--y", type=float, help="second coordinate (lambda-star)")
    p.add_argument("--p", type=float_list, help="weights (s1, s, sn)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--m", type=int)

    for name, helptext in (("mdp-v1", "exact V_1 moderate-deviation scan"),
                           ("mdp-p1", "Monte Carlo P_1 moderate-deviation scan")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--alpha", type=float, required=True)
        p.add_argument("--rho", type=float, required=True)
        p.add_argument("--x", type=float, required=True)
        p.add_argument("--theta-grid", type=parse_grid, required=True)
        if name == "mdp-p1":
            p.add_argument("--reps", type=positive_int, default=100000)

    p = sub.add_parser("clt-hm", parents=[common], help="homozygosity CLT moments")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--reps", type=positive_int, default=4000)
    p.add_argument("--hm-tol", type=float, default=1e-9)

    p = sub.add_parser("small-ldp", parents=[common], help="small-parameter staircase scan")
    p.add_argument("--a-grid", type=parse_grid, required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--reps", type=positive_int, default=1000000)
    p.add_argument("--delta", type=float, default=1e-3)

    p = sub.add_parser("check", parents=[common], help="built-in verification suites")
    p.add_argument("--suite", choices=["consistency", "contraction", "invariants"], required=True)
    p.add_argument("--alpha", type=float, default=0.4)
    p.add_argument("--theta", type=float, default=2.0)
    p.add_argument("--reps", type=positive_int, default=10000)
    return parser


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _params(args):
    if args.alpha is None:
        raise ValueError("--alpha is required")
    return Params(args.alpha, args.theta)


def _config(args, **extra) -> ExperimentConfig:
    skip = {"seed", "workers", "out", "format", "command", "reps"}
    params = {k: v for k, v in sorted(vars(args).items()) if k not in skip and k != "g_cache_dir"}
    params.update(extra)
    return ExperimentConfig(args.command, params, args.seed, getattr(args, "reps", None))


def cmd_sample(args):
    p = _params(args)
    stream = RngStream(args.seed)
    table = Table(["draw", "rank", "weight", "tail", "log_weight"])
    warning = None
    if args.method == "importance":
        ens = importance_ensemble(p, args.n, stream, stop_eps=args.stop_eps)
        draws = [(s, lw) for s, lw in zip(ens.particles, ens.log_weight)]
        warning = ens.ess_warning
    else:
        draws = []
        for i in range(args.n):
            sub = stream.substream("draw", i)
            if args.method == "gem":
                s = rank_descending(gem_sample(p, sub, tail_eps=args.tail_eps))
            else:
                s = sample_pd_subordinator(p, sub, args.jump_floor).normalized()
            draws.append((s, None))
    for i, (s, lw) in enumerate(draws):
        for r, w in enumerate(s.weights[: args.top], start=1):
            table.append(draw=i, rank=r, weight=float(w), tail=float(s.tail),
                         log_weight=None if lw is None else float(lw))
    cfg = _config(args)
    table.metadata.update(cfg.header())
    if warning:
        raise NumericalFailure(warning, table)
    return table


def cmd_cdf_v1(args):
    p = _params(args)
    table = Table(["s", "cdf"], [], _config(args).header())
    for s in args.s_grid:
        table.append(s=s, cdf=cdf_v1(p, s))
    return table


def cmd_density(args):
    p = _params(args)
    for pt in args.points:
        if len(pt) != args.n_dim:
            raise ValueError(f"point {pt} does not have {args.n_dim} coordinates")
    beta = p.theta + args.n_dim * p.alpha
    stream = RngStream(args.seed).substream("density-g")
    g = load_or_estimate_g(p.alpha, beta, args.g_samples, stream, args.g_cache_dir, workers=args.workers)
    cols = [f"p{i + 1}" for i in range(args.n_dim)]
    table = Table(cols + ["density", "g_value", "g_dkw"], [], _config(args).header())
    for pt in args.points:
        rest = 1.0 - math.fsum(pt)
        table.append(**dict(zip(cols, pt)), density=joint_density(p, pt, g),
                     g_value=g(pt[-1] / rest) if rest > 0 else None, g_dkw=g.dkw_bound())
    return table


def _need(args, *names):
    for n in names:
        if getattr(args, n) is None:
            raise ValueError(f"--{n} is required for --which {args.which}")


def cmd_rates(args):
    w = args.which
    if w == "j1":
        _need(args, "x")
        values = [asy.rate_J1(v) for v in args.x]
    elif w == "i":
        _need(args, "x")
        values = [asy.rate_I(args.x)]
    elif w == "s1":
        _need(args, "p")
        values = [asy.rate_S1(v) for v in args.p]
    elif w == "s":
        _need(args, "p")
        values = [asy.rate_S(args.p)]
    elif w == "sn":
        _need(args, "p")
        values = [asy.rate_Sn(args.p)]
    elif w == "lambda-star":
        _need(args, "x", "y", "alpha", "m")
        values = [asy.lambda_star(args.x[0], args.y, args.alpha, args.m)]
    else:
        _need(args, "alpha", "m")
        values = [asy.sigma2(args.alpha, args.m)]
    # whole numbers print as integers so "rates --which s1 --p 0.6" reads 1
    return Table(["value"], [(int(v) if math.isfinite(v) and v == int(v) else v,) for v in values])


def _plan(args):
    plan = asy.ScalingPlan("MDP3", args.rho)
    check = asy.validate_scaling(plan)
    if not check.passed:
        raise ValueError(check.reason)
    return plan


def cmd_mdp_v1(args):
    table = mdp_v1_scan(args.alpha, _plan(args), args.x, args.theta_grid)
    table.metadata.update(_config(args).header())
    return table


def cmd_mdp_p1(args):
    table = mdp_p1_scan(args.alpha, _plan(args), args.x, args.theta_grid, args.reps, RngStream(args.seed),
                        workers=args.workers)
    table.metadata.update(_config(args).header())
    return table


def cmd_clt_hm(args):
    r = clt_hm_check(args.alpha, args.m, args.theta, args.reps, RngStream(args.seed), hm_tol=args.hm_tol,
                     workers=args.workers)
    table = Table(["sample_mean", "se_mean", "sample_variance", "se_variance", "target_variance", "replicas",
                   "sticks"], [], _config(args).header())
    table.append(**vars(r))
    return table


def cmd_small_ldp(args):
    table = small_param_scan(args.a_grid, args.k, args.reps, RngStream(args.seed), delta=args.delta,
                             workers=args.workers)
    table.metadata.update(_config(args).header())
    return table


def _contraction_table():
    table = Table(["check", "passed", "value", "target", "std_err", "detail"])
    for alpha, m in ((0.3, 2), (0.5, 2), (0.5, 3)):
        for z in np.linspace(-2.0, 2.0, 21):
            c = asy.contracted_rate_numeric(float(z), alpha, m)
            table.append(check=f"contraction:alpha={alpha};m={m};z={z:.2f}",
                         passed=abs(c.numeric - c.closed_form) <= 1e-6, value=c.numeric, target=c.closed_form,
                         std_err=0.0, detail="")
    return table


def _invariants_table():
    table = Table(["check", "passed", "value", "target", "std_err", "detail"])
    worst = 0.0
    for alpha in (0.1, 0.3, 0.5, 0.7, 0.9):
        for theta in (0.5, 2.0):
            for s in (0.01, 0.1, 1.0, 5.0, 20.0):
                one = cdf_v1(Params(alpha, theta), s)
                two = cdf_v1(Params(alpha, 2 * theta), s)
                if one > 0:
                    worst = max(worst, abs(two - one * one) / (one * one))
    table.append(check="doubling", passed=worst <= 1e-10, value=worst, target=1e-10, std_err=0.0, detail="")
    s_grid = np.geomspace(0.01, 50.0, 20)
    t_grid = np.geomspace(0.1, 100.0, 20)
    grid = np.array([[cdf_v1(Params(0.4, t), s) for s in s_grid] for t in t_grid])
    ok_s = bool(np.all(np.diff(grid, axis=1) >= 0))
    ok_t = bool(np.all(np.diff(grid, axis=0) <= 0))
    table.append(check="monotone-in-s", passed=ok_s, value=float(ok_s), target=1.0, std_err=0.0, detail="")
    table.append(check="monotone-in-theta", passed=ok_t, value=float(ok_t), target=1.0, std_err=0.0, detail="")
    return table


def cmd_check(args):
    if args.suite == "consistency":
        if args.seed is None:
            raise ValueError("--seed is required for --suite consistency")
        report = consistency_suite(args.alpha, args.theta, args.reps, RngStream(args.seed), workers=args.workers)
        table = report.table()
    elif args.suite == "contraction":
        table = _contraction_table()
    else:
        table = _invariants_table()
    table.metadata.update(_config(args).header())
    return table


COMMANDS = {
    "sample": cmd_sample,
    "cdf-v1": cmd_cdf_v1,
    "density": cmd_density,
    "rates": cmd_rates,
    "mdp-v1": cmd_mdp_v1,
    "mdp-p1": cmd_mdp_p1,
    "clt-hm": cmd_clt_hm,
    "small-ldp": cmd_small_ldp,
    "check": cmd_check,
}


def _emit(table: Table, args):
    text = to_structured(table) if args.format.startswith("structured") else to_columnar(table)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def dispatch(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        for key, value in GLOBAL_DEFAULTS.items():
            if not hasattr(args, key):
                setattr(args, key, value)
        if args.command in STOCHASTIC and args.seed is None:
            raise UsageError(f"--seed is required for {args.command}")
        table = COMMANDS[args.command](args)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        if exc.table is not None:
            _emit(exc.table, args)
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 2
    except ScanError as exc:
        _emit(exc.table, args)
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (QuadratureError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 2
    _emit(table, args)
    return 0


def main():
    sys.exit(dispatch())

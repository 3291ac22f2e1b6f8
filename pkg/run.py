#!/usr/bin/env python3
"""
OLS Moment Lab - exact and Monte Carlo moments of standardized sums and OLS functionals

Subcommands:
- partitions: list the partitions of r into parts >= 2 with their coefficients
- moment: exact E(Z_n^r), or E(S_n^r) as a polynomial in n
- limits: limiting constants of n(E(Z_n^2k) - (2k-1)!!) and sqrt(n) E(Z_n^(2k+1))
- rate: delta sequences, log-log rate fits and scaled-limit checks
- simulate: seeded Monte Carlo moments of sqrt(n) alpha^T (beta_hat - beta)
- adversarial: divergence reports for the two adversarial designs
- design: diagnostics of a design matrix

Usage:
    python run.py partitions --r 4
    python run.py moment --r 4 --n 10 --profile exp1
    python run.py rate --r 4 --profile exp1 --ngrid 16:16384:x2
    python run.py --format csv adversarial --prop 1 --alpha sqrt --n 16

Exit codes: 0 success, 2 usage error, 3 domain error, 4 numeric failure.
"""

import argparse
import logging
import sys
from typing import Dict, List, Optional

from analysis.designs import (
    FAMILIES,
    Design,
    canonical_design,
    convergent_design,
    diagnostics,
    iid_random_design,
    prop1_design,
    prop2_design,
)
from analysis.laws import ErrorLaw
from analysis.ols import XiSpec
from analysis.rates import (
    delta_sequence,
    limit_adjudication,
    loglog_slope,
    mc_delta_sequence,
    prop1_divergence_report,
    prop2_divergence_report,
    scaled_limit_check,
    xi_delta_sequence,
)
from analysis.simulation import mc_joint_moments, mc_xi_moments, ui_tail_diagnostic
from core.combinat import expansion_coefficient, leading_coefficient, partitions_min2
from core.config import RunConfig, load_settings, setup_logging
from core.errors import DomainError, NumericError
from core.exact import to_fraction
from core.moments import (
    limit_even,
    limit_even_printed,
    limit_odd,
    moment_S,
    moment_S_polynomial,
    moment_Z,
)
from core.output import STDOUT, csv_document, json_document, write_output
from core.profiles import MomentProfile, named_profile
from utils import (
    format_exact,
    format_falling_coefficient,
    format_polynomial,
    parse_float_list,
    parse_int_list,
    parse_ngrid,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_NUMERIC = 4

GLOBAL_OPTIONS = ("config", "dump_config", "threads", "log_level", "format", "output")

logger = logging.getLogger(__name__)


class UsageError(Exception):
    """Bad flag combination detected after parsing."""


def _positive_int(minimum: int):
    def parse(text: str) -> int:
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
        if value < minimum:
            raise argparse.ArgumentTypeError(f"must be >= {minimum}, got {value}")
        return value

    return parse


def _global_options(suppress: bool) -> argparse.ArgumentParser:
    """Options accepted both before and after the subcommand."""
    default = argparse.SUPPRESS if suppress else None
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", default=default, help="JSON run config file")
    parser.add_argument(
        "--dump-config",
        action="store_true",
        default=argparse.SUPPRESS if suppress else False,
        help="print the resolved run config and exit",
    )
    parser.add_argument("--threads", type=_positive_int(1), default=default)
    parser.add_argument(
        "--log-level",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        type=str.upper,
        default=default,
    )
    parser.add_argument("--format", choices=("json", "csv"), default=default)
    parser.add_argument("--output", default=default, help="output path, - for stdout")
    return parser


def _add_profile_options(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--profile", help="normal, uniform, exp1, rademacher or bern(q)"
    )
    parser.add_argument(
        "--moments",
        help="inline standardized moments, e.g. '3=2,4=9' (order=value)",
    )


def _add_design_options(parser: argparse.ArgumentParser, required: bool = False):
    parser.add_argument("--design", choices=FAMILIES[:-1], required=required)
    parser.add_argument("--n", type=_positive_int(2))
    parser.add_argument("--p", type=_positive_int(1), default=1)
    parser.add_argument("--c", type=float, help="convergent design limit")
    parser.add_argument("--amp", type=float, default=0.0, help="convergent amplitude")
    parser.add_argument("--decay", type=float, default=1.0, help="convergent exponent")
    parser.add_argument("--alpha-rule", default="sqrt", help="prop1 alpha rule")
    parser.add_argument("--a", help="prop2 parameter in (0, 1/2)")
    parser.add_argument("--column-law", default="normal")
    parser.add_argument("--intercept", action="store_true")
    parser.add_argument("--design-seed", type=int, default=0)


def _add_law_options(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--law", default="normal", help="error law, e.g. exp1, bern(0.3)"
    )
    parser.add_argument("--sigma2", type=float)


def build_parser() -> argparse.ArgumentParser:
    common = _global_options(suppress=True)
    parser = argparse.ArgumentParser(
        prog="run.py",
        description="Exact and simulated moments of sums and OLS functionals",
        parents=[_global_options(suppress=False)],
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    p = commands.add_parser("partitions", parents=[common], help="list J(r)")
    p.add_argument("--r", type=_positive_int(2), required=True)
    p.add_argument("--n", type=_positive_int(1), help="also evaluate at this n")

    p = commands.add_parser("moment", parents=[common], help="exact E(Z_n^r)")
    p.add_argument("--r", type=_positive_int(0), required=True)
    p.add_argument("--n", type=_positive_int(1))
    _add_profile_options(p)

    p = commands.add_parser("limits", parents=[common], help="limiting constants")
    p.add_argument("--k", default="1:4", help="k values, e.g. 2 or 1:4 or 2,3")
    p.add_argument(
        "--adjudicate",
        type=_positive_int(1),
        metavar="N",
        help="compare both even constants with n Delta_n(2k) at this n",
    )
    _add_profile_options(p)

    p = commands.add_parser("rate", parents=[common], help="convergence rates")
    p.add_argument("--r", type=_positive_int(1), required=True)
    p.add_argument("--ngrid", default="16:16384:x2")
    p.add_argument("--s", help="scaling exponent (default 1 even, 1/2 odd)")
    p.add_argument("--target", help="predicted limit of n^s Delta_n")
    _add_profile_options(p)
    _add_design_options(p)
    _add_law_options(p)
    p.add_argument("--alpha", default="1", help="functional weights, e.g. 1,0")
    p.add_argument("--mc", action="store_true", help="Monte Carlo deltas for xi_n")
    p.add_argument("--reps", type=_positive_int(1), default=100000)
    p.add_argument("--seed", type=_positive_int(0), default=1)

    p = commands.add_parser("simulate", parents=[common], help="Monte Carlo moments")
    _add_design_options(p, required=False)
    _add_law_options(p)
    p.add_argument("--alpha", default="1", help="weights; ';' separates functionals")
    p.add_argument("--r", default="2", help="orders, e.g. 2,3,4")
    p.add_argument("--powers", help="joint powers r_1,..,r_k (one per functional)")
    p.add_argument("--tail", help="thresholds K for the tail diagnostic, e.g. 1,2,5")
    p.add_argument("--ngrid", help="n grid for the tail diagnostic")
    p.add_argument("--beta", help="true coefficients (do not affect xi_n)")
    p.add_argument("--reps", type=_positive_int(1), default=100000)
    p.add_argument("--seed", type=_positive_int(0), default=1)

    p = commands.add_parser("adversarial", parents=[common], help="divergence reports")
    p.add_argument("--prop", type=int, choices=(1, 2), required=True)
    p.add_argument("--alpha", default="sqrt", help="prop 1 alpha rule")
    p.add_argument("--a", default="1/4", help="prop 2 parameter")
    p.add_argument("--mu3", type=float, default=2.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--n", type=_positive_int(2), help="single sample size")
    p.add_argument("--ngrid", help="sample sizes (default 2^4..2^20 or 2^10..2^48)")
    p.add_argument("--verify-up-to", type=int, default=0)
    p.add_argument("--escape-factor", type=float, default=10.0)

    p = commands.add_parser("design", parents=[common], help="design diagnostics")
    _add_design_options(p, required=True)

    parser.command_parsers = commands.choices
    return parser


def _preparse_config(argv: List[str]) -> Optional[RunConfig]:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    return RunConfig.load(known.config) if known.config else None


def parse_arguments(argv: List[str]):
    """
    Parse argv, applying a --config run config as subcommand defaults.

    Returns:
        (args, RunConfig) where the RunConfig holds the resolved parameters
    """
    parser = build_parser()
    run_config = _preparse_config(argv)
    if run_config is not None:
        subparsers = parser.command_parsers
        if run_config.command not in subparsers:
            parser.error(f"unknown command {run_config.command!r} in run config")
        if not any(token in subparsers for token in argv):
            argv = argv + [run_config.command]
        command_parser = subparsers[run_config.command]
        command_parser.set_defaults(**run_config.params)
        for action in command_parser._actions:
            if action.dest in run_config.params:
                action.required = False

    args = parser.parse_args(argv)
    if run_config is not None and run_config.command != args.command:
        parser.error(
            f"run config is for {run_config.command!r}, not {args.command!r}"
        )
    params = {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in GLOBAL_OPTIONS and key != "command"
    }
    return args, RunConfig(args.command, params)


def _profile(args, max_order: int) -> MomentProfile:
    if args.moments:
        moments = {2: 1}
        for item in args.moments.split(","):
            order, _, value = item.partition("=")
            if not value:
                raise UsageError(
                    f"inline moments must look like 'order=value': {item!r}"
                )
            try:
                order = int(order)
            except ValueError:
                raise UsageError(f"moment order must be an integer: {item!r}")
            moments[order] = to_fraction(value.strip())
        return MomentProfile.from_standardized(moments, name="inline")
    if not args.profile:
        raise UsageError("one of --profile or --moments is required")
    return named_profile(args.profile, max_order)


def _design(args) -> Design:
    if not args.design:
        raise UsageError("--design is required")
    n = args.n
    if n is None:
        raise UsageError("--n is required with --design")
    if args.design == "canonical":
        return canonical_design(n)
    if args.design == "convergent":
        if args.c is None:
            raise UsageError("--c is required for a convergent design")
        return convergent_design(n, args.c, args.amp, args.decay)
    if args.design == "prop1":
        return prop1_design(n, args.alpha_rule)
    if args.design == "prop2":
        if args.a is None:
            raise UsageError("--a is required for a prop2 design")
        return prop2_design(n, args.a)
    return iid_random_design(
        n, args.p, args.column_law, args.design_seed, args.intercept
    )


def _specs(args) -> List[XiSpec]:
    design = _design(args)
    law = ErrorLaw.parse(args.law, args.sigma2)
    beta = parse_float_list(args.beta) if getattr(args, "beta", None) else None
    return [
        XiSpec(design, tuple(parse_float_list(alpha)), law, beta)
        for alpha in args.alpha.split(";")
    ]


def _emit(args, settings: Dict, data: Dict, header=None, rows=None, comments=None):
    fmt = args.format or settings["output_format"]
    output = args.output or STDOUT
    threads = args.threads or settings["threads"]
    if fmt == "csv" and header is not None:
        text = csv_document(header, rows, comments, threads=threads)
    else:
        text = json_document(args.command, data, threads=threads)
    write_output(text, output)


def cmd_partitions(args, settings):
    rows, items = [], []
    for p in partitions_min2(args.r):
        lead = leading_coefficient(p)
        item = {
            "parts": list(p.parts),
            "m": p.m,
            "leading_coefficient": lead,
            "coefficient": format_falling_coefficient(lead, p.m),
        }
        if args.n is not None:
            item["value"] = expansion_coefficient(p, args.n)
        items.append(item)
        row = [str(p), p.m, lead, item["coefficient"]]
        if args.n is not None:
            row.append(item["value"])
        rows.append(row)
    header = ["partition", "m", "leading_coefficient", "coefficient"]
    if args.n is not None:
        header.append("value")
    _emit(args, settings, {"r": args.r, "partitions": items}, header, rows)


def cmd_moment(args, settings):
    profile = _profile(args, settings["max_order"])
    profile.require(args.r)
    if args.n is None:
        polynomial = moment_S_polynomial(args.r, profile)
        data = {
            "r": args.r,
            "profile": profile.name,
            "sigma_r_moment_S": format_polynomial(polynomial),
            "coefficients": [str(c) for c in polynomial],
        }
        header = ["r", "power", "coefficient"]
        rows = [[args.r, k, str(c)] for k, c in enumerate(polynomial)]
    else:
        value = moment_Z(args.r, args.n, profile)
        data = {
            "r": args.r,
            "n": args.n,
            "profile": profile.name,
            "exact": format_exact(value),
            "value": float(value),
            "moment_S": format_exact(moment_S(args.r, args.n, profile)),
        }
        header = ["r", "n", "exact", "value"]
        rows = [[args.r, args.n, data["exact"], data["value"]]]
    _emit(args, settings, data, header, rows)


def cmd_limits(args, settings):
    ks = parse_int_list(args.k)
    if not ks or min(ks) < 1:
        raise UsageError(f"k values must be >= 1: {args.k!r}")
    profile = _profile(args, settings["max_order"])
    items, rows = [], []
    for k in ks:
        item = {
            "k": k,
            "even_derived": format_exact(limit_even(k, profile)),
            "even_printed": format_exact(limit_even_printed(k, profile)),
            "odd": format_exact(limit_odd(k, profile)),
        }
        row = [k, item["even_derived"], item["even_printed"], item["odd"]]
        if args.adjudicate and k >= 2:
            item["adjudication"] = limit_adjudication(k, profile, args.adjudicate)
            row.append(item["adjudication"]["extrapolated"])
        elif args.adjudicate:
            row.append("")
        items.append(item)
        rows.append(row)
    header = ["k", "even_derived", "even_printed", "odd"]
    if args.adjudicate:
        header.append("observed")
    _emit(args, settings, {"profile": profile.name, "limits": items}, header, rows)


def _default_target(r: int, profile: MomentProfile):
    if r % 2 == 0:
        return limit_even(r // 2, profile) if r >= 2 else 0
    return limit_odd((r - 1) // 2, profile) if r >= 3 else 0


def cmd_rate(args, settings):
    grid = parse_ngrid(args.ngrid)
    s = to_fraction(args.s) if args.s else None
    if args.design:
        args.n = args.n or grid[0]
        spec = _specs(args)[0]
        if args.mc:
            threads = args.threads or settings["threads"]
            table = mc_delta_sequence(
                spec, args.r, grid, args.reps, args.seed, threads, s
            )
        else:
            table = xi_delta_sequence(spec, args.r, grid, s)
        target = float(to_fraction(args.target)) if args.target else None
    else:
        profile = _profile(args, settings["max_order"])
        table = delta_sequence(args.r, profile, grid, s)
        if args.target:
            target = to_fraction(args.target)
        else:
            target = _default_target(args.r, profile)

    data = {"table": table.to_dict()}
    comments = {"r": args.r, "source": table.source, "scaling": str(table.scaling)}
    if table.identically_zero:
        logger.warning("identically zero deltas; no rate fit")
    else:
        try:
            fit = loglog_slope(table)
            data["fit"] = fit.to_dict()
            comments["fit"] = fit.to_dict()
        except DomainError as e:
            logger.warning(f"no rate fit: {e}")
    if target is not None:
        report = scaled_limit_check(table, table.scaling, target)
        data["scaled_limit"] = report.to_dict()

    header = ["n", "delta", "scaled", "std_error"]
    _emit(args, settings, data, header, table.csv_rows(), comments)


def cmd_simulate(args, settings):
    threads = args.threads or settings["threads"]
    if not args.design:
        raise UsageError("--design is required")
    specs = _specs(args)

    if args.powers:
        powers = parse_int_list(args.powers)
        estimate = mc_joint_moments(specs, powers, args.reps, args.seed, threads)
        data = {
            "spec": [spec.to_dict() for spec in specs],
            "powers": powers,
            "reps": args.reps,
            "seed": args.seed,
            "estimates": [estimate.to_dict()],
        }
        header = ["powers", "value", "std_error"]
        rows = [[" ".join(map(str, powers)), estimate.estimate, estimate.std_error]]
    elif args.tail:
        orders = parse_float_list(args.r)
        grid = parse_ngrid(args.ngrid) if args.ngrid else None
        thresholds = parse_float_list(args.tail)
        table = ui_tail_diagnostic(
            specs[0], orders[0], thresholds, args.reps, args.seed, grid, threads
        )
        data = {"spec": specs[0].to_dict(), "reps": args.reps, "seed": args.seed}
        data.update(table.to_dict())
        header = ["n", "K", "value", "std_error"]
        rows = [
            [n, K, e.estimate, e.std_error]
            for n, row in zip(table.n_grid, table.estimates)
            for K, e in zip(table.thresholds, row)
        ]
    else:
        if len(specs) != 1:
            raise UsageError("several functionals need --powers")
        orders = parse_int_list(args.r)
        estimates = mc_xi_moments(specs[0], orders, args.reps, args.seed, threads)
        data = {
            "spec": specs[0].to_dict(),
            "orders": orders,
            "reps": args.reps,
            "seed": args.seed,
            "estimates": [e.to_dict() for e in estimates],
        }
        header = ["r", "value", "std_error", "exact"]
        rows = [
            [e.order, e.estimate, e.std_error, e.references.get("exact", "")]
            for e in estimates
        ]
    _emit(args, settings, data, header, rows)


def cmd_adversarial(args, settings):
    if args.n is not None and args.ngrid:
        raise UsageError("give either --n or --ngrid, not both")
    if args.n is not None:
        grid = [args.n]
    elif args.ngrid:
        grid = parse_ngrid(args.ngrid)
    else:
        grid = parse_ngrid("16:1048576:x2" if args.prop == 1 else f"1024:{2 ** 48}:x2")

    if args.prop == 1:
        report = prop1_divergence_report(
            args.alpha, grid, args.sigma2, args.verify_up_to, args.escape_factor
        )
    else:
        report = prop2_divergence_report(args.a, grid, args.mu3, args.escape_factor)
    header = ["n", "n_used", "value", "direct"]
    comments = {
        "prop": args.prop,
        "monotone": report.monotone,
        "decreasing": report.decreasing,
        "escape": report.escape,
    }
    if report.fitted_exponent is not None:
        comments["fitted_exponent"] = report.fitted_exponent
        comments["raw_exponent"] = report.raw_exponent
        comments["candidates"] = report.candidates
    _emit(args, settings, report.to_dict(), header, report.csv_rows(), comments)


def cmd_design(args, settings):
    design = _design(args)
    result = diagnostics(design)
    limit = design.limit_gram()
    data = {
        "design": design.to_dict(),
        "diagnostics": result.to_dict(),
        "limit_gram": None if limit is None else limit.tolist(),
    }
    header = ["n", "p", "noether_max", "hat_trace"]
    rows = [[design.n, design.p, result.noether_max, result.hat_trace]]
    _emit(args, settings, data, header, rows)


COMMANDS = {
    "partitions": cmd_partitions,
    "moment": cmd_moment,
    "limits": cmd_limits,
    "rate": cmd_rate,
    "simulate": cmd_simulate,
    "adversarial": cmd_adversarial,
    "design": cmd_design,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand and return the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args, run_config = parse_arguments(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    except DomainError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        settings = load_settings()
        setup_logging(args.log_level or settings["log_level"], settings["log_file"])

        if args.dump_config:
            write_output(run_config.dumps() + "\n", STDOUT)
            return EXIT_OK

        logger.info("=" * 60)
        logger.info(f"Starting {args.command}")
        logger.info("=" * 60)
        COMMANDS[args.command](args, settings)
        logger.info(f"{args.command} finished")
        return EXIT_OK

    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as e:
        logger.debug("numeric failure", exc_info=True)
        print(f"numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as e:
        logger.debug("domain error", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except KeyboardInterrupt:
        print("Execution interrupted by user", file=sys.stderr)
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

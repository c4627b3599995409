"""Command-line front end.

Subcommands::

    collapsekit scenarios list
    collapsekit scenarios run NAME [--json PATH] [--seed N]
    collapsekit check --config PATH [--json PATH]
    collapsekit measure --config PATH --at x[,y][,w]
    collapsekit regress --family F --n N --seed S [--gamma G] [--theta T]
                        [--json PATH]

Exit codes: 0 all checks passed; 1 a check failed (a statistical
finding, not an error); 2 usage or configuration problem; 3 numerical
failure (an Indeterminate verdict or non-converging quadrature).
"""

from __future__ import annotations

import argparse
import sys

from . import __version__, scenarios
from .collapsibility import check_average, check_simple, probe_conditions
from .config import load_config
from .errors import CollapseKitError, ConfigError, NumericalError
from .measures import MeasureSpec, ddf, edf, led, mdi, mdi_binary
from .regression import ContinuousW, DiscreteW, RegressionSpec, check_beta_collapsibility
from . import distributions as dist
from .report import (
    check_report_doc,
    emit_json,
    emit_report,
    scenario_report_doc,
    write_atomic,
)

EXIT_PASS = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    """Argument parser that raises instead of exiting, so main() owns
    the exit-code contract."""

    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="collapsekit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"collapsekit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sc = sub.add_parser("scenarios", help="list or run catalog scenarios")
    sc_sub = sc.add_subparsers(dest="scenario_command", required=True)
    sc_sub.add_parser("list", help="print the scenario names")
    run_p = sc_sub.add_parser("run", help="run one scenario's expected checks")
    run_p.add_argument("name")
    run_p.add_argument("--json", metavar="PATH", help="write the JSON report here")
    run_p.add_argument("--seed", type=int, default=0)

    ck = sub.add_parser("check", help="run a collapsibility check from a config file")
    ck.add_argument("--config", required=True, metavar="PATH")
    ck.add_argument("--json", metavar="PATH")

    me = sub.add_parser("measure", help="evaluate the configured measure at a point")
    me.add_argument("--config", required=True, metavar="PATH")
    me.add_argument("--at", required=True, metavar="x[,y][,w]")

    rg = sub.add_parser("regress", help="simulate and test coefficient collapsibility")
    rg.add_argument("--family", required=True, choices=["linear", "logistic", "poisson", "negbin"])
    rg.add_argument("--n", type=int, required=True)
    rg.add_argument("--seed", type=int, default=0)
    rg.add_argument("--gamma", type=float, default=0.0)
    rg.add_argument("--theta", type=float, default=2.0)
    rg.add_argument("--json", metavar="PATH")
    return parser


def _cmd_scenarios_list() -> int:
    for sc in scenarios.catalog():
        print(f"{sc.name:24s} {sc.description.splitlines()[0][:70]}")
    return EXIT_PASS


def _cmd_scenarios_run(args) -> int:
    report = scenarios.run(args.name, {"seed": args.seed})
    doc = scenario_report_doc(report)
    if args.json:
        write_atomic(args.json, emit_json(doc))
    print(emit_report(doc, "text"), end="")
    if report.indeterminate:
        return EXIT_NUMERICAL
    return EXIT_PASS if report.passed else EXIT_CHECK_FAILED


def _cmd_check(args) -> int:
    cfg = load_config(args.config)
    mspec = MeasureSpec()
    if cfg.mode == "simple":
        verdict = check_simple(cfg.measure, cfg.model, cfg.grid, mspec)
    else:
        verdict = check_average(
            cfg.measure, cfg.model, cfg.grid, mspec, with_residual=cfg.measure == "EDF"
        )
    probes = probe_conditions(cfg.model, cfg.grid, mspec)
    doc = check_report_doc({"config": args.config, "measure": cfg.measure, "mode": cfg.mode}, verdict, probes, 0)
    if args.json:
        write_atomic(args.json, emit_json(doc))
    if cfg.output_path:
        write_atomic(cfg.output_path, emit_report(doc, cfg.output_format))
    print(emit_report(doc, "text"), end="")
    if verdict.classification == "Indeterminate":
        return EXIT_NUMERICAL
    return EXIT_PASS if doc["pass"] else EXIT_CHECK_FAILED


def _parse_at(text: str, measure: str):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"--at expects comma-separated numbers, got {text!r}")
    needs_y = measure in ("MDI", "DDF")
    if needs_y:
        if len(values) == 2:
            return values[0], values[1], None
        if len(values) == 3:
            return values[0], values[1], values[2]
        raise ConfigError(f"{measure} needs --at x,y[,w]")
    if len(values) == 1:
        return values[0], None, None
    if len(values) == 2:
        return values[0], None, values[1]
    raise ConfigError(f"{measure} needs --at x[,w]")


def _cmd_measure(args) -> int:
    cfg = load_config(args.config)
    x, y, w = _parse_at(args.at, cfg.measure)
    mspec = MeasureSpec()
    fn = {
        "EDF": lambda: edf(cfg.model, x, w, mspec),
        "LED": lambda: led(cfg.model, x, w, mspec),
        "MDI": lambda: mdi(cfg.model, y, x, w, mspec),
        "DDF": lambda: ddf(cfg.model, y, x, w, mspec),
        "MDI-binary": lambda: mdi_binary(cfg.model, x, w, mspec),
    }[cfg.measure]
    result = fn()
    where = f"x={x:g}" + (f", y={y:g}" if y is not None else "") + (
        f", w={w:g}" if w is not None else " (marginal)"
    )
    print(f"{cfg.measure} at {where}: {result.value:.10g} ± {result.err_estimate:.2g}")
    return EXIT_PASS


def _cmd_regress(args) -> int:
    if args.family == "negbin":
        spec = RegressionSpec(
            family="negbin",
            covariate=ContinuousW(lambda x: dist.gamma(args.theta, args.theta)),
            alpha=0.1,
            beta=0.3,
            gamma=args.gamma,
            theta=args.theta,
        )
    elif args.family == "linear":
        # W | x ~ N(x, 1) makes the covariate a real confounder, so a
        # nonzero --gamma produces an actual collapsibility failure.
        spec = RegressionSpec(
            family="linear",
            covariate=ContinuousW(lambda x: dist.normal(x, 1.0)),
            alpha=0.1,
            beta=0.3,
            gamma=args.gamma,
            sd=1.0,
        )
    else:
        spec = RegressionSpec(
            family=args.family,
            covariate=ContinuousW(lambda x: dist.normal(x, 1.0)),
            alpha=0.1,
            beta=0.3,
            gamma=args.gamma,
        )
    report = check_beta_collapsibility(spec, args.n, args.seed, (-1.0, 0.0, 1.0))
    doc = {
        "schema_version": 1,
        "tool": "collapsekit",
        "tool_version": __version__,
        "kind": "regress",
        "identity": {
            "family": args.family,
            "n": args.n,
            "gamma": args.gamma,
            "theta": args.theta if args.family == "negbin" else None,
        },
        "seed": args.seed,
        "pass": report.collapsible,
        "checks": [
            {
                "name": f"expected_beta_vs_marginal_at_x={p['x']}",
                "passed": p["within_band"],
                "expected": f"gap <= {p['band']:.4g}",
                "actual": f"gap {p['gap']:.4g} (cond {p['expected_conditional_beta']:.4f}, marg {p['marginal_beta']:.4f})",
                "provenance": "simulation",
                "gap": p["gap"],
            }
            for p in report.per_x
        ],
        "probes": {},
        "verdicts": [],
        "notes": [
            f"conditional slopes: {report.conditional_slopes}",
            f"unconditional average slope: {report.unconditional_average:.4f}",
            f"reversal: {report.reversal}",
        ],
    }
    if args.json:
        write_atomic(args.json, emit_json(doc))
    print(emit_report(doc, "text"), end="")
    return EXIT_PASS if report.collapsible else EXIT_CHECK_FAILED


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "scenarios":
            if args.scenario_command == "list":
                return _cmd_scenarios_list()
            return _cmd_scenarios_run(args)
        if args.command == "check":
            return _cmd_check(args)
        if args.command == "measure":
            return _cmd_measure(args)
        return _cmd_regress(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except CollapseKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Subcommands::

    solve      solve one instance, certify it, write solution/profits/report
    sweep      run a one-parameter grid study and write its CSV
    verify     solve and cross-check against the independent oracles
    reproduce  recompute a published table or figure and compare
    validate   parse a config file and report structural violations

Exit codes: 0 = converged and certified (or comparison passed), 1 = parse or
validation failure (bad config, unknown design/table/figure), 2 =
non-convergence, 3 = certification or comparison failure.

The ``EIR_EQ_LOG`` environment variable ({error, info, debug}, default
error) sets logging verbosity. Flags override config-file values.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import assemble, evaluate_profits, solution_to_dict
from .data import (
    DesignKind,
    InvalidInstanceError,
    MarketDesign,
    MarketInstance,
    load_instance,
    validate,
)
from .experiments import (
    SweepParameter,
    SweepSpec,
    default_figure_sweep,
    emit_figure_data,
    reproduce_table,
    run_sweep,
    solve_with_continuation,
)
from .oracle import check_equilibrium, money_balance, solve_welfare_lp
from .solver import SolveOptions, SolveStatus

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2
EXIT_NOT_CERTIFIED = 3

CERTIFY_GAP_TOL = 1e-6
CERTIFY_MONEY_TOL = 1e-8

log = logging.getLogger("eirmarket")


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the documented code."""

    def error(self, message: str) -> None:  # noqa: D401 - argparse hook
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _configure_logging() -> None:
    level_name = os.environ.get("EIR_EQ_LOG", "error").strip().lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        level_name = "error"
    logging.basicConfig(
        level=levels[level_name],
        format="%(levelname)s %(name)s: %(message)s",
    )


def parse_grid(text: str) -> tuple[float, ...]:
    """Parse a ``start:stop:step`` grid, inclusive of both endpoints."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ValueError(f"grid parts must be numbers, got {text!r}") from None
    if step == 0.0:
        raise ValueError("grid step must be nonzero")
    if (stop - start) * step < 0.0:
        raise ValueError(f"grid step {step} never reaches {stop} from {start}")
    n = int(round((stop - start) / step))
    values = [start + k * step for k in range(n + 1)]
    slack = abs(step) * 1e-9
    values = [v for v in values if min(start, stop) - slack <= v <= max(start, stop) + slack]
    return tuple(round(v, 12) for v in values)


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="instance JSON file")
    p.add_argument(
        "--design",
        choices=[k.value for k in DesignKind],
        help="override the config's market design",
    )
    p.add_argument("--k", type=float, help="override the option strike price")
    p.add_argument("--fer", type=float, help="override the forecast requirement")
    p.add_argument(
        "--alpha", type=float, help="set every generator's risk level"
    )
    p.add_argument(
        "--alpha-demand", type=float, help="set the demand agent's risk level"
    )
    p.add_argument("--tol", type=float, help="convergence tolerance")
    p.add_argument("--seed", type=int, help="restart sampling seed")
    p.add_argument("--restarts", type=int, help="number of perturbed restarts")
    p.add_argument(
        "--out", type=Path, default=Path("."), help="output directory"
    )
    p.add_argument(
        "--format",
        choices=["json", "csv"],
        default="json",
        help="format for comparison reports",
    )
    p.add_argument(
        "--jobs", type=int, default=1, help="worker processes for sweep rows"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="eirmarket",
        description="stochastic equilibrium models of two-settlement "
        "electricity markets with risk-averse agents",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_solve = sub.add_parser("solve", help="solve one instance and certify it")
    _add_common_flags(p_solve)

    p_sweep = sub.add_parser("sweep", help="run a one-parameter grid study")
    _add_common_flags(p_sweep)
    p_sweep.add_argument(
        "--sweep",
        choices=["alpha", "alpha-demand", "k"],
        required=True,
        help="which parameter the grid varies",
    )
    p_sweep.add_argument(
        "--grid", required=True, help="grid as start:stop:step (inclusive)"
    )
    p_sweep.add_argument(
        "--designs",
        help="comma-separated designs to run (default: the config's design)",
    )

    p_verify = sub.add_parser(
        "verify", help="solve and cross-check against the independent oracles"
    )
    _add_common_flags(p_verify)

    p_repr = sub.add_parser(
        "reproduce", help="recompute a published table or figure"
    )
    _add_common_flags(p_repr)
    group = p_repr.add_mutually_exclusive_group(required=True)
    group.add_argument("--table", type=int, help="published table id")
    group.add_argument("--figure", type=int, help="published figure id")

    p_val = sub.add_parser("validate", help="check a config file")
    _add_common_flags(p_val)

    return parser


def _load_and_override(args: argparse.Namespace) -> MarketInstance:
    if args.config is None:
        raise InvalidInstanceError(["--config is required for this command"])
    instance = load_instance(args.config)
    design = instance.design
    if args.design is not None:
        kind = DesignKind(args.design)
        design = MarketDesign(
            kind=kind, strike=design.strike, forecast=design.forecast
        )
    if args.k is not None:
        design = dataclasses.replace(design, strike=float(args.k))
    if args.fer is not None:
        design = dataclasses.replace(design, forecast=float(args.fer))
    instance = instance.with_design(design)
    if args.alpha is not None:
        instance = instance.with_all_generator_alpha(args.alpha)
    if getattr(args, "alpha_demand", None) is not None:
        instance = instance.with_demand_alpha(args.alpha_demand)
    violations = validate(instance)
    if violations:
        raise InvalidInstanceError(violations)
    return instance


def _solve_options(args: argparse.Namespace) -> SolveOptions:
    defaults = SolveOptions()
    return SolveOptions(
        tol=args.tol if args.tol is not None else defaults.tol,
        seed=args.seed if args.seed is not None else defaults.seed,
        restarts=args.restarts if args.restarts is not None else defaults.restarts,
    )


def _profits_csv(model, z) -> str:
    profits = evaluate_profits(model, z)
    S = model.layout.n_scenarios
    names = [g.name or f"g{i + 1}" for i, g in enumerate(model.instance.generators)]
    lines = [
        ",".join(
            ["agent", *(f"profit_s{s + 1}" for s in range(S)), "expected", "cvar"]
        )
    ]
    for i, name in enumerate(names):
        row = [name]
        row += [repr(float(x)) for x in profits.generator_profit[i]]
        row.append(repr(float(profits.expected_generator_profit[i])))
        row.append(repr(float(profits.cvar_generator_profit[i])))
        lines.append(",".join(row))
    demand_row = ["demand"]
    demand_row += [repr(float(x)) for x in profits.demand_profit]
    demand_row.append(repr(float(profits.expected_demand_profit)))
    demand_row.append(repr(float(profits.cvar_demand_profit)))
    lines.append(",".join(demand_row))
    arb_row = ["arbitrage"]
    arb_row += [repr(float(x)) for x in profits.arbitrage_profit]
    arb_row.append(repr(float(model.instance.scenarios.probability @ profits.arbitrage_profit)))
    arb_row.append("")
    lines.append(",".join(arb_row))
    return "\n".join(lines) + "\n"


def _certification(model, z) -> dict:
    br = check_equilibrium(model, z, tol=CERTIFY_GAP_TOL)
    mb = money_balance(model, z)
    return {
        "best_response_gap": float(br.max_gap),
        "best_response_certified": bool(br.certified(CERTIFY_GAP_TOL)),
        "money_balance_residual": float(mb.max_abs),
        "money_balanced": bool(mb.balanced(CERTIFY_MONEY_TOL)),
        "certified": bool(
            br.certified(CERTIFY_GAP_TOL) and mb.balanced(CERTIFY_MONEY_TOL)
        ),
    }


def _report_dict(report, certification: dict | None) -> dict:
    payload = {
        "status": report.status.value,
        "complementarity_error": float(report.complementarity_error),
        "iterations": int(report.iterations),
        "restart_index": int(report.restart_index),
        "attempts": [
            {
                "restart_index": int(a.restart_index),
                "status": a.status.value,
                "complementarity_error": float(a.complementarity_error),
                "iterations": int(a.iterations),
            }
            for a in report.attempts
        ],
    }
    if certification is not None:
        payload["certification"] = certification
    return payload


def _cmd_solve(args: argparse.Namespace) -> int:
    instance = _load_and_override(args)
    options = _solve_options(args)
    model, z, report = solve_with_continuation(instance, options)
    args.out.mkdir(parents=True, exist_ok=True)
    if report.status is not SolveStatus.CONVERGED:
        (args.out / "solve_report.json").write_text(
            json.dumps(_report_dict(report, None), indent=2) + "\n"
        )
        log.error("solve did not converge: %s", report.status.value)
        return EXIT_NOT_CONVERGED
    certification = _certification(model, z)
    (args.out / "solution.json").write_text(
        json.dumps(solution_to_dict(model, z), indent=2) + "\n"
    )
    (args.out / "profits.csv").write_text(_profits_csv(model, z))
    (args.out / "solve_report.json").write_text(
        json.dumps(_report_dict(report, certification), indent=2) + "\n"
    )
    log.info(
        "converged in %d iterations, gap %.2e",
        report.iterations,
        certification["best_response_gap"],
    )
    return EXIT_OK if certification["certified"] else EXIT_NOT_CERTIFIED


def _cmd_verify(args: argparse.Namespace) -> int:
    instance = _load_and_override(args)
    options = _solve_options(args)
    model, z, report = solve_with_continuation(instance, options)
    args.out.mkdir(parents=True, exist_ok=True)
    payload = _report_dict(report, None)
    code = EXIT_NOT_CONVERGED
    if report.status is SolveStatus.CONVERGED:
        certification = _certification(model, z)
        payload["certification"] = certification
        risk_neutral = instance.demand.risk_alpha == 1.0 and all(
            g.risk_alpha == 1.0 for g in instance.generators
        )
        if risk_neutral:
            welfare = solve_welfare_lp(instance)
            if welfare.rt_prices is not None:
                L = model.layout
                payload["welfare_price_check"] = {
                    "max_rt_price_delta": float(
                        np.max(np.abs(z[L.rt_price] - welfare.rt_prices))
                    ),
                    "da_price_delta": float(
                        abs(float(z[L.da_price]) - welfare.da_price)
                    ),
                }
        code = EXIT_OK if certification["certified"] else EXIT_NOT_CERTIFIED
    (args.out / "verify_report.json").write_text(
        json.dumps(payload, indent=2) + "\n"
    )
    print(json.dumps(payload, indent=2))
    return code


_SWEEP_PARAMS = {
    "alpha": SweepParameter.ALPHA_ALL_GENERATORS,
    "alpha-demand": SweepParameter.ALPHA_DEMAND,
    "k": SweepParameter.STRIKE_PRICE,
}


def _cmd_sweep(args: argparse.Namespace) -> int:
    instance = _load_and_override(args)
    try:
        grid = parse_grid(args.grid)
    except ValueError as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.designs:
        try:
            designs = tuple(
                DesignKind(d.strip()) for d in args.designs.split(",") if d.strip()
            )
        except ValueError:
            print(f"error: unknown design in {args.designs!r}", file=sys.stderr)
            return EXIT_INVALID
        if not designs:
            print("error: --designs is empty", file=sys.stderr)
            return EXIT_INVALID
    else:
        designs = (instance.design.kind,)
    try:
        spec = SweepSpec(
            base=instance,
            parameter=_SWEEP_PARAMS[args.sweep],
            grid=grid,
            designs=designs,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    result = run_sweep(spec, options=_solve_options(args), jobs=args.jobs)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"sweep_{spec.parameter.value}.csv"
    result.write_csv(path)
    n_bad = sum(1 for r in result.rows if not r.converged)
    n_uncert = sum(1 for r in result.rows if r.converged and not r.certified)
    print(f"wrote {path} with {len(result.rows)} rows")
    if n_bad:
        print(f"{n_bad} rows did not converge", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    if n_uncert:
        print(f"{n_uncert} rows failed certification", file=sys.stderr)
        return EXIT_NOT_CERTIFIED
    return EXIT_OK


def _cmd_reproduce(args: argparse.Namespace) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    overrides = {}
    if args.k is not None:
        overrides["k"] = args.k
    if args.fer is not None:
        overrides["fer"] = args.fer
    if args.table is not None:
        try:
            comparison = reproduce_table(args.table, overrides or None)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        print(comparison.to_text())
        path = args.out / f"table_{comparison.table_id}_comparison.csv"
        path.write_text(comparison.to_csv())
        if args.format == "json":
            jpath = args.out / f"table_{comparison.table_id}_comparison.json"
            jpath.write_text(
                json.dumps(
                    {
                        "table_id": comparison.table_id,
                        "title": comparison.title,
                        "source": comparison.source,
                        "passed": comparison.passed,
                        "notes": list(comparison.notes),
                        "cells": [dataclasses.asdict(c) for c in comparison.cells],
                    },
                    indent=2,
                )
                + "\n"
            )
        return EXIT_OK if comparison.passed else EXIT_NOT_CERTIFIED
    try:
        spec = default_figure_sweep(args.figure)
        sweep = run_sweep(spec, options=_solve_options(args), jobs=args.jobs)
        figure = emit_figure_data(args.figure, sweep=sweep)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    path = args.out / f"figure_{figure.figure_id}.csv"
    path.write_text(figure.to_csv())
    print(f"wrote {path}")
    n_bad = sum(1 for r in sweep.rows if not r.converged)
    if n_bad:
        print(f"{n_bad} sweep rows did not converge", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    n_uncert = sum(1 for r in sweep.rows if not r.certified)
    if n_uncert:
        print(f"{n_uncert} sweep rows failed certification", file=sys.stderr)
        return EXIT_NOT_CERTIFIED
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    if args.config is None:
        print("error: --config is required", file=sys.stderr)
        return EXIT_INVALID
    try:
        instance = load_instance(args.config)
    except InvalidInstanceError as exc:
        for violation in exc.violations:
            print(f"violation: {violation}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    violations = validate(instance)
    if violations:
        for violation in violations:
            print(f"violation: {violation}", file=sys.stderr)
        return EXIT_INVALID
    print(
        f"valid: {instance.n_generators} generators, "
        f"{instance.n_scenarios} scenarios, design {instance.design.kind.value}"
    )
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "solve": _cmd_solve,
        "sweep": _cmd_sweep,
        "verify": _cmd_verify,
        "reproduce": _cmd_reproduce,
        "validate": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except InvalidInstanceError as exc:
        for violation in exc.violations:
            print(f"violation: {violation}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

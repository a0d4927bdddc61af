"""Parameter sweeps, published-table comparisons, and figure data series.

Three entry points:

* :func:`run_sweep` — solve a grid of instances that differ in one parameter
  (every generator's risk level, the demand agent's risk level, or the
  option strike price) across one or more market designs, certify every
  converged row against the best-response oracle, and return a tabular
  result whose CSV headers name the row fields exactly.
* :func:`reproduce_table` — recompute one of the published numerical study
  tables and report computed vs published values with per-cell deltas and a
  pass/fail verdict under that table's tolerance policy.
* :func:`emit_figure_data` — format sweep output as plottable ``(x,
  series...)`` CSV for the published figures. No plotting happens here.

Solving strategy per row: each grid point is solved independently (so rows
can run in parallel and results are deterministic regardless of worker
count), first from the canonical start, then — for risk-averse instances
that the canonical start cannot reach — by a risk-parameter continuation
that walks every agent's risk level from 1 down to its target value,
warm-starting each step from the last, and finally by the solver's own
multistart. Whatever the route, a row only counts as equilibrium once the
independent oracle certifies it.
"""

from __future__ import annotations

import dataclasses
import io
import math
import multiprocessing
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np

from .assembly import MarketModel, assemble, evaluate_profits
from .data import (
    DesignKind,
    MarketDesign,
    MarketInstance,
    single_generator_study_instance,
    two_generator_study_instance,
)
from .oracle import check_equilibrium, money_balance
from .solver import SolveOptions, SolveReport, SolveStatus, solve

__all__ = [
    "SweepParameter",
    "SweepSpec",
    "SweepRow",
    "SweepResult",
    "run_sweep",
    "solve_with_continuation",
    "CellComparison",
    "TableComparison",
    "reproduce_table",
    "published_table_ids",
    "FigureData",
    "emit_figure_data",
    "DEFAULT_TWO_GEN_FER",
    "DEFAULT_TWO_GEN_STRIKE",
]

#: The two-generator studies never state the reserve requirement; all
#: requirement-relative claims are requirement-independent, and 90 MWh (the
#: single-generator value) is the documented default.
DEFAULT_TWO_GEN_FER = 90.0
#: Strike price used by the two-generator risk-level studies.
DEFAULT_TWO_GEN_STRIKE = 50.0

#: Oracle certification thresholds applied to every converged row.
CERTIFY_GAP_TOL = 1e-6
CERTIFY_MONEY_TOL = 1e-8

#: Largest per-step change of any agent's risk level during continuation,
#: and the smallest step worth attempting before giving up.
CASCADE_STEP = 0.05
CASCADE_MIN_STEP = 1e-3


class SweepParameter(str, Enum):
    """Which scalar the sweep varies."""

    ALPHA_ALL_GENERATORS = "alpha_all_generators"
    ALPHA_DEMAND = "alpha_demand"
    STRIKE_PRICE = "strike_price"


@dataclass(frozen=True)
class SweepSpec:
    """A one-parameter grid study over one or more market designs."""

    base: MarketInstance
    parameter: SweepParameter
    grid: tuple[float, ...]
    designs: tuple[DesignKind, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        object.__setattr__(self, "designs", tuple(self.designs))
        if not self.grid:
            raise ValueError("sweep grid must be nonempty")
        if not self.designs:
            raise ValueError("sweep needs at least one design")
        if self.parameter in (
            SweepParameter.ALPHA_ALL_GENERATORS,
            SweepParameter.ALPHA_DEMAND,
        ):
            bad = [v for v in self.grid if not 0.0 < v <= 1.0]
            if bad:
                raise ValueError(f"risk levels must lie in (0, 1], got {bad}")
        else:
            bad = [v for v in self.grid if v < 0.0]
            if bad:
                raise ValueError(f"strike prices must be >= 0, got {bad}")


@dataclass(frozen=True)
class SweepRow:
    """Solved quantities at one grid point under one design."""

    design: str
    parameter: str
    grid_value: float
    status: str
    certified: bool
    da_price: float
    expected_rt_price: float
    premium_price: float
    advance_fuel_total: float
    da_sale_total: float
    option_sale_total: float
    demand_da_purchase: float
    generator_cvar_profit: tuple[float, ...]
    demand_cvar_profit: float
    complementarity_error: float
    best_response_gap: float
    money_balance_residual: float

    @property
    def converged(self) -> bool:
        return self.status == SolveStatus.CONVERGED.value


def _row_header(n_generators: int) -> list[str]:
    header: list[str] = []
    for f in dataclasses.fields(SweepRow):
        if f.name == "generator_cvar_profit":
            header.extend(
                f"generator_cvar_profit_{i + 1}" for i in range(n_generators)
            )
        else:
            header.append(f.name)
    return header


def _row_values(row: SweepRow) -> list[str]:
    values: list[str] = []
    for f in dataclasses.fields(SweepRow):
        v = getattr(row, f.name)
        if f.name == "generator_cvar_profit":
            values.extend(repr(float(x)) for x in v)
        elif isinstance(v, bool):
            values.append(str(v).lower())
        elif isinstance(v, float):
            values.append(repr(v))
        else:
            values.append(str(v))
    return values


@dataclass(frozen=True)
class SweepResult:
    """One row per grid point per design, ordered by design then grid index."""

    parameter: str
    grid: tuple[float, ...]
    designs: tuple[str, ...]
    rows: tuple[SweepRow, ...]

    def rows_for(self, design: DesignKind | str) -> tuple[SweepRow, ...]:
        key = design.value if isinstance(design, DesignKind) else str(design)
        return tuple(r for r in self.rows if r.design == key)

    def to_csv(self) -> str:
        n_gens = max(len(r.generator_cvar_profit) for r in self.rows)
        out = io.StringIO()
        out.write(",".join(_row_header(n_gens)) + "\n")
        for row in self.rows:
            out.write(",".join(_row_values(row)) + "\n")
        return out.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv())


def _design_variant(instance: MarketInstance, kind: DesignKind) -> MarketInstance:
    """The same economy under another design, keeping strike/requirement."""
    base = instance.design
    if kind is DesignKind.EMO:
        design = MarketDesign(kind=DesignKind.EMO)
    elif kind is DesignKind.EMO_LF:
        design = MarketDesign(kind=DesignKind.EMO_LF, forecast=base.forecast)
    else:
        design = MarketDesign(
            kind=DesignKind.EMIR, strike=base.strike, forecast=base.forecast
        )
    return instance.with_design(design)


def _with_parameter(
    instance: MarketInstance, parameter: SweepParameter, value: float
) -> MarketInstance:
    if parameter is SweepParameter.ALPHA_ALL_GENERATORS:
        return instance.with_all_generator_alpha(value)
    if parameter is SweepParameter.ALPHA_DEMAND:
        return instance.with_demand_alpha(value)
    if instance.design.kind is DesignKind.EMIR:
        return instance.with_design(instance.design.with_strike(value))
    return instance


def _risk_targets(instance: MarketInstance) -> np.ndarray:
    return np.array(
        [g.risk_alpha for g in instance.generators] + [instance.demand.risk_alpha]
    )


def _instance_at_risk_fraction(
    instance: MarketInstance, t: float
) -> MarketInstance:
    """Interpolate every agent's risk level between 1 (t=0) and target (t=1)."""
    gens = [
        dataclasses.replace(g, risk_alpha=1.0 + t * (g.risk_alpha - 1.0))
        for g in instance.generators
    ]
    demand = dataclasses.replace(
        instance.demand,
        risk_alpha=1.0 + t * (instance.demand.risk_alpha - 1.0),
    )
    return dataclasses.replace(instance, generators=gens, demand=demand)


def solve_with_continuation(
    instance: MarketInstance,
    options: SolveOptions | None = None,
) -> tuple[MarketModel, np.ndarray, SolveReport]:
    """Solve an instance, falling back to risk-parameter continuation.

    Order of attempts: (1) canonical start, no restarts; (2) if the instance
    is risk-averse, walk every agent's risk level from 1 to its target in
    steps bounded by :data:`CASCADE_STEP`, warm-starting each solve from the
    previous step's solution and bisecting any step that fails; (3) the
    solver's own multistart with ``options.restarts`` perturbed starts.
    The returned report describes the final attempt.
    """
    options = options or SolveOptions()
    single = dataclasses.replace(options, restarts=0)
    model = assemble(instance)

    z, report = solve(model.system, single)
    if report.status is SolveStatus.CONVERGED:
        return model, z, report

    deviation = float(np.max(np.abs(_risk_targets(instance) - 1.0)))
    if deviation > 0.0:
        steps = max(1, math.ceil(deviation / CASCADE_STEP))
        pending = [k / steps for k in range(1, steps + 1)]
        t_prev, z_prev = 0.0, None
        failed = False
        while pending:
            t_next = pending[0]
            step_model = (
                model
                if t_next == 1.0
                else assemble(_instance_at_risk_fraction(instance, t_next))
            )
            z_try, rep_try = solve(step_model.system, single, start=z_prev)
            if rep_try.status is SolveStatus.CONVERGED:
                pending.pop(0)
                t_prev, z_prev = t_next, z_try
                if t_next == 1.0:
                    return model, z_try, rep_try
            elif t_next - t_prev > CASCADE_MIN_STEP:
                pending.insert(0, (t_prev + t_next) / 2.0)
            else:
                failed = True
                break
        if not failed and z_prev is not None and t_prev == 1.0:
            # unreachable in practice (the t=1 branch returns), kept defensive
            return model, z_prev, report

    if options.restarts > 0:
        z, report = solve(model.system, options)
    return model, z, report


def _solve_row(
    task: tuple[MarketInstance, SweepParameter, float, DesignKind, SolveOptions],
) -> SweepRow:
    base, parameter, value, kind, options = task
    instance = _with_parameter(_design_variant(base, kind), parameter, value)
    model, z, report = solve_with_continuation(instance, options)
    L = model.layout
    pi = instance.scenarios.probability

    if report.status is SolveStatus.CONVERGED:
        profits = evaluate_profits(model, z)
        br = check_equilibrium(model, z, tol=CERTIFY_GAP_TOL)
        mb = money_balance(model, z)
        gap = float(br.max_gap)
        money = float(mb.max_abs)
        certified = br.certified(CERTIFY_GAP_TOL) and mb.balanced(CERTIFY_MONEY_TOL)
        premium = 0.0
        if L.option_price is not None:
            premium = float(z[L.option_price])
        elif L.forecast_price is not None:
            premium = float(z[L.forecast_price])
        return SweepRow(
            design=kind.value,
            parameter=parameter.value,
            grid_value=value,
            status=report.status.value,
            certified=certified,
            da_price=float(z[L.da_price]),
            expected_rt_price=float(pi @ z[L.rt_price]),
            premium_price=premium,
            advance_fuel_total=float(z[L.advance_fuel_purchase].sum()),
            da_sale_total=float(z[L.da_sale].sum()),
            option_sale_total=(
                float(z[L.option_sale].sum()) if L.option_sale is not None else 0.0
            ),
            demand_da_purchase=float(z[L.da_purchase]),
            generator_cvar_profit=tuple(
                float(x) for x in profits.cvar_generator_profit
            ),
            demand_cvar_profit=float(profits.cvar_demand_profit),
            complementarity_error=float(report.complementarity_error),
            best_response_gap=gap,
            money_balance_residual=money,
        )
    nan = float("nan")
    return SweepRow(
        design=kind.value,
        parameter=parameter.value,
        grid_value=value,
        status=report.status.value,
        certified=False,
        da_price=nan,
        expected_rt_price=nan,
        premium_price=nan,
        advance_fuel_total=nan,
        da_sale_total=nan,
        option_sale_total=nan,
        demand_da_purchase=nan,
        generator_cvar_profit=tuple(nan for _ in instance.generators),
        demand_cvar_profit=nan,
        complementarity_error=float(report.complementarity_error),
        best_response_gap=nan,
        money_balance_residual=nan,
    )


def run_sweep(
    spec: SweepSpec,
    options: SolveOptions | None = None,
    jobs: int = 1,
) -> SweepResult:
    """Solve every (design, grid value) pair and certify each solution.

    Rows where no solve route converges are recorded with their status and
    NaN quantities; the sweep always continues. ``jobs > 1`` distributes
    rows over worker processes; ordering and values are identical either
    way because rows are solved independently.
    """
    options = options or SolveOptions()
    tasks = [
        (spec.base, spec.parameter, value, kind, options)
        for kind in spec.designs
        for value in spec.grid
    ]
    if jobs > 1:
        with multiprocessing.Pool(jobs) as pool:
            rows = pool.map(_solve_row, tasks)
    else:
        rows = [_solve_row(t) for t in tasks]
    return SweepResult(
        parameter=spec.parameter.value,
        grid=spec.grid,
        designs=tuple(k.value for k in spec.designs),
        rows=tuple(rows),
    )


# ---------------------------------------------------------------------------
# Published-table reproduction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellComparison:
    """One computed-vs-published cell."""

    row: str
    column: str
    computed: float | None
    published: float | None
    tolerance: float | None
    status: str  # "pass" | "fail" | "info" | "excluded"

    @property
    def abs_delta(self) -> float | None:
        if self.computed is None or self.published is None:
            return None
        return abs(self.computed - self.published)

    @property
    def rel_delta(self) -> float | None:
        delta = self.abs_delta
        if delta is None:
            return None
        scale = max(abs(self.published), 1e-12)
        return delta / scale


@dataclass(frozen=True)
class TableComparison:
    """Computed vs published values for one reference table."""

    table_id: int
    title: str
    source: str
    cells: tuple[CellComparison, ...]
    notes: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.cells)

    def to_text(self) -> str:
        out = io.StringIO()
        out.write(f"table {self.table_id}: {self.title}\n")
        out.write(f"source: {self.source}\n")
        out.write(
            f"{'row':<12} {'column':<10} {'computed':>12} {'published':>12} "
            f"{'abs delta':>11} {'tol':>8} {'status':>8}\n"
        )
        for c in self.cells:
            computed = "-" if c.computed is None else f"{c.computed:.4f}"
            published = "-" if c.published is None else f"{c.published:.4f}"
            delta = "-" if c.abs_delta is None else f"{c.abs_delta:.2e}"
            tol = "-" if c.tolerance is None else f"{c.tolerance:g}"
            out.write(
                f"{c.row:<12} {c.column:<10} {computed:>12} {published:>12} "
                f"{delta:>11} {tol:>8} {c.status:>8}\n"
            )
        for note in self.notes:
            out.write(f"note: {note}\n")
        out.write(f"verdict: {'PASS' if self.passed else 'FAIL'}\n")
        return out.getvalue()

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(
            "row,column,computed,published,abs_delta,rel_delta,tolerance,status\n"
        )
        for c in self.cells:
            fields = [
                c.row,
                c.column,
                "" if c.computed is None else repr(c.computed),
                "" if c.published is None else repr(c.published),
                "" if c.abs_delta is None else repr(c.abs_delta),
                "" if c.rel_delta is None else repr(c.rel_delta),
                "" if c.tolerance is None else repr(c.tolerance),
                c.status,
            ]
            out.write(",".join(fields) + "\n")
        return out.getvalue()


def _cell(
    row: str,
    column: str,
    computed: float | None,
    published: float | None,
    tolerance: float | None,
) -> CellComparison:
    if tolerance is None:
        status = "info"
    elif computed is None:
        status = "fail"
    else:
        status = "pass" if abs(computed - published) <= tolerance else "fail"
    return CellComparison(row, column, computed, published, tolerance, status)


def _single_gen_quantities(
    instance: MarketInstance, options: SolveOptions
) -> dict[str, Any]:
    """Solve a single-generator instance and pull the reported columns."""
    model, z, report = solve_with_continuation(instance, options)
    if report.status is not SolveStatus.CONVERGED:
        return {"status": report.status.value}
    L = model.layout
    profits = evaluate_profits(model, z)
    br = check_equilibrium(model, z, tol=CERTIFY_GAP_TOL)
    mb = money_balance(model, z)
    weights = (
        np.asarray(z[L.risk_weight[0]])
        if L.risk_weight is not None
        else instance.scenarios.probability
    )
    out: dict[str, Any] = {
        "status": report.status.value,
        "V": float(z[L.advance_fuel_purchase][0]),
        "g_da": float(z[L.da_sale][0]),
        "Z": [float(x) for x in profits.generator_profit[0]],
        "q": [float(x) for x in weights],
        "complementarity_error": float(report.complementarity_error),
        "best_response_gap": float(br.max_gap),
        "money_balance_residual": float(mb.max_abs),
        "certified": br.certified(CERTIFY_GAP_TOL)
        and mb.balanced(CERTIFY_MONEY_TOL),
    }
    if L.option_sale is not None:
        out["e"] = float(z[L.option_sale][0])
        out["premium"] = float(z[L.option_price])
    return out


def _apply_overrides(
    design: MarketDesign, overrides: Mapping[str, float] | None
) -> MarketDesign:
    if not overrides:
        return design
    known = {"k", "strike", "fer", "forecast"}
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"unknown override keys: {sorted(unknown)}")
    strike = overrides.get("k", overrides.get("strike", design.strike))
    forecast = overrides.get("fer", overrides.get("forecast", design.forecast))
    return dataclasses.replace(
        design, strike=float(strike), forecast=float(forecast)
    )


def _table_4(overrides, options) -> TableComparison:
    design = _apply_overrides(
        MarketDesign(kind=DesignKind.EMIR, strike=12.0, forecast=90.0), overrides
    )
    published = {
        "1": {"V": 0.0, "g_da": 90.0, "e": 0.0, "Z1": 263.0, "Z2": -263.0,
              "q1": 0.5, "q2": 0.5},
        "0.7": {"V": 75.0, "g_da": 90.0, "e": 0.0, "Z1": 75.0, "Z2": -30.0,
                "q1": 0.28, "q2": 0.72},
        "0.4": {"V": 75.0, "g_da": 66.97, "e": 23.03, "Z1": 0.0, "Z2": 0.0,
                "q1": 0.23, "q2": 0.77},
    }
    tol = 1e-2
    cells: list[CellComparison] = []
    notes: list[str] = []
    for alpha in (1.0, 0.7, 0.4):
        label = f"{alpha:g}"
        pub = published[label]
        got = _single_gen_quantities(
            single_generator_study_instance(design=design, alpha=alpha), options
        )
        if got.get("status") != SolveStatus.CONVERGED.value:
            cells.append(_cell(label, "status", None, 0.0, 0.0))
            continue
        if alpha == 1.0:
            # the day-ahead/reserve split and the per-scenario profits are
            # not unique at this risk level; the binding requirements are
            # structural: free reserve, no options, no advance fuel, the
            # requirement covered, and independent oracle certification
            structural = {
                "premium=0": (got["premium"], 0.0, 1e-7),
                "e=0": (got["e"], 0.0, 1e-7),
                "V=0": (got["V"], 0.0, 1e-7),
                "g_da+e>=90": (
                    min(got["g_da"] + got["e"] - design.forecast, 0.0),
                    0.0,
                    1e-7,
                ),
                "comp_err": (got["complementarity_error"], 0.0, 1e-8),
                "br_gap": (got["best_response_gap"], 0.0, 1e-6),
            }
            for column, (computed, target, tolerance) in structural.items():
                cells.append(_cell(label, column, computed, target, tolerance))
            for column, value in (("Z1", pub["Z1"]), ("Z2", pub["Z2"])):
                idx = 0 if column == "Z1" else 1
                cells.append(_cell(label, column, got["Z"][idx], value, None))
            notes.append(
                "row 1: published per-scenario profits (+263/-263) are "
                "recorded for reference only; the formula-evaluated profit "
                "at the published quantities differs, and the day-ahead/"
                "reserve split is degenerate at this risk level"
            )
            continue
        cells.append(_cell(label, "V", got["V"], pub["V"], tol))
        cells.append(_cell(label, "g_da", got["g_da"], pub["g_da"], tol))
        cells.append(_cell(label, "e", got["e"], pub["e"], tol))
        cells.append(_cell(label, "Z1", got["Z"][0], pub["Z1"], tol))
        cells.append(_cell(label, "Z2", got["Z"][1], pub["Z2"], tol))
        cells.append(_cell(label, "q1", got["q"][0], pub["q1"], tol))
        cells.append(_cell(label, "q2", got["q"][1], pub["q2"], tol))
    return TableComparison(
        table_id=4,
        title="single generator, imbalance-reserve design",
        source=(
            "published reference values: single-generator imbalance-reserve "
            f"outputs at strike {design.strike:g}, requirement "
            f"{design.forecast:g}"
        ),
        cells=tuple(cells),
        notes=tuple(notes),
    )


def _table_5(overrides, options) -> TableComparison:
    if overrides:
        raise ValueError("table 5 takes no overrides")
    published = {
        "1": {"V": 0.0, "g_da": 0.0, "Z1": 0.0, "Z2": 0.0, "q1": 0.5, "q2": 0.5},
        "0.7": {"V": 0.0, "g_da": 0.0, "Z1": 0.0, "Z2": 0.0, "q1": 0.4, "q2": 0.6},
        "0.4": {"V": 0.0, "g_da": 0.0, "Z1": 0.0, "Z2": 0.0, "q1": 0.4, "q2": 0.6},
    }
    cells: list[CellComparison] = []
    for alpha in (1.0, 0.7, 0.4):
        label = f"{alpha:g}"
        pub = published[label]
        got = _single_gen_quantities(
            single_generator_study_instance(alpha=alpha), options
        )
        if got.get("status") != SolveStatus.CONVERGED.value:
            cells.append(_cell(label, "status", None, 0.0, 0.0))
            continue
        cells.append(_cell(label, "V", got["V"], pub["V"], 1e-4))
        cells.append(_cell(label, "g_da", got["g_da"], pub["g_da"], 1e-4))
        cells.append(_cell(label, "Z1", got["Z"][0], pub["Z1"], 1e-4))
        cells.append(_cell(label, "Z2", got["Z"][1], pub["Z2"], 1e-4))
        cells.append(_cell(label, "q1", got["q"][0], pub["q1"], 1e-3))
        cells.append(_cell(label, "q2", got["q"][1], pub["q2"], 1e-3))
    return TableComparison(
        table_id=5,
        title="single generator, energy-only design",
        source="published reference values: single-generator energy-only outputs",
        cells=tuple(cells),
    )


def _table_6(overrides, options) -> TableComparison:
    if overrides:
        raise ValueError("table 6 takes no overrides")
    published = {
        "5": {"V": 90.0, "g_da": 90.0, "e": 0.0, "Z1": 0.0, "Z2": 0.0,
              "q1": 0.13, "q2": 0.87},
        "10": {"V": 75.0, "g_da": 64.18, "e": 25.82, "Z1": 0.0, "Z2": 0.0,
               "q1": 0.16, "q2": 0.84},
        "15": {"V": 0.0, "g_da": 0.0, "e": 93.02, "Z1": 0.0, "Z2": 0.0,
               "q1": 0.5, "q2": 0.5},
    }
    tol = 5e-2
    cells: list[CellComparison] = []
    notes: list[str] = []
    for strike in (5.0, 10.0, 15.0):
        label = f"{strike:g}"
        pub = published[label]
        design = MarketDesign(kind=DesignKind.EMIR, strike=strike, forecast=90.0)
        got = _single_gen_quantities(
            single_generator_study_instance(design=design, alpha=0.5), options
        )
        if got.get("status") != SolveStatus.CONVERGED.value:
            cells.append(_cell(label, "status", None, 0.0, 0.0))
            continue
        cells.append(_cell(label, "V", got["V"], pub["V"], tol))
        cells.append(_cell(label, "g_da", got["g_da"], pub["g_da"], tol))
        cells.append(_cell(label, "e", got["e"], pub["e"], tol))
        cells.append(_cell(label, "q1", got["q"][0], pub["q1"], tol))
        cells.append(_cell(label, "q2", got["q"][1], pub["q2"], tol))
        cells.append(
            _cell(label, "certified", 0.0 if got["certified"] else 1.0, 0.0, 0.5)
        )
    notes.append(
        "strike 15: the closeout is free at the equilibrium prices, so any "
        "reserve sale at or above the requirement is an equilibrium; the "
        "published quantity substituted into the computed solution also "
        "passes certification, and the computed landing simply picks "
        "another point on that ray (profits are identically zero there, so "
        "the published risk weights are equally non-unique)"
    )
    notes.append(
        "strike 10: the computed day-ahead/reserve split is oracle-"
        "certified and multistart-stable, while the published split fails "
        "the equilibrium conditions of this formulation by O(1); the ~0.66 "
        "MWh difference is reported as a finding"
    )
    return TableComparison(
        table_id=6,
        title="single generator, imbalance-reserve design, strike study",
        source=(
            "published reference values: single-generator imbalance-reserve "
            "outputs at risk level 0.5 for strikes 5/10/15, requirement 90"
        ),
        cells=tuple(cells),
        notes=tuple(notes),
    )


def _table_9(overrides, options) -> TableComparison:
    design = _apply_overrides(
        MarketDesign(
            kind=DesignKind.EMIR,
            strike=DEFAULT_TWO_GEN_STRIKE,
            forecast=DEFAULT_TWO_GEN_FER,
        ),
        overrides,
    )
    published = {
        "1": (61.4305, 3.00217),
        "0.9": (166.541, 166.665),
        "0.8": (166.541, 166.665),
        "0.7": (166.541, 166.665),
        "0.6": (175.818, 175.861),
        "0.5": (172.222, 172.222),
        "0.4": (172.222, 172.222),
        "0.3": (172.222, 172.222),
        "0.2": (172.059, 172.059),
        "0.1": (172.059, 172.059),
    }
    base = two_generator_study_instance(design=design)
    cells: list[CellComparison] = []
    for alpha_d in (1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1):
        label = f"{alpha_d:g}"
        pub_emir, pub_emo = published[label]
        for kind, pub in ((DesignKind.EMIR, pub_emir), (DesignKind.EMO, pub_emo)):
            variant = _design_variant(base, kind).with_demand_alpha(alpha_d)
            model, z, report = solve_with_continuation(variant, options)
            column = kind.value
            if report.status is not SolveStatus.CONVERGED:
                cells.append(_cell(label, column, None, pub, 1e-2))
                continue
            computed = float(z[model.layout.da_purchase])
            if alpha_d == 1.0:
                # the risk-neutral demand agent is indifferent to its
                # day-ahead position, so this row is not a unique value
                cells.append(
                    CellComparison(label, column, computed, pub, None, "excluded")
                )
            else:
                cells.append(_cell(label, column, computed, pub, 1e-2))
    return TableComparison(
        table_id=9,
        title="two generators, day-ahead demand purchase vs demand risk level",
        source=(
            "published reference values: day-ahead demand purchases with "
            "risk-neutral generators; reserve-design column at strike "
            f"{design.strike:g}, requirement {design.forecast:g} (the "
            "published study does not state either value)"
        ),
        cells=tuple(cells),
        notes=(
            "risk-neutral rows are excluded: with every agent risk neutral "
            "the day-ahead demand split is degenerate, so the published "
            "values there are arbitrary representatives",
            "published values depend on an unstated requirement; deltas at "
            "the default requirement are reported as findings",
        ),
    )


def _table_10(overrides, options) -> TableComparison:
    design = _apply_overrides(
        MarketDesign(
            kind=DesignKind.EMIR, strike=10.0, forecast=DEFAULT_TWO_GEN_FER
        ),
        overrides,
    )
    base = two_generator_study_instance(design=design).with_demand_alpha(0.5)
    cells: list[CellComparison] = []
    for strike in range(10, 101, 10):
        label = f"{strike}"
        variant = base.with_design(base.design.with_strike(float(strike)))
        model, z, report = solve_with_continuation(variant, options)
        if report.status is not SolveStatus.CONVERGED:
            cells.append(_cell(label, "d_da", None, 172.222, 1e-1))
            continue
        computed = float(z[model.layout.da_purchase])
        cells.append(_cell(label, "d_da", computed, 172.222, 1e-1))
    return TableComparison(
        table_id=10,
        title="two generators, day-ahead demand purchase vs strike",
        source=(
            "published reference values: day-ahead demand purchase at demand "
            "risk level 0.5 across strikes 10..100, requirement "
            f"{design.forecast:g} (the published study does not state the "
            "requirement)"
        ),
        cells=tuple(cells),
        notes=(
            "published values depend on an unstated requirement; deltas at "
            "the default requirement are reported as findings",
        ),
    )


def _table_11(overrides, options) -> TableComparison:
    design = _apply_overrides(
        MarketDesign(kind=DesignKind.EMO_LF, forecast=90.0), overrides
    )
    published = {
        "1": {"V": 0.0, "g_da": 90.0, "Z1": 225.0, "Z2": -225.0,
              "q1": 0.5, "q2": 0.5},
        "0.7": {"V": 75.0, "g_da": 90.0, "Z1": 75.0, "Z2": -30.0,
                "q1": 0.28, "q2": 0.72},
        "0.4": {"V": 90.0, "g_da": 90.0, "Z1": 0.0, "Z2": 0.0,
                "q1": 0.13, "q2": 0.86},
    }
    cells: list[CellComparison] = []
    for alpha in (1.0, 0.7, 0.4):
        label = f"{alpha:g}"
        pub = published[label]
        got = _single_gen_quantities(
            single_generator_study_instance(design=design, alpha=alpha), options
        )
        if got.get("status") != SolveStatus.CONVERGED.value:
            cells.append(_cell(label, "status", None, 0.0, 0.0))
            continue
        cells.append(_cell(label, "V", got["V"], pub["V"], 1e-2))
        cells.append(_cell(label, "g_da", got["g_da"], pub["g_da"], 1e-2))
        cells.append(_cell(label, "Z1", got["Z"][0], pub["Z1"], 1e-2))
        cells.append(_cell(label, "Z2", got["Z"][1], pub["Z2"], 1e-2))
        cells.append(_cell(label, "q1", got["q"][0], pub["q1"], 1e-2))
        cells.append(_cell(label, "q2", got["q"][1], pub["q2"], 1e-2))
    return TableComparison(
        table_id=11,
        title="single generator, load-forecast design",
        source=(
            "published reference values: single-generator load-forecast "
            f"outputs at requirement {design.forecast:g}"
        ),
        cells=tuple(cells),
    )


_TABLE_BUILDERS = {
    4: _table_4,
    5: _table_5,
    6: _table_6,
    9: _table_9,
    10: _table_10,
    11: _table_11,
}


def published_table_ids() -> tuple[int, ...]:
    return tuple(sorted(_TABLE_BUILDERS))


def reproduce_table(
    table_id: int,
    overrides: Mapping[str, float] | None = None,
    options: SolveOptions | None = None,
) -> TableComparison:
    """Recompute one published table and compare cell by cell.

    ``overrides`` may adjust ``k``/``strike`` and ``fer``/``forecast`` for
    tables where those are meaningful. Unknown ids raise ``ValueError``.
    """
    try:
        builder = _TABLE_BUILDERS[int(table_id)]
    except (KeyError, TypeError):
        raise ValueError(
            f"unknown table id {table_id!r}; known: {published_table_ids()}"
        ) from None
    return builder(overrides, options or SolveOptions())


# ---------------------------------------------------------------------------
# Figure data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FigureData:
    """Plottable series: one x column plus one column per series."""

    figure_id: int
    x_label: str
    series_labels: tuple[str, ...]
    x: tuple[float, ...]
    series: tuple[tuple[float, ...], ...]

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(",".join([self.x_label, *self.series_labels]) + "\n")
        for i, xv in enumerate(self.x):
            row = [repr(xv)] + [repr(col[i]) for col in self.series]
            out.write(",".join(row) + "\n")
        return out.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv())


ALPHA_GRID = tuple(round(1.0 - 0.1 * k, 1) for k in range(10))
STRIKE_GRID = tuple(float(k) for k in range(0, 101, 10))


def _default_two_gen_base() -> MarketInstance:
    return two_generator_study_instance(
        design=MarketDesign(
            kind=DesignKind.EMIR,
            strike=DEFAULT_TWO_GEN_STRIKE,
            forecast=DEFAULT_TWO_GEN_FER,
        )
    )


def default_figure_sweep(figure_id: int) -> SweepSpec:
    """The sweep each published figure is drawn from."""
    base = _default_two_gen_base()
    if figure_id == 3:
        return SweepSpec(
            base=base,
            parameter=SweepParameter.ALPHA_ALL_GENERATORS,
            grid=ALPHA_GRID,
            designs=(DesignKind.EMO, DesignKind.EMIR),
        )
    if figure_id in (4, 5):
        return SweepSpec(
            base=base.with_all_generator_alpha(0.6).with_demand_alpha(0.6),
            parameter=SweepParameter.STRIKE_PRICE,
            grid=STRIKE_GRID,
            designs=(DesignKind.EMIR,),
        )
    if figure_id == 7:
        return SweepSpec(
            base=base,
            parameter=SweepParameter.ALPHA_ALL_GENERATORS,
            grid=ALPHA_GRID,
            designs=(DesignKind.EMIR, DesignKind.EMO_LF),
        )
    raise ValueError(f"unknown figure id {figure_id!r}; known: (3, 4, 5, 7)")


def emit_figure_data(
    figure_id: int,
    sweep: SweepResult | None = None,
    options: SolveOptions | None = None,
    jobs: int = 1,
) -> FigureData:
    """Format sweep output as the published figure's data series.

    When ``sweep`` is omitted the figure's default sweep runs first.
    """
    figure_id = int(figure_id)
    spec = default_figure_sweep(figure_id)
    if sweep is None:
        sweep = run_sweep(spec, options=options, jobs=jobs)

    def column(design: DesignKind, field: str) -> tuple[float, ...]:
        rows = sweep.rows_for(design)
        return tuple(float(getattr(r, field)) for r in rows)

    if figure_id == 3:
        return FigureData(
            figure_id=3,
            x_label="alpha",
            series_labels=("advance_fuel_total_emo", "advance_fuel_total_emir"),
            x=sweep.grid,
            series=(
                column(DesignKind.EMO, "advance_fuel_total"),
                column(DesignKind.EMIR, "advance_fuel_total"),
            ),
        )
    if figure_id == 4:
        return FigureData(
            figure_id=4,
            x_label="strike",
            series_labels=("advance_fuel_total",),
            x=sweep.grid,
            series=(column(DesignKind.EMIR, "advance_fuel_total"),),
        )
    if figure_id == 5:
        return FigureData(
            figure_id=5,
            x_label="strike",
            series_labels=("da_sale_total", "option_sale_total"),
            x=sweep.grid,
            series=(
                column(DesignKind.EMIR, "da_sale_total"),
                column(DesignKind.EMIR, "option_sale_total"),
            ),
        )
    return FigureData(
        figure_id=7,
        x_label="alpha",
        series_labels=("advance_fuel_total_emir", "advance_fuel_total_emo_lf"),
        x=sweep.grid,
        series=(
            column(DesignKind.EMIR, "advance_fuel_total"),
            column(DesignKind.EMO_LF, "advance_fuel_total"),
        ),
    )

"""Stochastic equilibrium models of two-settlement electricity markets.

This package assembles competitive-equilibrium models of day-ahead plus
real-time electricity markets with CVaR-risk-averse agents as square mixed
complementarity problems, solves them with a damped semismooth Newton method,
and certifies every solution against independently coded linear-programming
oracles (per-agent best responses and a system welfare program) together
with cash-flow conservation audits.

Three market designs are supported: an energy-only market, an energy market
extended with an imbalance-reserve product (option quantity sold at a
reserve price with a strike-price closeout), and an energy-only market with
a day-ahead load-forecast requirement.
"""

from .data import (
    DemandParams,
    DesignKind,
    GeneratorParams,
    InvalidInstanceError,
    MarketDesign,
    MarketInstance,
    ScenarioSet,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    loads_instance,
    save_instance,
    single_generator_study_instance,
    two_generator_study_instance,
    validate,
)
from .assembly import (
    MarketModel,
    ProfitReport,
    VariableLayout,
    assemble,
    evaluate_profits,
    realized_cvar,
    solution_to_dict,
    transform_option_solution_to_energy_only,
)
from .mcp import (
    MCPSystem,
    VariableKind,
    VariableSpec,
    complementarity_error,
    fb_residual,
    generalized_jacobian,
    residual,
)
from .solver import (
    SolveOptions,
    SolveReport,
    SolveStatus,
    default_start,
    restart_start,
    solve,
)
from .oracle import (
    BestResponseReport,
    MoneyBalanceReport,
    WelfareResult,
    check_equilibrium,
    extract_prices,
    money_balance,
    solve_welfare_lp,
)
from .properties import (
    PropertyCheckResult,
    check_cor1,
    check_lemma1,
    check_lemma2,
    check_marginal_pricing,
    check_prop1,
    check_prop2,
    random_risk_neutral_instance,
)
from .experiments import (
    CellComparison,
    FigureData,
    SweepParameter,
    SweepResult,
    SweepRow,
    SweepSpec,
    TableComparison,
    default_figure_sweep,
    emit_figure_data,
    published_table_ids,
    reproduce_table,
    run_sweep,
    solve_with_continuation,
)

__version__ = "0.1.0"

__all__ = [
    "DemandParams",
    "DesignKind",
    "GeneratorParams",
    "InvalidInstanceError",
    "MarketDesign",
    "MarketInstance",
    "ScenarioSet",
    "instance_from_dict",
    "instance_to_dict",
    "load_instance",
    "loads_instance",
    "save_instance",
    "validate",
    "single_generator_study_instance",
    "two_generator_study_instance",
    "MarketModel",
    "ProfitReport",
    "VariableLayout",
    "assemble",
    "evaluate_profits",
    "realized_cvar",
    "solution_to_dict",
    "transform_option_solution_to_energy_only",
    "MCPSystem",
    "VariableKind",
    "VariableSpec",
    "complementarity_error",
    "fb_residual",
    "generalized_jacobian",
    "residual",
    "SolveOptions",
    "SolveReport",
    "SolveStatus",
    "default_start",
    "restart_start",
    "solve",
    "BestResponseReport",
    "MoneyBalanceReport",
    "WelfareResult",
    "check_equilibrium",
    "extract_prices",
    "money_balance",
    "solve_welfare_lp",
    "PropertyCheckResult",
    "check_cor1",
    "check_lemma1",
    "check_lemma2",
    "check_marginal_pricing",
    "check_prop1",
    "check_prop2",
    "random_risk_neutral_instance",
    "CellComparison",
    "FigureData",
    "SweepParameter",
    "SweepResult",
    "SweepRow",
    "SweepSpec",
    "TableComparison",
    "default_figure_sweep",
    "emit_figure_data",
    "published_table_ids",
    "reproduce_table",
    "run_sweep",
    "solve_with_continuation",
    "__version__",
]

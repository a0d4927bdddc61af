"""Executable property checks for the structural results of the models.

Each check solves (or receives) equilibrium solutions and asserts a
structural property of the risk-neutral theory, returning a
:class:`PropertyCheckResult` with witness values rather than raising, so
suites can aggregate outcomes. All checks are deterministic given a seed,
and a failing result always carries a seed that replays it.

Checks
------

* :func:`check_prop1` — with every agent risk neutral and total capacity
  above the reserve requirement, the imbalance-reserve product is priced at
  zero, and no options are sold whenever the closeout has positive expected
  cost.
* :func:`check_cor1` — folding option quantities into day-ahead sales maps
  an imbalance-reserve equilibrium onto an energy-only equilibrium with the
  same fuel commitments and the same net day-ahead procurement.
* :func:`check_prop2` — equilibrium prices are reproduced across independent
  multistart solves (quantities may differ; no assertion is made on them).
* :func:`check_lemma1` — a generator whose expected spot fuel cost is below
  its advance fuel cost buys no advance fuel.
* :func:`check_lemma2` — the dispatch-partition generalization of lemma 1,
  with the cost hypothesis evaluated at the solution's real-time prices.
* :func:`check_marginal_pricing` — a strictly interior generator burning
  spot fuel pins the real-time price at its marginal plus spot fuel cost.

The module also hosts the seeded random instance generator used by the
randomized property suites.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .assembly import (
    MarketModel,
    assemble,
    transform_option_solution_to_energy_only,
)
from .data import (
    DemandParams,
    DesignKind,
    GeneratorParams,
    MarketDesign,
    MarketInstance,
    ScenarioSet,
)
from .mcp import complementarity_error
from .oracle import solve_welfare_lp
from .solver import (
    SolveOptions,
    SolveStatus,
    default_start,
    restart_start,
    solve,
)

__all__ = [
    "PropertyCheckResult",
    "random_risk_neutral_instance",
    "check_prop1",
    "check_cor1",
    "check_prop2",
    "check_lemma1",
    "check_lemma2",
    "check_marginal_pricing",
]

#: A quantity below this many MWh counts as zero for dispatch partitions.
DISPATCH_TOL = 1e-7
#: Strict-inequality margin when evaluating property hypotheses.
HYPOTHESIS_MARGIN = 1e-9
#: Tolerance on "zero" equilibrium quantities asserted by the checks.
ZERO_TOL = 1e-7
#: Tolerance on price agreement assertions.
PRICE_TOL = 1e-6


@dataclass(frozen=True)
class PropertyCheckResult:
    """Outcome of one property check on one instance."""

    property_id: str
    instance: str
    passed: bool
    witness: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None

    def __bool__(self) -> bool:
        return self.passed


def random_risk_neutral_instance(seed: int) -> MarketInstance:
    """A seeded, well-posed, risk-neutral imbalance-reserve instance.

    Construction guarantees: 1-3 generators, 2-5 scenarios, total capacity
    1.2-2.0 times the peak load and strictly above the reserve requirement,
    resale values below both spot fuel costs and (in expectation) the
    advance fuel cost so no money pump exists, and a strike calibrated from
    the welfare program's real-time prices to sit strictly below the highest
    one, giving the closeout positive expected cost.
    """
    rng = np.random.default_rng(seed)
    n_scen = int(rng.integers(2, 6))
    n_gens = int(rng.integers(1, 4))

    probability = rng.uniform(0.2, 1.0, size=n_scen)
    probability /= probability.sum()
    rt_demand = rng.uniform(20.0, 150.0, size=n_scen)

    raw_capacity = rng.uniform(0.5, 1.5, size=n_gens)
    total_capacity = float(rt_demand.max()) * rng.uniform(1.2, 2.0)
    capacity = raw_capacity * (total_capacity / raw_capacity.sum())

    generators = []
    for i in range(n_gens):
        marginal = rng.uniform(0.0, 20.0)
        spot = rng.uniform(5.0, 100.0, size=n_scen)
        advance = rng.uniform(5.0, 100.0)
        resale = rng.uniform(0.0, 0.9, size=n_scen) * spot
        expected_resale = float(probability @ resale)
        if expected_resale >= advance:
            resale *= 0.9 * advance / expected_resale
        generators.append(
            GeneratorParams(
                marginal_cost=marginal,
                advance_fuel_cost=advance,
                capacity=float(capacity[i]),
                spot_fuel_cost=spot,
                resale_value=resale,
                name=f"g{i + 1}",
            )
        )

    requirement = rng.uniform(0.3, 0.9) * total_capacity
    strike_fraction = rng.uniform(0.2, 0.8)

    instance = MarketInstance(
        scenarios=ScenarioSet(probability=probability, rt_demand=rt_demand),
        generators=generators,
        demand=DemandParams(risk_alpha=1.0, participates_da=False),
        design=MarketDesign(
            kind=DesignKind.EMIR, strike=0.0, forecast=float(requirement)
        ),
    )
    welfare = solve_welfare_lp(instance)
    strike = strike_fraction * float(np.max(welfare.rt_prices))
    return instance.with_design(
        MarketDesign(
            kind=DesignKind.EMIR, strike=float(strike), forecast=float(requirement)
        )
    )


def _require_risk_neutral(instance: MarketInstance, check: str) -> None:
    if instance.demand.risk_alpha != 1.0 or any(
        g.risk_alpha != 1.0 for g in instance.generators
    ):
        raise ValueError(f"{check} requires every agent risk neutral")


def _solve_reduced(
    instance: MarketInstance, options: SolveOptions
) -> tuple[MarketModel, np.ndarray, SolveStatus]:
    model = assemble(instance, risk_neutral=True)
    z, report = solve(model.system, options)
    return model, z, report.status


def check_prop1(
    instance: MarketInstance,
    options: SolveOptions | None = None,
    seed: int | None = None,
) -> PropertyCheckResult:
    """Reserve product is free, and unsold when its closeout costs money.

    Requires a risk-neutral imbalance-reserve instance with total capacity
    strictly above the reserve requirement. Asserts the reserve price is
    zero at the solution; when the expected closeout payment at the
    solution's prices is positive, additionally asserts that every
    generator sells zero options.
    """
    _require_risk_neutral(instance, "check_prop1")
    if instance.design.kind is not DesignKind.EMIR:
        raise ValueError("check_prop1 requires an imbalance-reserve instance")
    total_q = sum(g.capacity for g in instance.generators)
    if not total_q > instance.design.forecast:
        raise ValueError(
            "check_prop1 requires total capacity above the reserve requirement"
        )
    options = options or SolveOptions()
    label = f"prop1[{instance_label(instance)}]"

    model, z, status = _solve_reduced(instance, options)
    if status is not SolveStatus.CONVERGED:
        return PropertyCheckResult(
            "prop1", label, False, {"error": f"solve status {status.value}"}, seed
        )
    L = model.layout
    pi = instance.scenarios.probability
    rho = float(z[L.option_price])
    closeout = float(
        pi @ np.maximum(z[L.rt_price] - instance.design.strike, 0.0)
    )
    max_option = float(np.max(z[L.option_sale]))
    passed = rho <= ZERO_TOL
    if closeout > HYPOTHESIS_MARGIN:
        passed = passed and max_option <= ZERO_TOL
    witness = {
        "reserve_price": rho,
        "expected_closeout": closeout,
        "max_option_sale": max_option,
    }
    return PropertyCheckResult("prop1", label, passed, witness, seed)


def check_cor1(
    model: MarketModel,
    z: np.ndarray,
    seed: int | None = None,
) -> PropertyCheckResult:
    """An imbalance-reserve equilibrium folds onto an energy-only one.

    Applies the fold-options-into-day-ahead transform and asserts the image
    solves the energy-only system to 1e-8, with advance fuel, spot fuel
    purchases, and the net day-ahead procurement all preserved.
    """
    _require_risk_neutral(model.instance, "check_cor1")
    label = f"cor1[{instance_label(model.instance)}]"
    z = np.asarray(z, dtype=float)
    emo_model, z_emo = transform_option_solution_to_energy_only(model, z)

    err = complementarity_error(emo_model.system, z_emo)
    src, dst = model.layout, emo_model.layout
    advance_delta = float(
        np.max(
            np.abs(z[src.advance_fuel_purchase] - z_emo[dst.advance_fuel_purchase]),
            initial=0.0,
        )
    )
    spot_delta = float(
        np.max(
            np.abs(z[src.rt_fuel_purchase] - z_emo[dst.rt_fuel_purchase]),
            initial=0.0,
        )
    )
    # folding the option quantities into day-ahead sales and handing the same
    # total to the buying trader must leave the net day-ahead position alone
    net_src = float(z[src.da_sale].sum() + z[src.da_sell_arb] - z[src.da_buy_arb])
    net_dst = float(
        z_emo[dst.da_sale].sum() + z_emo[dst.da_sell_arb] - z_emo[dst.da_buy_arb]
    )
    net_delta = abs(net_src - net_dst)
    passed = (
        err <= 1e-8
        and advance_delta == 0.0
        and spot_delta == 0.0
        and net_delta <= 1e-9
    )
    witness = {
        "emo_complementarity_error": err,
        "advance_fuel_delta": advance_delta,
        "spot_fuel_delta": spot_delta,
        "net_da_procurement_delta": net_delta,
    }
    return PropertyCheckResult("cor1", label, passed, witness, seed)


def check_prop2(
    instance: MarketInstance,
    options: SolveOptions | None = None,
    starts: int = 20,
    seed: int | None = None,
) -> PropertyCheckResult:
    """Equilibrium prices agree across independent multistart solves.

    Runs ``starts + 1`` single-attempt solves (the default start plus
    ``starts`` perturbed starts) and asserts every price coordinate — the
    day-ahead price, each real-time price, and the reserve/forecast price
    where present — agrees across the converged ones to 1e-6. Quantities
    are deliberately not compared. Fewer than two converged attempts is an
    error outcome, reported as a failure with a witness.
    """
    if starts < 10:
        raise ValueError("check_prop2 needs at least 10 restarts")
    base = options or SolveOptions()
    one = dataclasses.replace(base, restarts=0)
    label = f"prop2[{instance_label(instance)}]"
    model = assemble(instance)
    system = model.system
    L = model.layout

    price_rows: list[np.ndarray] = []
    statuses: list[str] = []
    for s in range(starts + 1):
        z0 = default_start(system) if s == 0 else restart_start(system, base.seed, s)
        z, report = solve(system, one, start=z0)
        statuses.append(report.status.value)
        if report.status is SolveStatus.CONVERGED:
            row = [float(z[L.da_price]), *map(float, z[L.rt_price])]
            if L.option_price is not None:
                row.append(float(z[L.option_price]))
            if L.forecast_price is not None:
                row.append(float(z[L.forecast_price]))
            price_rows.append(np.array(row))

    if len(price_rows) < 2:
        return PropertyCheckResult(
            "prop2",
            label,
            False,
            {
                "error": "fewer than 2 converged restarts",
                "converged": len(price_rows),
                "statuses": statuses,
            },
            seed,
        )
    prices = np.array(price_rows)
    spread = float(
        np.abs(prices[:, None, :] - prices[None, :, :]).max()
    )
    witness = {
        "converged": len(price_rows),
        "attempts": starts + 1,
        "max_price_spread": spread,
    }
    return PropertyCheckResult("prop2", label, spread <= PRICE_TOL, witness, seed)


def check_lemma1(
    instance: MarketInstance,
    options: SolveOptions | None = None,
    seed: int | None = None,
) -> PropertyCheckResult:
    """Cheap expected spot fuel forecloses advance fuel purchases.

    For every generator whose probability-weighted spot fuel cost is
    strictly below its advance fuel cost, asserts zero advance fuel in the
    energy-only solution and, when the instance carries the
    imbalance-reserve design, in that solution as well. Generators failing
    the hypothesis are skipped.
    """
    _require_risk_neutral(instance, "check_lemma1")
    options = options or SolveOptions()
    label = f"lemma1[{instance_label(instance)}]"
    pi = instance.scenarios.probability

    designs = [MarketDesign(kind=DesignKind.EMO)]
    if instance.design.kind is DesignKind.EMIR:
        designs.append(instance.design)

    witness: dict[str, Any] = {}
    passed = True
    for design in designs:
        variant = instance.with_design(design)
        model, z, status = _solve_reduced(variant, options)
        if status is not SolveStatus.CONVERGED:
            return PropertyCheckResult(
                "lemma1",
                label,
                False,
                {"error": f"{design.kind.value} solve status {status.value}"},
                seed,
            )
        advance = z[model.layout.advance_fuel_purchase]
        for i, g in enumerate(instance.generators):
            expected_spot = float(pi @ g.spot_fuel_cost)
            if expected_spot < g.advance_fuel_cost - HYPOTHESIS_MARGIN:
                key = f"{design.kind.value}.{g.name or f'g{i + 1}'}"
                witness[key] = float(advance[i])
                if advance[i] > ZERO_TOL:
                    passed = False
    return PropertyCheckResult("lemma1", label, passed, witness, seed)


def check_lemma2(
    model: MarketModel,
    z: np.ndarray,
    seed: int | None = None,
) -> PropertyCheckResult:
    """Dispatch-partition cost test forecloses advance fuel purchases.

    Reads each generator's dispatch partition from the solution (dispatched
    where generation exceeds the dispatch threshold) and evaluates the cost
    hypothesis at the solution's real-time prices: advance fuel cost above
    the resale value collected in idle scenarios plus the price-minus-cost
    margin collected in dispatched scenarios. Where the hypothesis holds
    strictly, asserts zero advance fuel.
    """
    _require_risk_neutral(model.instance, "check_lemma2")
    instance = model.instance
    label = f"lemma2[{instance_label(instance)}]"
    z = np.asarray(z, dtype=float)
    L = model.layout
    pi = instance.scenarios.probability
    lam = z[L.rt_price]

    witness: dict[str, Any] = {}
    passed = True
    for i, g in enumerate(instance.generators):
        dispatched = z[L.rt_generation[i]] > DISPATCH_TOL
        idle_value = float(pi[~dispatched] @ g.resale_value[~dispatched])
        margin_value = float(
            pi[dispatched] @ (lam[dispatched] - g.marginal_cost)
        )
        bound = idle_value + margin_value
        if g.advance_fuel_cost > bound + HYPOTHESIS_MARGIN:
            key = g.name or f"g{i + 1}"
            advance = float(z[L.advance_fuel_purchase[i]])
            witness[key] = {"bound": bound, "advance_fuel": advance}
            if advance > ZERO_TOL:
                passed = False
    return PropertyCheckResult("lemma2", label, passed, witness, seed)


def check_marginal_pricing(
    model: MarketModel,
    z: np.ndarray,
    seed: int | None = None,
) -> PropertyCheckResult:
    """Interior spot-fuel generators pin the real-time price.

    In every scenario, any generator strictly between zero output and
    capacity that buys spot fuel must see the real-time price equal to its
    marginal cost plus its spot fuel cost, to 1e-6.
    """
    _require_risk_neutral(model.instance, "check_marginal_pricing")
    instance = model.instance
    label = f"marginal_pricing[{instance_label(instance)}]"
    z = np.asarray(z, dtype=float)
    L = model.layout
    lam = z[L.rt_price]

    witness: dict[str, Any] = {}
    passed = True
    for i, g in enumerate(instance.generators):
        gen = z[L.rt_generation[i]]
        spot = z[L.rt_fuel_purchase[i]]
        for s in range(L.n_scenarios):
            interior = DISPATCH_TOL < gen[s] < g.capacity - DISPATCH_TOL
            if interior and spot[s] > DISPATCH_TOL:
                implied = g.marginal_cost + float(g.spot_fuel_cost[s])
                gap = abs(float(lam[s]) - implied)
                if gap > PRICE_TOL:
                    key = f"{g.name or f'g{i + 1}'}[s={s}]"
                    witness[key] = {
                        "rt_price": float(lam[s]),
                        "implied": implied,
                        "gap": gap,
                    }
                    passed = False
    return PropertyCheckResult("marginal_pricing", label, passed, witness, seed)


def instance_label(instance: MarketInstance) -> str:
    """Short human-readable descriptor of an instance."""
    design = instance.design
    parts = [design.kind.value]
    if design.kind is DesignKind.EMIR:
        parts.append(f"k={design.strike:g}")
    if design.kind in (DesignKind.EMIR, DesignKind.EMO_LF):
        parts.append(f"fer={design.forecast:g}")
    parts.append(f"gens={len(instance.generators)}")
    parts.append(f"scens={instance.n_scenarios}")
    return ",".join(parts)

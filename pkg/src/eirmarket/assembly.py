"""Assemble market instances into square mixed complementarity systems.

Every agent's CVaR-risk-averse profit-maximization problem is replaced by its
first-order conditions, market prices are paired with the clearing
constraints, and the result is one square MCP whose solutions are exactly the
competitive equilibria of the instance.

Agents and their variables
--------------------------

Each generator chooses real-time generation, spot fuel purchases and fuel
resales per scenario, plus a day-ahead sale and an advance fuel purchase
(and, under the imbalance-reserve design, an option quantity). Its risk
preference enters through the Rockafellar-Uryasev CVaR reformulation: an
auxiliary value-at-risk level, per-scenario excess-loss variables, and
per-scenario risk weights that act as a distorted probability measure.

The aggregate demand agent buys day-ahead (optional) and settles the
remaining load in real time, with its own CVaR block. Two risk-neutral
virtual traders close any gap between the day-ahead price and the expected
real-time price: one sells day-ahead and buys back in real time, the other
does the reverse.

Market designs
--------------

* ``emo``     — energy-only: day-ahead and real-time energy trading.
* ``emir``    — adds an imbalance-reserve product: generators sell option
  quantity ``e`` at price ``rho``; day-ahead energy sales earn ``rho`` on
  top of the energy price; option sellers pay back ``max(rt_price - K, 0)``
  per unit at the strike ``K``; demand funds the requirement ``FER * rho``
  and collects the closeout payments.
* ``emo_lf``  — adds a load-forecast requirement: total day-ahead sales must
  reach the forecast, supported by a non-negative uplift ``lam_lf`` paid to
  day-ahead sales and funded by demand.

When every agent is risk neutral the CVaR blocks are redundant (the risk
weights collapse to the scenario probabilities); ``assemble(...,
risk_neutral=True)`` builds the smaller reduced system with probabilities
substituted for risk weights and no CVaR variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .data import DesignKind, MarketInstance
from .mcp import (
    BlockInitializer,
    MCPSystem,
    PlusKinkGroup,
    VariableKind,
    VariableSpec,
)

__all__ = [
    "VariableLayout",
    "MarketModel",
    "ProfitReport",
    "assemble",
    "evaluate_profits",
    "realized_cvar",
    "cvar_tail_decomposition",
    "transform_option_solution_to_energy_only",
    "solution_to_dict",
]


@dataclass(frozen=True)
class VariableLayout:
    """Index map from named model quantities into the flat variable vector.

    Per-generator attributes are arrays indexed ``[generator, scenario]`` or
    ``[generator]``; entries that do not exist under the instance's design or
    risk form are ``None``.
    """

    n: int
    n_scenarios: int
    n_generators: int
    risk_neutral: bool
    rt_generation: np.ndarray  # (G, S)
    rt_fuel_purchase: np.ndarray  # (G, S)
    fuel_resale: np.ndarray  # (G, S)
    fuel_balance_dual: np.ndarray  # (G, S)
    rt_capacity_dual: np.ndarray  # (G, S)
    cvar_excess: np.ndarray | None  # (G, S)
    risk_weight: np.ndarray | None  # (G, S)
    da_sale: np.ndarray  # (G,)
    advance_fuel_purchase: np.ndarray  # (G,)
    da_capacity_dual: np.ndarray  # (G,)
    var_level: np.ndarray | None  # (G,)
    option_sale: np.ndarray | None  # (G,)
    da_purchase: int
    demand_var_level: int | None
    demand_cvar_excess: np.ndarray | None  # (S,)
    demand_risk_weight: np.ndarray | None  # (S,)
    da_sell_arb: int
    da_buy_arb: int
    da_price: int
    rt_price: np.ndarray  # (S,)
    option_price: int | None
    forecast_price: int | None


def _generator_names(instance: MarketInstance) -> list[str]:
    return [g.name or f"g{i + 1}" for i, g in enumerate(instance.generators)]


def _build_layout_and_specs(
    instance: MarketInstance, risk_neutral: bool
) -> tuple[VariableLayout, list[VariableSpec]]:
    S = instance.n_scenarios
    G = instance.n_generators
    kind = instance.design.kind
    has_option = kind is DesignKind.EMIR
    has_forecast_price = kind is DesignKind.EMO_LF
    names = _generator_names(instance)

    specs: list[VariableSpec] = []
    counter = 0

    def take(name: str, var_kind: VariableKind, block: str) -> int:
        nonlocal counter
        specs.append(VariableSpec(name=name, kind=var_kind, block=block))
        counter += 1
        return counter - 1

    def take_s(stem: str, var_kind: VariableKind, block: str) -> np.ndarray:
        return np.array(
            [take(f"{stem}[{s}]", var_kind, block) for s in range(S)], dtype=int
        )

    NN, FR = VariableKind.NON_NEGATIVE, VariableKind.FREE

    rt_generation = np.empty((G, S), dtype=int)
    rt_fuel_purchase = np.empty((G, S), dtype=int)
    fuel_resale = np.empty((G, S), dtype=int)
    fuel_balance_dual = np.empty((G, S), dtype=int)
    rt_capacity_dual = np.empty((G, S), dtype=int)
    cvar_excess = None if risk_neutral else np.empty((G, S), dtype=int)
    risk_weight = None if risk_neutral else np.empty((G, S), dtype=int)
    da_sale = np.empty(G, dtype=int)
    advance_fuel_purchase = np.empty(G, dtype=int)
    da_capacity_dual = np.empty(G, dtype=int)
    var_level = None if risk_neutral else np.empty(G, dtype=int)
    option_sale = np.empty(G, dtype=int) if has_option else None

    for i, gname in enumerate(names):
        rt_generation[i] = take_s(f"{gname}.rt_generation", NN, gname)
        rt_fuel_purchase[i] = take_s(f"{gname}.rt_fuel_purchase", NN, gname)
        fuel_resale[i] = take_s(f"{gname}.fuel_resale", NN, gname)
        fuel_balance_dual[i] = take_s(f"{gname}.fuel_balance_dual", FR, gname)
        rt_capacity_dual[i] = take_s(f"{gname}.rt_capacity_dual", NN, gname)
        if not risk_neutral:
            cvar_excess[i] = take_s(f"{gname}.cvar_excess", NN, gname)
            risk_weight[i] = take_s(f"{gname}.risk_weight", NN, gname)
        da_sale[i] = take(f"{gname}.da_sale", NN, gname)
        advance_fuel_purchase[i] = take(f"{gname}.advance_fuel_purchase", NN, gname)
        da_capacity_dual[i] = take(f"{gname}.da_capacity_dual", NN, gname)
        if not risk_neutral:
            var_level[i] = take(f"{gname}.var_level", FR, gname)
        if has_option:
            option_sale[i] = take(f"{gname}.option_sale", NN, gname)

    da_purchase = take("demand.da_purchase", NN, "demand")
    if risk_neutral:
        demand_var_level = None
        demand_cvar_excess = None
        demand_risk_weight = None
    else:
        demand_var_level = take("demand.var_level", FR, "demand")
        demand_cvar_excess = take_s("demand.cvar_excess", NN, "demand")
        demand_risk_weight = take_s("demand.risk_weight", NN, "demand")

    da_sell_arb = take("arbitrage.da_sell", NN, "arbitrage")
    da_buy_arb = take("arbitrage.da_buy", NN, "arbitrage")

    da_price = take("market.da_price", FR, "market")
    rt_price = take_s("market.rt_price", FR, "market")
    option_price = take("market.option_price", NN, "market") if has_option else None
    forecast_price = (
        take("market.forecast_price", NN, "market") if has_forecast_price else None
    )

    layout = VariableLayout(
        n=counter,
        n_scenarios=S,
        n_generators=G,
        risk_neutral=risk_neutral,
        rt_generation=rt_generation,
        rt_fuel_purchase=rt_fuel_purchase,
        fuel_resale=fuel_resale,
        fuel_balance_dual=fuel_balance_dual,
        rt_capacity_dual=rt_capacity_dual,
        cvar_excess=cvar_excess,
        risk_weight=risk_weight,
        da_sale=da_sale,
        advance_fuel_purchase=advance_fuel_purchase,
        da_capacity_dual=da_capacity_dual,
        var_level=var_level,
        option_sale=option_sale,
        da_purchase=da_purchase,
        demand_var_level=demand_var_level,
        demand_cvar_excess=demand_cvar_excess,
        demand_risk_weight=demand_risk_weight,
        da_sell_arb=da_sell_arb,
        da_buy_arb=da_buy_arb,
        da_price=da_price,
        rt_price=rt_price,
        option_price=option_price,
        forecast_price=forecast_price,
    )
    return layout, specs


@dataclass(frozen=True)
class MarketModel:
    """An assembled instance: the MCP system plus its index layout."""

    instance: MarketInstance
    layout: VariableLayout
    system: MCPSystem

    @property
    def risk_neutral(self) -> bool:
        return self.layout.risk_neutral


def _scenario_profits(
    instance: MarketInstance,
    layout: VariableLayout,
    z: np.ndarray,
    plus_payoff: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-scenario profits of every agent plus total physical cost.

    Returns ``(generator_profit (G, S), demand_profit (S,), arbitrage_profit
    (S,), physical_cost (S,))`` where ``plus_payoff`` is the per-scenario
    option closeout ``max(rt_price - strike, 0)`` (zeros outside the
    imbalance-reserve design).
    """
    L = layout
    kind = instance.design.kind
    D = instance.scenarios.rt_demand
    lam_da = z[L.da_price]
    lam = z[L.rt_price]
    G, S = L.n_generators, L.n_scenarios

    gen_profit = np.empty((G, S))
    physical_cost = np.zeros(S)
    total_option = 0.0
    for i, g in enumerate(instance.generators):
        g_rt = z[L.rt_generation[i]]
        v_rt = z[L.rt_fuel_purchase[i]]
        w = z[L.fuel_resale[i]]
        g_da = z[L.da_sale[i]]
        v_da = z[L.advance_fuel_purchase[i]]
        cost = (
            g.marginal_cost * g_rt
            + g.advance_fuel_cost * v_da
            + g.spot_fuel_cost * v_rt
            - g.resale_value * w
        )
        profit = lam_da * g_da + lam * (g_rt - g_da) - cost
        if kind is DesignKind.EMIR:
            e = z[L.option_sale[i]]
            rho = z[L.option_price]
            profit += rho * (g_da + e) - plus_payoff * e
        elif kind is DesignKind.EMO_LF:
            profit += z[L.forecast_price] * g_da
        gen_profit[i] = profit
        physical_cost += cost
        if kind is DesignKind.EMIR:
            total_option += z[L.option_sale[i]]

    d_da = z[L.da_purchase]
    demand_profit = -lam_da * d_da - lam * (D - d_da)
    if kind is DesignKind.EMIR:
        demand_profit = demand_profit - z[L.option_price] * instance.design.forecast
        demand_profit = demand_profit + plus_payoff * total_option
    elif kind is DesignKind.EMO_LF:
        demand_profit = demand_profit - z[L.forecast_price] * instance.design.forecast

    a = z[L.da_sell_arb]
    b = z[L.da_buy_arb]
    arb_profit = (lam_da - lam) * a + (lam - lam_da) * b
    return gen_profit, demand_profit, arb_profit, physical_cost


def _build_residual(instance: MarketInstance, layout: VariableLayout):
    """Compile the residual function F(z) for the given instance/layout."""
    L = layout
    S, G = L.n_scenarios, L.n_generators
    kind = instance.design.kind
    pi = instance.scenarios.probability
    D = instance.scenarios.rt_demand
    strike = instance.design.strike
    forecast = instance.design.forecast
    participates = instance.demand.participates_da
    gens = instance.generators
    alpha_d = instance.demand.risk_alpha

    def residual_fn(z: np.ndarray, plus_mult: np.ndarray | None) -> np.ndarray:
        out = np.empty(L.n)
        lam_da = z[L.da_price]
        lam = z[L.rt_price]

        if kind is DesignKind.EMIR:
            arg = lam - strike
            if plus_mult is None:
                plus_payoff = np.maximum(arg, 0.0)
            else:
                plus_payoff = plus_mult * arg
            rho = z[L.option_price]
        else:
            plus_payoff = np.zeros(S)
            rho = 0.0

        if L.risk_neutral:
            gen_profit = demand_profit = None
        else:
            gen_profit, demand_profit, _, _ = _scenario_profits(
                instance, L, z, plus_payoff
            )

        total_da_sale = 0.0
        total_rt_gen = np.zeros(S)
        total_option = 0.0
        for i, g in enumerate(gens):
            g_rt = z[L.rt_generation[i]]
            v_rt = z[L.rt_fuel_purchase[i]]
            w = z[L.fuel_resale[i]]
            mu = z[L.fuel_balance_dual[i]]
            gam = z[L.rt_capacity_dual[i]]
            g_da = z[L.da_sale[i]]
            v_da = z[L.advance_fuel_purchase[i]]
            delta = z[L.da_capacity_dual[i]]
            q = pi if L.risk_neutral else z[L.risk_weight[i]]

            out[L.rt_generation[i]] = (g.marginal_cost - lam) * q + mu + gam
            out[L.rt_fuel_purchase[i]] = g.spot_fuel_cost * q - mu
            out[L.fuel_resale[i]] = mu - g.resale_value * q
            out[L.fuel_balance_dual[i]] = g_rt - g.fuel_endowment - v_rt - v_da + w
            out[L.rt_capacity_dual[i]] = g.capacity - g_rt

            if not L.risk_neutral:
                u = z[L.cvar_excess[i]]
                eta = z[L.var_level[i]]
                out[L.cvar_excess[i]] = pi / g.risk_alpha - q
                out[L.risk_weight[i]] = u - eta + gen_profit[i]
                out[L.var_level[i]] = q.sum() - 1.0

            da_stat = q @ lam - lam_da + delta
            cap_da = g.capacity - g_da
            if kind is DesignKind.EMIR:
                e = z[L.option_sale[i]]
                da_stat -= rho
                cap_da -= e
                out[L.option_sale[i]] = plus_payoff @ q - rho + delta
                total_option += e
            elif kind is DesignKind.EMO_LF:
                da_stat -= z[L.forecast_price]
            out[L.da_sale[i]] = da_stat
            out[L.advance_fuel_purchase[i]] = g.advance_fuel_cost - mu.sum()
            out[L.da_capacity_dual[i]] = cap_da

            total_da_sale += g_da
            total_rt_gen += g_rt

        d_da = z[L.da_purchase]
        if L.risk_neutral:
            q_d = pi
        else:
            q_d = z[L.demand_risk_weight]
            u_d = z[L.demand_cvar_excess]
            eta_d = z[L.demand_var_level]
            out[L.demand_cvar_excess] = pi / alpha_d - q_d
            out[L.demand_risk_weight] = u_d - eta_d + demand_profit
            out[L.demand_var_level] = q_d.sum() - 1.0
        if participates:
            out[L.da_purchase] = lam_da - q_d @ lam
        else:
            out[L.da_purchase] = d_da

        expected_rt_price = pi @ lam
        out[L.da_sell_arb] = expected_rt_price - lam_da
        out[L.da_buy_arb] = lam_da - expected_rt_price

        a = z[L.da_sell_arb]
        b = z[L.da_buy_arb]
        out[L.da_price] = total_da_sale + a - d_da - b
        out[L.rt_price] = total_rt_gen - D
        if kind is DesignKind.EMIR:
            out[L.option_price] = total_da_sale + total_option - forecast
        elif kind is DesignKind.EMO_LF:
            out[L.forecast_price] = total_da_sale - forecast
        return out

    return residual_fn


def _build_default_start(instance: MarketInstance, layout: VariableLayout) -> np.ndarray:
    """Deterministic starting point: everything zero except the probability
    weights (set to the scenario probabilities) and the prices (real-time set
    to the costliest generator's full marginal cost per scenario, day-ahead to
    its expectation)."""
    L = layout
    z0 = np.zeros(L.n)
    pi = instance.scenarios.probability
    lam0 = np.max(
        np.stack(
            [g.marginal_cost + g.spot_fuel_cost for g in instance.generators]
        ),
        axis=0,
    )
    z0[L.rt_price] = lam0
    z0[L.da_price] = pi @ lam0
    if not L.risk_neutral:
        for i in range(L.n_generators):
            z0[L.risk_weight[i]] = pi
        z0[L.demand_risk_weight] = pi
    return z0


def _build_initializer(
    instance: MarketInstance, layout: VariableLayout
) -> BlockInitializer:
    """Warm-up recipe for the full (risk-averse) system.

    The CVaR variables of every agent are determined by that agent's
    scenario profits: given the rest of the point, the value-at-risk level,
    excess losses, and risk weights have a closed form
    (:func:`cvar_tail_decomposition`). The initializer therefore tells the
    solver to first solve the sub-system of all non-CVaR equations with the
    risk weights held at their current values, then complete the CVaR block
    analytically from the resulting profits. At ``risk_alpha == 1`` the
    completion is exact (weights equal probabilities regardless of profits).
    """
    L = layout
    pi = instance.scenarios.probability
    kind = instance.design.kind
    strike = instance.design.strike
    alphas = [g.risk_alpha for g in instance.generators]
    alpha_d = instance.demand.risk_alpha

    cvar_idx: list[int] = []
    for i in range(L.n_generators):
        cvar_idx.append(int(L.var_level[i]))
        cvar_idx.extend(int(j) for j in L.cvar_excess[i])
        cvar_idx.extend(int(j) for j in L.risk_weight[i])
    cvar_idx.append(int(L.demand_var_level))
    cvar_idx.extend(int(j) for j in L.demand_cvar_excess)
    cvar_idx.extend(int(j) for j in L.demand_risk_weight)
    mask = np.ones(L.n, dtype=bool)
    mask[cvar_idx] = False
    newton_indices = np.flatnonzero(mask)

    def completion(z: np.ndarray) -> np.ndarray:
        z = np.array(z, dtype=float)
        if kind is DesignKind.EMIR:
            payoff = np.maximum(z[L.rt_price] - strike, 0.0)
        else:
            payoff = np.zeros(L.n_scenarios)
        gen_profit, demand_profit, _, _ = _scenario_profits(
            instance, L, z, payoff
        )
        for i in range(L.n_generators):
            level, excess, weights = cvar_tail_decomposition(
                gen_profit[i], pi, alphas[i]
            )
            z[L.var_level[i]] = level
            z[L.cvar_excess[i]] = excess
            z[L.risk_weight[i]] = weights
        level, excess, weights = cvar_tail_decomposition(
            demand_profit, pi, alpha_d
        )
        z[L.demand_var_level] = level
        z[L.demand_cvar_excess] = excess
        z[L.demand_risk_weight] = weights
        return z

    return BlockInitializer(newton_indices=newton_indices, completion=completion)


def assemble(instance: MarketInstance, risk_neutral: bool = False) -> MarketModel:
    """Assemble the equilibrium MCP for an instance.

    Args:
        instance: a validated market instance.
        risk_neutral: build the reduced system with scenario probabilities in
            place of risk weights and no CVaR variables. Only legal when
            every agent has ``risk_alpha == 1``.

    Raises:
        ValueError: if ``risk_neutral=True`` but some agent is risk averse.
    """
    if risk_neutral:
        averse = [
            g.name or f"g{i + 1}"
            for i, g in enumerate(instance.generators)
            if g.risk_alpha != 1.0
        ]
        if instance.demand.risk_alpha != 1.0:
            averse.append("demand")
        if averse:
            raise ValueError(
                "reduced risk-neutral assembly requires risk_alpha == 1 for "
                "every agent; risk-averse: " + ", ".join(averse)
            )
    layout, specs = _build_layout_and_specs(instance, risk_neutral)
    residual_fn = _build_residual(instance, layout)
    if instance.design.kind is DesignKind.EMIR:
        strike = instance.design.strike
        rt_idx = layout.rt_price

        def _closeout_args(z: np.ndarray) -> np.ndarray:
            return z[rt_idx] - strike

        kinks = (PlusKinkGroup(name="option_closeout", args=_closeout_args),)
    else:
        kinks = ()
    system = MCPSystem(
        variables=tuple(specs),
        residual_fn=residual_fn,
        plus_kinks=kinks,
        default_start=_build_default_start(instance, layout),
        initializer=None if risk_neutral else _build_initializer(instance, layout),
    )
    return MarketModel(instance=instance, layout=layout, system=system)


def realized_cvar(
    values: np.ndarray, probabilities: np.ndarray, alpha: float
) -> float:
    """CVaR at tail mass ``alpha`` of a discrete outcome distribution.

    Uses the Rockafellar-Uryasev variational form, whose maximum over the
    value-at-risk level is attained at one of the outcomes:
    ``max_eta (eta - sum_s p_s * max(eta - v_s, 0) / alpha)``. With
    ``alpha = 1`` this is the plain expectation.
    """
    values = np.asarray(values, dtype=float)
    probabilities = np.asarray(probabilities, dtype=float)
    best = -np.inf
    for eta in values:
        best = max(
            best,
            eta
            - float(probabilities @ np.maximum(eta - values, 0.0)) / float(alpha),
        )
    return best


def cvar_tail_decomposition(
    values: np.ndarray, probabilities: np.ndarray, alpha: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Optimizers of the Rockafellar-Uryasev CVaR form at tail mass ``alpha``.

    Returns ``(level, excess, weights)``: the value-at-risk ``level``, the
    per-scenario shortfalls ``excess = max(level - values, 0)``, and one
    valid supergradient choice of distorted scenario ``weights`` (mass
    ``probability / alpha`` on outcomes strictly below the level, the
    remainder on the level outcome, zero above). With ``alpha = 1`` the
    weights equal the probabilities and the level is the best outcome.
    """
    values = np.asarray(values, dtype=float)
    probabilities = np.asarray(probabilities, dtype=float)
    order = np.argsort(values, kind="stable")
    weights = np.zeros_like(probabilities)
    mass = 0.0
    level = float(values[order[-1]])
    for s in order:
        cap = probabilities[s] / alpha
        if mass + cap < 1.0 - 1e-12:
            weights[s] = cap
            mass += cap
        else:
            weights[s] = 1.0 - mass
            level = float(values[s])
            break
    excess = np.maximum(level - values, 0.0)
    return level, excess, weights


@dataclass(frozen=True)
class ProfitReport:
    """Per-scenario profits and risk summaries at a candidate solution."""

    generator_profit: np.ndarray  # (G, S)
    demand_profit: np.ndarray  # (S,)
    arbitrage_profit: np.ndarray  # (S,)
    physical_cost: np.ndarray  # (S,)
    expected_generator_profit: np.ndarray  # (G,)
    cvar_generator_profit: np.ndarray  # (G,)
    expected_demand_profit: float
    cvar_demand_profit: float


def evaluate_profits(model: MarketModel, z: np.ndarray) -> ProfitReport:
    """Evaluate every agent's per-scenario profit at ``z``.

    Generator profit combines day-ahead sales, real-time imbalance
    settlement, fuel costs and resales, plus the design-specific option or
    uplift cash flows. Demand profit is the (negative) cost of serving the
    real-time load. ``physical_cost`` is the total production cost incurred
    in each scenario; since every payment nets out between agents, total
    profits plus physical cost must sum to zero scenario by scenario.
    """
    instance, L = model.instance, model.layout
    z = np.asarray(z, dtype=float)
    if instance.design.kind is DesignKind.EMIR:
        plus_payoff = np.maximum(z[L.rt_price] - instance.design.strike, 0.0)
    else:
        plus_payoff = np.zeros(L.n_scenarios)
    gen_profit, demand_profit, arb_profit, physical_cost = _scenario_profits(
        instance, L, z, plus_payoff
    )
    pi = instance.scenarios.probability
    expected_gen = gen_profit @ pi
    cvar_gen = np.array(
        [
            realized_cvar(gen_profit[i], pi, g.risk_alpha)
            for i, g in enumerate(instance.generators)
        ]
    )
    return ProfitReport(
        generator_profit=gen_profit,
        demand_profit=demand_profit,
        arbitrage_profit=arb_profit,
        physical_cost=physical_cost,
        expected_generator_profit=expected_gen,
        cvar_generator_profit=cvar_gen,
        expected_demand_profit=float(pi @ demand_profit),
        cvar_demand_profit=realized_cvar(
            demand_profit, pi, instance.demand.risk_alpha
        ),
    )


def transform_option_solution_to_energy_only(
    model: MarketModel, z: np.ndarray
) -> tuple[MarketModel, np.ndarray]:
    """Map an imbalance-reserve solution onto the energy-only system.

    Each generator's option quantity is folded into its day-ahead sale, and
    the day-ahead buying trader absorbs the extra sales so the day-ahead
    market still clears; every other coordinate carries over. When the option
    price is zero, this maps equilibria of the imbalance-reserve design onto
    equilibria of the energy-only design - the equivalence the property
    checks certify.
    """
    instance = model.instance
    if instance.design.kind is not DesignKind.EMIR:
        raise ValueError("transform expects an imbalance-reserve model")
    from .data import MarketDesign

    emo_instance = instance.with_design(MarketDesign(kind=DesignKind.EMO))
    emo_model = assemble(emo_instance, risk_neutral=model.risk_neutral)
    src, dst = model.layout, emo_model.layout
    z = np.asarray(z, dtype=float)
    out = np.zeros(dst.n)

    per_scenario = [
        "rt_generation",
        "rt_fuel_purchase",
        "fuel_resale",
        "fuel_balance_dual",
        "rt_capacity_dual",
    ]
    per_gen = ["da_sale", "advance_fuel_purchase", "da_capacity_dual"]
    if not model.risk_neutral:
        per_scenario += ["cvar_excess", "risk_weight"]
        per_gen += ["var_level"]
    for field_name in per_scenario + per_gen:
        out[getattr(dst, field_name)] = z[getattr(src, field_name)]

    total_option = float(z[src.option_sale].sum())
    out[dst.da_sale] = z[src.da_sale] + z[src.option_sale]
    out[dst.da_buy_arb] = z[src.da_buy_arb] + total_option

    out[dst.da_purchase] = z[src.da_purchase]
    if not model.risk_neutral:
        out[dst.demand_var_level] = z[src.demand_var_level]
        out[dst.demand_cvar_excess] = z[src.demand_cvar_excess]
        out[dst.demand_risk_weight] = z[src.demand_risk_weight]
    out[dst.da_sell_arb] = z[src.da_sell_arb]
    out[dst.da_price] = z[src.da_price]
    out[dst.rt_price] = z[src.rt_price]
    return emo_model, out


def solution_to_dict(model: MarketModel, z: np.ndarray) -> dict[str, Any]:
    """Arrange a solution vector as a nested, JSON-ready dictionary."""
    L = model.layout
    z = np.asarray(z, dtype=float)
    gens: dict[str, Any] = {}
    for i, gname in enumerate(_generator_names(model.instance)):
        entry: dict[str, Any] = {
            "rt_generation": z[L.rt_generation[i]].tolist(),
            "rt_fuel_purchase": z[L.rt_fuel_purchase[i]].tolist(),
            "fuel_resale": z[L.fuel_resale[i]].tolist(),
            "fuel_balance_dual": z[L.fuel_balance_dual[i]].tolist(),
            "rt_capacity_dual": z[L.rt_capacity_dual[i]].tolist(),
            "da_sale": float(z[L.da_sale[i]]),
            "advance_fuel_purchase": float(z[L.advance_fuel_purchase[i]]),
            "da_capacity_dual": float(z[L.da_capacity_dual[i]]),
        }
        if not L.risk_neutral:
            entry["cvar_excess"] = z[L.cvar_excess[i]].tolist()
            entry["risk_weight"] = z[L.risk_weight[i]].tolist()
            entry["var_level"] = float(z[L.var_level[i]])
        if L.option_sale is not None:
            entry["option_sale"] = float(z[L.option_sale[i]])
        gens[gname] = entry

    demand: dict[str, Any] = {"da_purchase": float(z[L.da_purchase])}
    if not L.risk_neutral:
        demand["var_level"] = float(z[L.demand_var_level])
        demand["cvar_excess"] = z[L.demand_cvar_excess].tolist()
        demand["risk_weight"] = z[L.demand_risk_weight].tolist()

    prices: dict[str, Any] = {
        "da_price": float(z[L.da_price]),
        "rt_price": z[L.rt_price].tolist(),
    }
    if L.option_price is not None:
        prices["option_price"] = float(z[L.option_price])
    if L.forecast_price is not None:
        prices["forecast_price"] = float(z[L.forecast_price])

    return {
        "generators": gens,
        "demand": demand,
        "arbitrage": {
            "da_sell": float(z[L.da_sell_arb]),
            "da_buy": float(z[L.da_buy_arb]),
        },
        "prices": prices,
    }

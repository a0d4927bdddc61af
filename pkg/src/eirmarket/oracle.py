"""Independent verification of candidate equilibria.

Three audit routes, none of which share code with the Newton solver:

* a two-stage welfare LP whose clearing duals must reproduce the
  equilibrium prices of risk-neutral instances,
* per-agent best-response LPs at fixed prices, whose optima must match
  each agent's realized risk-adjusted profit at the candidate solution,
* a per-scenario cash-flow audit of the market settlements.

All linear programs run on the in-repo dense simplex.  A coarse-to-fine
grid search over the generator's first-stage decisions provides a
solver-free bound used to certify the simplex on small cases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import MarketModel, _scenario_profits, realized_cvar
from .data import DesignKind, MarketInstance
from .simplex import LPStatus, solve_lp

DEFAULT_GAP_TOL = 1e-6
MONEY_BALANCE_TOL = 1e-8
ARBITRAGE_SPREAD_TOL = 1e-9


@dataclass(frozen=True)
class EquilibriumPrices:
    """Fixed prices an agent takes as given when best-responding."""

    da_price: float
    rt_prices: np.ndarray
    option_premium: float = 0.0
    forecast_price: float = 0.0

    def closeout(self, instance: MarketInstance) -> np.ndarray:
        """Per-scenario option payoff ``max(rt_price - strike, 0)``."""
        if instance.design.kind is DesignKind.EMIR:
            return np.maximum(
                np.asarray(self.rt_prices, dtype=float)
                - instance.design.strike,
                0.0,
            )
        return np.zeros(len(self.rt_prices))


def extract_prices(model: MarketModel, z: np.ndarray) -> EquilibriumPrices:
    """Read the market prices out of a stacked solver point."""
    layout = model.layout
    premium = 0.0
    forecast_price = 0.0
    if layout.option_price is not None:
        premium = float(z[layout.option_price])
    if layout.forecast_price is not None:
        forecast_price = float(z[layout.forecast_price])
    return EquilibriumPrices(
        da_price=float(z[layout.da_price]),
        rt_prices=np.asarray(z[layout.rt_price], dtype=float).copy(),
        option_premium=premium,
        forecast_price=forecast_price,
    )


# ---------------------------------------------------------------------------
# Welfare LP
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WelfareResult:
    """Cost-minimizing dispatch and its clearing duals."""

    status: LPStatus
    total_cost: float | None
    rt_generation: np.ndarray | None  # (G, S)
    rt_fuel_purchase: np.ndarray | None  # (G, S)
    fuel_resale: np.ndarray | None  # (G, S)
    advance_fuel: np.ndarray | None  # (G,)
    rt_prices: np.ndarray | None  # (S,)
    da_price: float | None


def solve_welfare_lp(instance: MarketInstance) -> WelfareResult:
    """Minimize expected physical cost of serving real-time demand.

    Variables per generator: real-time generation, spot fuel purchase and
    fuel resale per scenario, plus one advance fuel purchase.  Equality
    rows are per-scenario energy clearing (their duals, divided by the
    scenario probability, are the real-time prices) and per-generator
    per-scenario fuel balances.  Capacity rows are inequalities.

    Intended for risk-neutral comparisons: with every tail mass at 1 the
    competitive equilibrium prices equal these duals.
    """
    pi = np.asarray(instance.scenarios.probability, dtype=float)
    demand = np.asarray(instance.scenarios.rt_demand, dtype=float)
    gens = instance.generators
    g_count, s_count = len(gens), pi.size

    per_gen = 3 * s_count + 1  # g(S), v_rt(S), w(S), v_da
    n = g_count * per_gen

    def col_g(i: int, s: int) -> int:
        return i * per_gen + s

    def col_vrt(i: int, s: int) -> int:
        return i * per_gen + s_count + s

    def col_w(i: int, s: int) -> int:
        return i * per_gen + 2 * s_count + s

    def col_vda(i: int) -> int:
        return i * per_gen + 3 * s_count

    c = np.zeros(n)
    for i, gen in enumerate(gens):
        for s in range(s_count):
            c[col_g(i, s)] = pi[s] * gen.marginal_cost
            c[col_vrt(i, s)] = pi[s] * gen.spot_fuel_cost[s]
            c[col_w(i, s)] = -pi[s] * gen.resale_value[s]
        c[col_vda(i)] = gen.advance_fuel_cost

    # Equality rows: clearing per scenario first, then fuel balances.
    n_eq = s_count + g_count * s_count
    a_eq = np.zeros((n_eq, n))
    b_eq = np.zeros(n_eq)
    for s in range(s_count):
        for i in range(g_count):
            a_eq[s, col_g(i, s)] = 1.0
        b_eq[s] = demand[s]
    row = s_count
    for i, gen in enumerate(gens):
        for s in range(s_count):
            a_eq[row, col_g(i, s)] = 1.0
            a_eq[row, col_w(i, s)] = 1.0
            a_eq[row, col_vrt(i, s)] = -1.0
            a_eq[row, col_vda(i)] = -1.0
            b_eq[row] = gen.fuel_endowment
            row += 1

    a_ub = np.zeros((g_count * s_count, n))
    b_ub = np.zeros(g_count * s_count)
    row = 0
    for i, gen in enumerate(gens):
        for s in range(s_count):
            a_ub[row, col_g(i, s)] = 1.0
            b_ub[row] = gen.capacity
            row += 1

    result = solve_lp(c, a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=b_eq)
    if result.status is not LPStatus.OPTIMAL:
        return WelfareResult(result.status, None, None, None, None, None, None, None)

    x = result.x
    rt_generation = np.empty((g_count, s_count))
    rt_fuel = np.empty((g_count, s_count))
    resale = np.empty((g_count, s_count))
    advance = np.empty(g_count)
    for i in range(g_count):
        for s in range(s_count):
            rt_generation[i, s] = x[col_g(i, s)]
            rt_fuel[i, s] = x[col_vrt(i, s)]
            resale[i, s] = x[col_w(i, s)]
        advance[i] = x[col_vda(i)]
    rt_prices = result.eq_duals[:s_count] / pi
    da_price = float(pi @ rt_prices)
    return WelfareResult(
        status=LPStatus.OPTIMAL,
        total_cost=float(result.objective),
        rt_generation=rt_generation,
        rt_fuel_purchase=rt_fuel,
        fuel_resale=resale,
        advance_fuel=advance,
        rt_prices=rt_prices,
        da_price=da_price,
    )


# ---------------------------------------------------------------------------
# Agent best-response LPs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AgentLPResult:
    """Optimum of one agent's problem at fixed prices."""

    status: LPStatus
    optimum: float | None
    decision: dict | None


def _risk_lp(
    c_z: np.ndarray,
    z_const: np.ndarray,
    pi: np.ndarray,
    alpha: float,
    a_ub: np.ndarray,
    b_ub: np.ndarray,
    a_eq: np.ndarray | None,
    b_eq: np.ndarray | None,
) -> AgentLPResult:
    """Maximize CVaR_alpha of a profit linear in the decision variables.

    ``c_z`` has shape (S, m): scenario profit is ``c_z[s] @ x + z_const[s]``.
    The variational form appends a free value-at-risk level (split into a
    positive/negative pair) and per-scenario excess variables, turning the
    risk-adjusted objective into a plain LP solved by the simplex.
    """
    s_count, m = c_z.shape
    # Columns: x(m), eta_plus, eta_minus, u(S).
    n = m + 2 + s_count
    cost = np.zeros(n)
    cost[m] = -1.0
    cost[m + 1] = 1.0
    cost[m + 2 :] = pi / alpha

    # u_s >= eta - Z_s  ->  eta - u_s - c_z[s] @ x <= z_const[s]
    risk_rows = np.zeros((s_count, n))
    risk_rows[:, :m] = -c_z
    risk_rows[:, m] = 1.0
    risk_rows[:, m + 1] = -1.0
    risk_rows[:, m + 2 :] = -np.eye(s_count)

    ub_rows = [risk_rows]
    ub_rhs = [np.asarray(z_const, dtype=float)]
    if a_ub.size:
        padded = np.zeros((a_ub.shape[0], n))
        padded[:, :m] = a_ub
        ub_rows.append(padded)
        ub_rhs.append(b_ub)
    full_ub = np.vstack(ub_rows)
    full_ub_rhs = np.concatenate(ub_rhs)

    full_eq = None
    full_eq_rhs = None
    if a_eq is not None and a_eq.size:
        full_eq = np.zeros((a_eq.shape[0], n))
        full_eq[:, :m] = a_eq
        full_eq_rhs = b_eq

    result = solve_lp(
        cost, a_ub=full_ub, b_ub=full_ub_rhs, a_eq=full_eq, b_eq=full_eq_rhs
    )
    if result.status is not LPStatus.OPTIMAL:
        return AgentLPResult(result.status, None, None)
    return AgentLPResult(
        LPStatus.OPTIMAL, -float(result.objective), {"x": result.x[:m]}
    )


def generator_best_response(
    instance: MarketInstance, index: int, prices: EquilibriumPrices
) -> AgentLPResult:
    """Exact optimum of generator ``index``'s problem at fixed prices."""
    gen = instance.generators[index]
    pi = np.asarray(instance.scenarios.probability, dtype=float)
    s_count = pi.size
    kind = instance.design.kind
    closeout = prices.closeout(instance)
    has_option = kind is DesignKind.EMIR

    # Decision columns: g(S), v_rt(S), w(S), g_da, v_da, [e].
    m = 3 * s_count + 2 + (1 if has_option else 0)
    col_gda = 3 * s_count
    col_vda = 3 * s_count + 1
    col_e = 3 * s_count + 2

    c_z = np.zeros((s_count, m))
    lam = np.asarray(prices.rt_prices, dtype=float)
    for s in range(s_count):
        c_z[s, s] = lam[s] - gen.marginal_cost
        c_z[s, s_count + s] = -gen.spot_fuel_cost[s]
        c_z[s, 2 * s_count + s] = gen.resale_value[s]
        c_z[s, col_gda] = prices.da_price - lam[s]
        c_z[s, col_vda] = -gen.advance_fuel_cost
        if kind is DesignKind.EMIR:
            c_z[s, col_gda] += prices.option_premium
            c_z[s, col_e] = prices.option_premium - closeout[s]
        elif kind is DesignKind.EMO_LF:
            c_z[s, col_gda] += prices.forecast_price
    z_const = np.zeros(s_count)

    # Fuel balance equalities: g + w - v_rt - v_da = endowment.
    a_eq = np.zeros((s_count, m))
    b_eq = np.full(s_count, gen.fuel_endowment)
    for s in range(s_count):
        a_eq[s, s] = 1.0
        a_eq[s, 2 * s_count + s] = 1.0
        a_eq[s, s_count + s] = -1.0
        a_eq[s, col_vda] = -1.0

    # Capacity rows: g_s <= Q and g_da <= Q.
    a_ub = np.zeros((s_count + 1, m))
    b_ub = np.full(s_count + 1, gen.capacity)
    for s in range(s_count):
        a_ub[s, s] = 1.0
    a_ub[s_count, col_gda] = 1.0

    return _risk_lp(c_z, z_const, pi, gen.risk_alpha, a_ub, b_ub, a_eq, b_eq)


def demand_best_response(
    instance: MarketInstance,
    prices: EquilibriumPrices,
    total_options: float = 0.0,
) -> AgentLPResult:
    """Exact optimum of the demand agent's problem at fixed prices.

    ``total_options`` is the generators' combined option sale, exogenous to
    the demand agent but part of its scenario payoff under the
    imbalance-reserve design.
    """
    pi = np.asarray(instance.scenarios.probability, dtype=float)
    lam = np.asarray(prices.rt_prices, dtype=float)
    demand_rt = np.asarray(instance.scenarios.rt_demand, dtype=float)
    kind = instance.design.kind
    closeout = prices.closeout(instance)
    fer = instance.design.forecast

    z_const = -lam * demand_rt
    if kind is DesignKind.EMIR:
        z_const = z_const - prices.option_premium * fer + closeout * total_options
    elif kind is DesignKind.EMO_LF:
        z_const = z_const - prices.forecast_price * fer

    if instance.demand.participates_da:
        c_z = (lam - prices.da_price).reshape(-1, 1)
        a_ub = np.zeros((0, 1))
        b_ub = np.zeros(0)
    else:
        c_z = np.zeros((pi.size, 0))
        a_ub = np.zeros((0, 0))
        b_ub = np.zeros(0)
    return _risk_lp(
        c_z, z_const, pi, instance.demand.risk_alpha, a_ub, b_ub, None, None
    )


def arbitrage_best_response(
    instance: MarketInstance, prices: EquilibriumPrices
) -> AgentLPResult:
    """Optimum of the risk-neutral arbitrager: zero, unless prices split."""
    pi = np.asarray(instance.scenarios.probability, dtype=float)
    spread = prices.da_price - float(pi @ np.asarray(prices.rt_prices))
    if abs(spread) <= ARBITRAGE_SPREAD_TOL:
        return AgentLPResult(LPStatus.OPTIMAL, 0.0, {"spread": spread})
    return AgentLPResult(LPStatus.UNBOUNDED, None, {"spread": spread})


# ---------------------------------------------------------------------------
# Equilibrium certification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AgentGap:
    """One agent's realized objective against its best-response optimum."""

    agent: str
    realized: float
    optimum: float | None
    status: LPStatus

    @property
    def gap(self) -> float:
        if self.optimum is None:
            return float("inf")
        return self.optimum - self.realized


@dataclass(frozen=True)
class BestResponseReport:
    """Best-response gaps plus market clearing checks for a candidate."""

    agents: tuple[AgentGap, ...]
    clearing_violations: tuple[str, ...]

    @property
    def max_gap(self) -> float:
        return max(entry.gap for entry in self.agents)

    def certified(self, tol: float = DEFAULT_GAP_TOL) -> bool:
        return not self.clearing_violations and self.max_gap <= tol


def _clearing_violations(
    model: MarketModel, z: np.ndarray, tol: float
) -> tuple[str, ...]:
    instance = model.instance
    layout = model.layout
    demand_rt = np.asarray(instance.scenarios.rt_demand, dtype=float)
    problems: list[str] = []

    rt_balance = z[layout.rt_generation].sum(axis=0) - demand_rt
    for s, gap in enumerate(rt_balance):
        if abs(gap) > tol:
            problems.append(f"real-time clearing scenario {s}: imbalance {gap:.3e}")

    da_balance = (
        z[layout.da_sale].sum()
        + z[layout.da_sell_arb]
        - z[layout.da_purchase]
        - z[layout.da_buy_arb]
    )
    if abs(da_balance) > tol:
        problems.append(f"day-ahead clearing: imbalance {da_balance:.3e}")

    kind = instance.design.kind
    fer = instance.design.forecast
    if kind is DesignKind.EMIR:
        premium = float(z[layout.option_price])
        covered = float(z[layout.da_sale].sum() + z[layout.option_sale].sum())
        slack = covered - fer
        if premium < -tol:
            problems.append(f"negative option premium {premium:.3e}")
        if slack < -tol:
            problems.append(f"forecast coverage shortfall {slack:.3e}")
        if premium * slack > tol * (1.0 + abs(premium) + abs(slack)):
            problems.append(
                f"option premium not complementary: premium {premium:.3e}, "
                f"surplus {slack:.3e}"
            )
    elif kind is DesignKind.EMO_LF:
        price = float(z[layout.forecast_price])
        slack = float(z[layout.da_sale].sum()) - fer
        if price < -tol:
            problems.append(f"negative forecast price {price:.3e}")
        if slack < -tol:
            problems.append(f"forecast coverage shortfall {slack:.3e}")
        if price * slack > tol * (1.0 + abs(price) + abs(slack)):
            problems.append(
                f"forecast price not complementary: price {price:.3e}, "
                f"surplus {slack:.3e}"
            )
    return tuple(problems)


def check_equilibrium(
    model: MarketModel, z: np.ndarray, tol: float = DEFAULT_GAP_TOL
) -> BestResponseReport:
    """Certify a candidate solution agent by agent against LP optima.

    Every agent's realized risk-adjusted profit is recomputed from the
    settlement definitions, and compared with the exact optimum of that
    agent's problem at the candidate's prices.  Clearing conditions are
    checked separately.  The report certifies the candidate only when all
    gaps are within ``tol`` and no clearing condition is violated.
    """
    instance = model.instance
    layout = model.layout
    pi = np.asarray(instance.scenarios.probability, dtype=float)
    prices = extract_prices(model, z)
    closeout = prices.closeout(instance)
    gen_profit, demand_profit, arb_profit, _ = _scenario_profits(
        instance, layout, z, closeout
    )

    entries: list[AgentGap] = []
    for i, gen in enumerate(instance.generators):
        realized = realized_cvar(gen_profit[i], pi, gen.risk_alpha)
        lp = generator_best_response(instance, i, prices)
        entries.append(AgentGap(gen.name, realized, lp.optimum, lp.status))

    total_options = 0.0
    if layout.option_sale is not None:
        total_options = float(z[layout.option_sale].sum())
    realized_demand = realized_cvar(demand_profit, pi, instance.demand.risk_alpha)
    lp = demand_best_response(instance, prices, total_options)
    entries.append(AgentGap("demand", realized_demand, lp.optimum, lp.status))

    realized_arb = float(pi @ arb_profit)
    lp = arbitrage_best_response(instance, prices)
    entries.append(AgentGap("arbitrage", realized_arb, lp.optimum, lp.status))

    return BestResponseReport(
        agents=tuple(entries),
        clearing_violations=_clearing_violations(model, z, tol),
    )


# ---------------------------------------------------------------------------
# Money balance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MoneyBalanceReport:
    """Per-scenario settlement audit: payments versus receipts."""

    residuals: np.ndarray  # (S,)

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.residuals)))

    def balanced(self, tol: float = MONEY_BALANCE_TOL) -> bool:
        return self.max_abs <= tol


def money_balance(model: MarketModel, z: np.ndarray) -> MoneyBalanceReport:
    """Audit that market settlements conserve cash in every scenario.

    Sums what the demand side pays (energy both stages plus any design
    surcharge) against what generators and the arbitrager jointly receive.
    Fuel-market flows are external purchases, not transfers between market
    participants, so they are excluded.  At an equilibrium the two sides
    cancel exactly through the clearing identities.
    """
    instance = model.instance
    layout = model.layout
    kind = instance.design.kind
    fer = instance.design.forecast

    lam = np.asarray(z[layout.rt_price], dtype=float)
    lam_da = float(z[layout.da_price])
    d_da = float(z[layout.da_purchase])
    demand_rt = np.asarray(instance.scenarios.rt_demand, dtype=float)
    closeout = (
        np.maximum(lam - instance.design.strike, 0.0)
        if kind is DesignKind.EMIR
        else np.zeros(lam.size)
    )

    payments = lam_da * d_da + lam * (demand_rt - d_da)
    receipts = np.zeros(lam.size)
    total_options = 0.0
    for i in range(len(instance.generators)):
        g_da = float(z[layout.da_sale[i]])
        g_rt = np.asarray(z[layout.rt_generation[i]], dtype=float)
        receipts = receipts + lam_da * g_da + lam * (g_rt - g_da)
        if kind is DesignKind.EMIR:
            e_i = float(z[layout.option_sale[i]])
            premium = float(z[layout.option_price])
            receipts = receipts + premium * (g_da + e_i) - closeout * e_i
            total_options += e_i
        elif kind is DesignKind.EMO_LF:
            receipts = receipts + float(z[layout.forecast_price]) * g_da
    if kind is DesignKind.EMIR:
        premium = float(z[layout.option_price])
        payments = payments + premium * fer - closeout * total_options
    elif kind is DesignKind.EMO_LF:
        payments = payments + float(z[layout.forecast_price]) * fer

    a = float(z[layout.da_sell_arb])
    b = float(z[layout.da_buy_arb])
    receipts = receipts + (lam_da - lam) * a + (lam - lam_da) * b

    return MoneyBalanceReport(residuals=payments - receipts)


# ---------------------------------------------------------------------------
# Grid-search certifier for the simplex
# ---------------------------------------------------------------------------


def grid_bound_generator(
    instance: MarketInstance,
    index: int,
    prices: EquilibriumPrices,
    resolution: float = 0.01,
) -> tuple[float, dict]:
    """Solver-free lower bound on a generator's best-response optimum.

    Coarse-to-fine grid over the first-stage decisions (advance fuel,
    day-ahead sale, option sale); second-stage scenario decisions are
    resolved analytically (produce from the cheaper fuel source, resell
    leftovers), so every grid point is feasible and its value exact.  The
    returned value is therefore a valid lower bound on the LP optimum,
    tight to the grid resolution.
    """
    gen = instance.generators[index]
    pi = np.asarray(instance.scenarios.probability, dtype=float)
    lam = np.asarray(prices.rt_prices, dtype=float)
    kind = instance.design.kind
    closeout = prices.closeout(instance)
    has_option = kind is DesignKind.EMIR
    cap = float(gen.capacity)

    def value(v_da: float, g_da: float, e: float) -> float:
        stock = gen.fuel_endowment + v_da
        profits = np.empty(pi.size)
        for s in range(pi.size):
            best = None
            for g in (0.0, min(max(stock, 0.0), cap), cap):
                margin = (lam[s] - gen.marginal_cost) * g
                leftover = stock - g
                if leftover >= 0.0:
                    margin += gen.resale_value[s] * leftover
                else:
                    margin -= gen.spot_fuel_cost[s] * (-leftover)
                if best is None or margin > best:
                    best = margin
            z_s = (
                best
                + (prices.da_price - lam[s]) * g_da
                - gen.advance_fuel_cost * v_da
            )
            if kind is DesignKind.EMIR:
                z_s += prices.option_premium * (g_da + e) - closeout[s] * e
            elif kind is DesignKind.EMO_LF:
                z_s += prices.forecast_price * g_da
            profits[s] = z_s
        return realized_cvar(profits, pi, gen.risk_alpha)

    v_hi = cap + gen.fuel_endowment
    g_hi = cap
    e_hi = max(instance.design.forecast, cap) if has_option else 0.0

    best_val = -np.inf
    best_pt = (0.0, 0.0, 0.0)
    step = max(v_hi, g_hi, e_hi, 1.0) / 10.0
    lo = [0.0, 0.0, 0.0]
    hi = [v_hi, g_hi, e_hi]
    while True:
        axes = [
            np.arange(lo[k], hi[k] + step / 2, step) if hi[k] > lo[k] else np.array([lo[k]])
            for k in range(3)
        ]
        for v_da in axes[0]:
            for g_da in axes[1]:
                for e in axes[2]:
                    val = value(float(v_da), float(g_da), float(e))
                    if val > best_val:
                        best_val = val
                        best_pt = (float(v_da), float(g_da), float(e))
        if step <= resolution:
            break
        lo = [max(0.0, p - step) for p in best_pt]
        hi = [
            min(h, p + step)
            for h, p in zip((v_hi, g_hi, e_hi), best_pt)
        ]
        step = max(step / 10.0, resolution)
    return best_val, {
        "advance_fuel": best_pt[0],
        "da_sale": best_pt[1],
        "option_sale": best_pt[2],
    }

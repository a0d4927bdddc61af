"""Tests for the LP-based verification oracles.

The oracle is trusted only because of these checks: welfare-LP duals and
dispatch are pinned on instances solved by hand; agent best-response
optima are cross-checked against a solver-free grid search; and every
frozen reference equilibrium must certify with near-zero best-response
gaps and an exactly balanced cash audit.
"""

from __future__ import annotations

import numpy as np
import pytest

from eirmarket.assembly import assemble
from eirmarket.data import (
    DemandParams,
    DesignKind,
    GeneratorParams,
    MarketDesign,
    MarketInstance,
    ScenarioSet,
    single_generator_study_instance,
)
from eirmarket.oracle import (
    EquilibriumPrices,
    arbitrage_best_response,
    check_equilibrium,
    demand_best_response,
    generator_best_response,
    extract_prices,
    grid_bound_generator,
    money_balance,
    solve_welfare_lp,
)
from eirmarket.simplex import LPStatus

from equilibrium_points import all_reference_points


REFERENCE_POINTS = all_reference_points()


def reference_ids():
    return [point.name for point in REFERENCE_POINTS]


class TestWelfareLP:
    def test_single_generator_study_instance(self):
        result = solve_welfare_lp(single_generator_study_instance())
        assert result.status is LPStatus.OPTIMAL
        np.testing.assert_allclose(result.rt_prices, [10.0, 15.0], atol=1e-9)
        assert result.da_price == pytest.approx(12.5, abs=1e-9)
        # Spot fuel beats advance fuel in expectation (12.5 < 13): no
        # advance purchase, demand served scenario by scenario.
        np.testing.assert_allclose(result.advance_fuel, [0.0], atol=1e-9)
        np.testing.assert_allclose(result.rt_generation, [[75.0, 125.0]], atol=1e-9)
        np.testing.assert_allclose(result.rt_fuel_purchase, [[75.0, 125.0]], atol=1e-9)
        # Expected cost of serving (75, 125) at spot fuel (10, 15).
        assert result.total_cost == pytest.approx(1312.5, abs=1e-9)

    def test_two_generator_study_instance(self):
        from eirmarket.data import two_generator_study_instance

        result = solve_welfare_lp(two_generator_study_instance())
        assert result.status is LPStatus.OPTIMAL
        # Marginal-cost pricing: the marginal generator's production cost
        # plus its spot fuel cost.  Scenario 3 sits exactly at generator
        # 1's capacity, so its dual may fall anywhere between the two
        # generators' costs; all other scenarios are unique.
        lam = result.rt_prices
        np.testing.assert_allclose(lam[[0, 1, 3, 4]], [15.0, 20.0, 55.0, 105.0], atol=1e-7)
        assert 30.0 - 1e-7 <= lam[2] <= 35.0 + 1e-7
        np.testing.assert_allclose(
            result.rt_generation[0], [50.0, 75.0, 100.0, 100.0, 100.0], atol=1e-7
        )
        np.testing.assert_allclose(
            result.rt_generation[1], [0.0, 0.0, 0.0, 25.0, 50.0], atol=1e-7
        )
        np.testing.assert_allclose(result.advance_fuel, [0.0, 0.0], atol=1e-7)

    def test_cheap_advance_fuel_is_bought_ahead(self):
        # With advance fuel at 1 and spot fuel at 100, the cost minimum
        # buys the largest needed fuel level up front.
        instance = single_generator_study_instance()
        gen = instance.generators[0]
        modified = MarketInstance(
            scenarios=instance.scenarios,
            generators=(
                GeneratorParams(
                    marginal_cost=gen.marginal_cost,
                    advance_fuel_cost=1.0,
                    capacity=gen.capacity,
                    spot_fuel_cost=np.array([100.0, 100.0]),
                    resale_value=np.array([0.0, 0.0]),
                    name=gen.name,
                ),
            ),
            demand=instance.demand,
            design=instance.design,
        )
        result = solve_welfare_lp(modified)
        assert result.status is LPStatus.OPTIMAL
        assert result.advance_fuel[0] == pytest.approx(125.0, abs=1e-9)

    def test_infeasible_when_capacity_short(self):
        instance = single_generator_study_instance()
        gen = instance.generators[0]
        short = MarketInstance(
            scenarios=instance.scenarios,
            generators=(
                GeneratorParams(
                    marginal_cost=gen.marginal_cost,
                    advance_fuel_cost=gen.advance_fuel_cost,
                    capacity=100.0,  # below the 125 MWh peak
                    spot_fuel_cost=gen.spot_fuel_cost,
                    resale_value=gen.resale_value,
                    name=gen.name,
                ),
            ),
            demand=instance.demand,
            design=instance.design,
        )
        result = solve_welfare_lp(short)
        assert result.status is LPStatus.INFEASIBLE


class TestAgentBestResponse:
    def test_risk_neutral_generator_zero_profit_at_equilibrium_prices(self):
        instance = single_generator_study_instance()
        prices = EquilibriumPrices(da_price=12.5, rt_prices=np.array([10.0, 15.0]))
        result = generator_best_response(instance, 0, prices)
        assert result.status is LPStatus.OPTIMAL
        assert result.optimum == pytest.approx(0.0, abs=1e-9)

    def test_generator_exploits_mispriced_scenario(self):
        # Real-time price above the full spot cost in scenario 2 invites
        # full dispatch there: (20 - 15) * 150 = 750 expected at mass 0.5.
        instance = single_generator_study_instance()
        prices = EquilibriumPrices(da_price=12.5, rt_prices=np.array([10.0, 20.0]))
        result = generator_best_response(instance, 0, prices)
        assert result.status is LPStatus.OPTIMAL
        assert result.optimum == pytest.approx(0.5 * 5.0 * 150.0, abs=1e-8)

    def test_demand_value_fixed_when_da_price_fair(self):
        # With the day-ahead price equal to the expected real-time price,
        # the day-ahead purchase has a zero objective coefficient and the
        # optimum equals minus the expected real-time bill.
        instance = single_generator_study_instance()
        base = instance.demand
        instance = MarketInstance(
            scenarios=instance.scenarios,
            generators=instance.generators,
            demand=DemandParams(
                risk_alpha=base.risk_alpha, participates_da=True
            ),
            design=instance.design,
        )
        prices = EquilibriumPrices(da_price=12.5, rt_prices=np.array([10.0, 15.0]))
        result = demand_best_response(instance, prices)
        assert result.status is LPStatus.OPTIMAL
        assert result.optimum == pytest.approx(-1312.5, abs=1e-8)

    def test_demand_without_da_participation(self):
        instance = single_generator_study_instance()
        prices = EquilibriumPrices(da_price=12.5, rt_prices=np.array([10.0, 15.0]))
        result = demand_best_response(instance, prices)
        assert result.status is LPStatus.OPTIMAL
        assert result.optimum == pytest.approx(-1312.5, abs=1e-8)

    def test_risk_averse_demand_below_expected_value(self):
        # CVaR at tail mass 0.5 of the bill (-750, -1875) is the worst
        # case -1875 when the day-ahead market cannot hedge it.
        instance = single_generator_study_instance(demand_alpha=0.5)
        prices = EquilibriumPrices(da_price=12.5, rt_prices=np.array([10.0, 15.0]))
        result = demand_best_response(instance, prices)
        assert result.status is LPStatus.OPTIMAL
        assert result.optimum == pytest.approx(-1875.0, abs=1e-8)

    def test_arbitrage_flags_price_split(self):
        instance = single_generator_study_instance()
        fair = EquilibriumPrices(da_price=12.5, rt_prices=np.array([10.0, 15.0]))
        split = EquilibriumPrices(da_price=13.0, rt_prices=np.array([10.0, 15.0]))
        assert arbitrage_best_response(instance, fair).optimum == 0.0
        assert arbitrage_best_response(instance, split).status is LPStatus.UNBOUNDED


class TestGridCertifier:
    @pytest.mark.parametrize(
        "prices",
        [
            EquilibriumPrices(da_price=12.5, rt_prices=np.array([10.0, 15.0])),
            EquilibriumPrices(da_price=16.0, rt_prices=np.array([12.0, 18.0])),
            EquilibriumPrices(da_price=11.0, rt_prices=np.array([6.0, 16.0])),
        ],
        ids=["equilibrium", "high", "skewed"],
    )
    def test_lp_matches_grid_bound_energy_only(self, prices):
        instance = single_generator_study_instance(alpha=0.7)
        lp = generator_best_response(instance, 0, prices)
        assert lp.status is LPStatus.OPTIMAL
        bound, _ = grid_bound_generator(instance, 0, prices, resolution=0.01)
        # The grid point is feasible, so it can never beat the LP optimum;
        # with 0.01 MWh resolution it must come within a few dollars.
        assert lp.optimum >= bound - 1e-9
        assert lp.optimum == pytest.approx(bound, abs=2.0)

    def test_lp_matches_grid_bound_with_options(self):
        design = MarketDesign(kind=DesignKind.EMIR, strike=12.0, forecast=90.0)
        instance = single_generator_study_instance(design=design, alpha=0.7)
        prices = EquilibriumPrices(
            da_price=14.5,
            rt_prices=np.array([8.0, 15.0]),
            option_premium=1.5,
        )
        lp = generator_best_response(instance, 0, prices)
        assert lp.status is LPStatus.OPTIMAL
        bound, _ = grid_bound_generator(instance, 0, prices, resolution=0.01)
        assert lp.optimum >= bound - 1e-9
        assert lp.optimum == pytest.approx(bound, abs=2.0)


class TestReferencePointCertification:
    @pytest.mark.parametrize(
        "point", REFERENCE_POINTS, ids=reference_ids()
    )
    def test_reference_equilibria_certify(self, point):
        report = check_equilibrium(point.model, point.z)
        gaps = {entry.agent: entry.gap for entry in report.agents}
        assert report.clearing_violations == ()
        assert report.max_gap <= 1e-6, gaps
        # The optimum can never lie below the realized objective.
        assert all(entry.gap >= -1e-6 for entry in report.agents), gaps

    @pytest.mark.parametrize(
        "point", REFERENCE_POINTS, ids=reference_ids()
    )
    def test_reference_money_balance(self, point):
        audit = money_balance(point.model, point.z)
        assert audit.max_abs <= 1e-8
        assert audit.balanced()

    def test_perturbed_clearing_is_flagged(self):
        point = REFERENCE_POINTS[0]
        z = point.z.copy()
        z[point.model.layout.da_sale[0]] += 1.0
        report = check_equilibrium(point.model, z)
        assert report.clearing_violations
        assert not report.certified()

    def test_suboptimal_candidate_has_positive_gap(self):
        # Force the generator to hold 50 MWh of advance fuel at the
        # energy-only equilibrium: feasible, clears, but suboptimal.
        point = next(p for p in REFERENCE_POINTS if p.name == "emo-alpha-1.0")
        model = point.model
        layout = model.layout
        z = point.z.copy()
        z[layout.advance_fuel_purchase[0]] = 50.0
        z[layout.fuel_resale[0]] = np.asarray([50.0, 50.0]) + z[layout.fuel_resale[0]]
        report = check_equilibrium(model, z)
        gen_gap = next(e for e in report.agents if e.agent == "g1").gap
        # 13 $/MWh spent, nothing recovered (resale value 0): gap 650.
        assert gen_gap == pytest.approx(650.0, abs=1e-6)

    def test_extract_prices_roundtrip(self):
        point = next(p for p in REFERENCE_POINTS if p.name == "emir-k12-alpha-0.7")
        prices = extract_prices(point.model, point.z)
        layout = point.model.layout
        assert prices.da_price == point.z[layout.da_price]
        np.testing.assert_array_equal(prices.rt_prices, point.z[layout.rt_price])
        assert prices.option_premium == point.z[layout.option_price]

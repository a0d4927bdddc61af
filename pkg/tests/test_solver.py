"""Tests for the damped semismooth Newton equilibrium solver."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from eirmarket.assembly import assemble
from eirmarket.data import single_generator_study_instance
from eirmarket.mcp import MCPSystem, VariableKind, VariableSpec, complementarity_error
from eirmarket.solver import (
    SolveOptions,
    SolveStatus,
    default_start,
    restart_start,
    solve,
)
from equilibrium_points import all_reference_points


def _quadratic_system() -> MCPSystem:
    """Tiny hand-built system: z0 >= 0 perp z0 - 1, z1 free with z1 + 2 = 0."""

    def residual(z: np.ndarray, plus_mult=None) -> np.ndarray:
        return np.array([z[0] - 1.0, z[1] + 2.0])

    return MCPSystem(
        variables=(
            VariableSpec("x", VariableKind.NON_NEGATIVE, "test"),
            VariableSpec("y", VariableKind.FREE, "test"),
        ),
        residual_fn=residual,
    )


class TestOptionsValidation:
    def test_defaults_are_valid(self):
        opts = SolveOptions()
        assert opts.tol == 1e-9
        assert opts.max_iters == 200
        assert opts.restarts == 20

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"tol": 0.0},
            {"tol": -1e-9},
            {"max_iters": 0},
            {"armijo_sigma": 0.0},
            {"armijo_sigma": 0.5},
            {"max_step_halvings": -1},
            {"restarts": -1},
            {"seed": -3},
            {"proximal_epsilon": -1e-3},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            SolveOptions(**kwargs)


class TestTinySystems:
    def test_solves_linear_system(self):
        system = _quadratic_system()
        z, report = solve(system, SolveOptions(restarts=0))
        assert report.status is SolveStatus.CONVERGED
        assert z == pytest.approx([1.0, -2.0], abs=1e-9)

    def test_converged_means_within_tol(self):
        system = _quadratic_system()
        z, report = solve(system, SolveOptions(restarts=0))
        err = complementarity_error(system, z)
        assert err <= 1e-9
        assert report.complementarity_error == pytest.approx(err)

    def test_start_override_is_attempt_zero(self):
        system = _quadratic_system()
        z, report = solve(
            system, SolveOptions(restarts=0), start=np.array([5.0, 5.0])
        )
        assert report.status is SolveStatus.CONVERGED
        assert report.restart_index == 0


# scenarios whose real-time price is a whole interval of equilibria (tied
# marginal technologies); any value inside the band is a valid landing spot
DEGENERATE_PRICE_BANDS = {
    "two-gen-emo-alpha-1.0": {2: (30.0, 35.0)},
}


class TestReferencePoints:
    """Every frozen equilibrium is reachable from the pinned default start."""

    @pytest.mark.parametrize(
        "point", all_reference_points(), ids=lambda p: p.name
    )
    def test_converges_to_reference(self, point):
        z, report = solve(point.model.system, SolveOptions(restarts=0))
        assert report.status is SolveStatus.CONVERGED, point.name
        assert complementarity_error(point.model.system, z) <= 1e-9
        layout = point.model.layout
        bands = DEGENERATE_PRICE_BANDS.get(point.name, {})
        for s in range(layout.n_scenarios):
            got = float(z[layout.rt_price][s])
            if s in bands:
                lo, hi = bands[s]
                assert lo - 1e-6 <= got <= hi + 1e-6
            else:
                assert got == pytest.approx(
                    float(point.z[layout.rt_price][s]), abs=5e-6
                )
        pi = point.model.instance.scenarios.probability
        if bands:
            # the day-ahead price tracks the landed real-time prices
            assert float(z[layout.da_price]) == pytest.approx(
                float(pi @ z[layout.rt_price]), abs=1e-6
            )
        else:
            assert float(z[layout.da_price]) == pytest.approx(
                float(point.z[layout.da_price]), abs=5e-6
            )

    @pytest.mark.parametrize(
        "point", all_reference_points()[:3], ids=lambda p: p.name
    )
    def test_equilibrium_start_converges_immediately(self, point):
        z, report = solve(
            point.model.system, SolveOptions(restarts=0), start=point.z.copy()
        )
        assert report.status is SolveStatus.CONVERGED
        assert report.iterations == 0


class TestDeterminism:
    def _model(self):
        return assemble(single_generator_study_instance(alpha=0.7, demand_alpha=0.7))

    def test_repeat_solves_bit_identical(self):
        model = self._model()
        z1, r1 = solve(model.system, SolveOptions(restarts=0))
        z2, r2 = solve(model.system, SolveOptions(restarts=0))
        assert np.array_equal(z1, z2)
        assert r1.merit_trace == r2.merit_trace
        assert r1.iterations == r2.iterations

    def test_restart_start_reproducible(self):
        model = self._model()
        a = restart_start(model.system, seed=7, index=3)
        b = restart_start(model.system, seed=7, index=3)
        c = restart_start(model.system, seed=7, index=4)
        d = restart_start(model.system, seed=8, index=3)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert not np.array_equal(a, d)

    def test_restart_start_band(self):
        model = self._model()
        z0 = default_start(model.system)
        zr = restart_start(model.system, seed=0, index=1)
        assert np.all(np.abs(zr - z0) <= 0.5 * (1.0 + np.abs(z0)) + 1e-12)

    def test_default_start_returns_copy(self):
        model = self._model()
        z0 = default_start(model.system)
        z0[:] = 123.0
        assert not np.array_equal(default_start(model.system), z0)


class TestReporting:
    def test_merit_trace_monotone(self):
        model = assemble(
            single_generator_study_instance(alpha=0.7, demand_alpha=0.7)
        )
        _, report = solve(model.system, SolveOptions(restarts=0))
        trace = np.asarray(report.merit_trace)
        assert len(trace) >= 1
        assert np.all(np.diff(trace) <= 1e-12)

    def test_nonnegative_variables_stay_feasible(self):
        for alpha in (1.0, 0.7, 0.4):
            model = assemble(
                single_generator_study_instance(alpha=alpha, demand_alpha=alpha)
            )
            z, report = solve(model.system, SolveOptions(restarts=0))
            assert report.status is SolveStatus.CONVERGED
            mask = ~model.system.free_mask()
            assert np.all(z[mask] >= -1e-9)

    def test_max_iters_status(self):
        model = assemble(
            single_generator_study_instance(alpha=0.4, demand_alpha=0.4)
        )
        _, report = solve(model.system, SolveOptions(max_iters=2, restarts=0))
        assert report.status in (SolveStatus.MAX_ITERS, SolveStatus.SINGULAR)
        assert report.complementarity_error > 1e-9

    def test_attempt_reports_cover_all_attempts(self):
        model = assemble(
            single_generator_study_instance(alpha=0.4, demand_alpha=0.4)
        )
        # starve the iteration budget so every attempt fails, then check the
        # report carries one entry per attempt and returns the best error
        opts = SolveOptions(max_iters=1, restarts=3)
        _, report = solve(model.system, opts)
        assert len(report.attempts) == 4
        assert report.complementarity_error == min(
            a.complementarity_error for a in report.attempts
        )
        assert report.restart_index == min(
            (a.complementarity_error, a.restart_index) for a in report.attempts
        )[1]

    def test_first_converged_attempt_wins(self):
        model = assemble(
            single_generator_study_instance(alpha=0.7, demand_alpha=0.7)
        )
        z, report = solve(model.system, SolveOptions(restarts=5))
        assert report.status is SolveStatus.CONVERGED
        assert report.restart_index == 0
        assert len(report.attempts) == 1


class TestRestarts:
    def test_bad_start_rescued_by_restarts(self):
        model = assemble(
            single_generator_study_instance(alpha=0.7, demand_alpha=0.7)
        )
        bad = np.full(model.system.n, 1e6)
        z, report = solve(model.system, SolveOptions(restarts=10), start=bad)
        assert report.status is SolveStatus.CONVERGED

    def test_restart_prices_agree(self):
        model = assemble(
            single_generator_study_instance(alpha=0.7, demand_alpha=0.7)
        )
        layout = model.layout
        prices = []
        for s in range(4):
            z0 = (
                default_start(model.system)
                if s == 0
                else restart_start(model.system, 0, s)
            )
            z, report = solve(model.system, SolveOptions(restarts=0), start=z0)
            if report.status is SolveStatus.CONVERGED:
                prices.append(
                    np.concatenate(([z[layout.da_price]], z[layout.rt_price]))
                )
        assert len(prices) >= 2
        stack = np.array(prices)
        assert np.abs(stack - stack[0]).max() <= 1e-6


class TestProximalRegularization:
    def test_proximal_solution_solves_anchored_system(self):
        system = _quadratic_system()
        eps = 0.5
        z, report = solve(
            system, SolveOptions(restarts=0, proximal_epsilon=eps)
        )
        assert report.status is SolveStatus.CONVERGED
        # the anchor is the default start (zeros): solution of the anchored
        # system z0 perp (z0 - 1) + eps*z0 = 0, z1 + 2 + eps*z1 = 0
        assert z[0] == pytest.approx(1.0 / (1.0 + eps), abs=1e-8)
        assert z[1] == pytest.approx(-2.0 / (1.0 + eps), abs=1e-8)

    def test_zero_epsilon_is_plain_solve(self):
        system = _quadratic_system()
        z1, _ = solve(system, SolveOptions(restarts=0))
        z2, _ = solve(system, SolveOptions(restarts=0, proximal_epsilon=0.0))
        assert np.array_equal(z1, z2)


class TestStartValidation:
    def test_wrong_shape_start_rejected(self):
        system = _quadratic_system()
        with pytest.raises(ValueError):
            solve(system, SolveOptions(), start=np.zeros(3))

    def test_options_frozen(self):
        opts = SolveOptions()
        with pytest.raises(dataclasses.FrozenInstanceError):
            opts.tol = 1e-3

"""Market instance data model: scenario sets, agents, designs, and JSON I/O.

A :class:`MarketInstance` bundles everything needed to pose one two-settlement
(day-ahead + real-time) market equilibrium problem: a finite scenario set for
the real-time stage, one or more thermal generators with two-part fuel costs,
an aggregate demand agent, and the market design (plain energy-only market, an
energy-only market extended with an imbalance-reserve product, or an
energy-only market with a load-forecast requirement).

All quantities are in MWh, all prices and costs in $/MWh, profits in $.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

import numpy as np

__all__ = [
    "DesignKind",
    "MarketDesign",
    "ScenarioSet",
    "GeneratorParams",
    "DemandParams",
    "MarketInstance",
    "InvalidInstanceError",
    "validate",
    "load_instance",
    "loads_instance",
    "save_instance",
    "instance_to_dict",
    "instance_from_dict",
    "single_generator_study_instance",
    "two_generator_study_instance",
]

#: Sum of scenario probabilities must equal 1 within this absolute tolerance.
PROBABILITY_SUM_TOL = 1e-12


class DesignKind(str, Enum):
    """Which market design the instance is posed under."""

    EMO = "emo"  # energy-only market
    EMIR = "emir"  # energy market with imbalance-reserve product
    EMO_LF = "emo_lf"  # energy-only market with load-forecast requirement


@dataclass
class MarketDesign:
    """Market design selector plus design-specific parameters.

    Attributes:
        kind: one of :class:`DesignKind`.
        strike: strike price of the imbalance-reserve closeout ($/MWh);
            meaningful only for ``emir``. Serialized as ``k``.
        forecast: day-ahead load-forecast / reserve requirement (MWh);
            meaningful for ``emir`` and ``emo_lf``. Serialized as ``fer``.
    """

    kind: DesignKind
    strike: float = 0.0
    forecast: float = 0.0

    def with_strike(self, strike: float) -> "MarketDesign":
        return replace(self, strike=float(strike))


@dataclass
class ScenarioSet:
    """Finite real-time scenario set.

    Attributes:
        probability: strictly positive probabilities summing to 1, shape (S,).
        rt_demand: non-negative real-time load per scenario (MWh), shape (S,).
        legacy_da_demand: optional stored-but-unused day-ahead demand figure
            kept only so files carrying it round-trip unchanged.
    """

    probability: np.ndarray
    rt_demand: np.ndarray
    legacy_da_demand: float | None = None

    def __post_init__(self) -> None:
        self.probability = np.asarray(self.probability, dtype=float)
        self.rt_demand = np.asarray(self.rt_demand, dtype=float)

    @property
    def n_scenarios(self) -> int:
        return self.probability.shape[0]


@dataclass
class GeneratorParams:
    """One thermal generator with a two-part fuel market.

    Fuel can be bought in advance (before scenarios realize) at
    ``advance_fuel_cost``, or on the spot in scenario ``s`` at
    ``spot_fuel_cost[s]``; leftover fuel resells at ``resale_value[s]``.

    Attributes:
        marginal_cost: non-fuel variable generation cost ($/MWh).
        advance_fuel_cost: cost of fuel bought before uncertainty resolves.
        capacity: maximum output (MWh), also caps day-ahead positions.
        fuel_endowment: fuel available at no cost (MWh-equivalent).
        risk_alpha: CVaR tail mass in (0, 1]; 1 means risk-neutral.
        spot_fuel_cost: per-scenario spot fuel cost, shape (S,).
        resale_value: per-scenario fuel resale value, shape (S,);
            must not exceed ``spot_fuel_cost`` componentwise.
        name: identifier used in reports.
    """

    marginal_cost: float
    advance_fuel_cost: float
    capacity: float
    spot_fuel_cost: np.ndarray
    resale_value: np.ndarray
    fuel_endowment: float = 0.0
    risk_alpha: float = 1.0
    name: str = ""

    def __post_init__(self) -> None:
        self.spot_fuel_cost = np.asarray(self.spot_fuel_cost, dtype=float)
        self.resale_value = np.asarray(self.resale_value, dtype=float)


@dataclass
class DemandParams:
    """Aggregate demand agent.

    Attributes:
        risk_alpha: CVaR tail mass in (0, 1]; 1 means risk-neutral.
        participates_da: whether the agent may buy energy day-ahead. When
            False its day-ahead purchase is fixed to zero.
    """

    risk_alpha: float = 1.0
    participates_da: bool = True


@dataclass
class MarketInstance:
    """A complete market equilibrium problem instance."""

    scenarios: ScenarioSet
    generators: list[GeneratorParams]
    demand: DemandParams
    design: MarketDesign

    @property
    def n_scenarios(self) -> int:
        return self.scenarios.n_scenarios

    @property
    def n_generators(self) -> int:
        return len(self.generators)

    def with_design(self, design: MarketDesign) -> "MarketInstance":
        return replace(self, design=design)

    def with_all_generator_alpha(self, alpha: float) -> "MarketInstance":
        gens = [replace(g, risk_alpha=float(alpha)) for g in self.generators]
        return replace(self, generators=gens)

    def with_demand_alpha(self, alpha: float) -> "MarketInstance":
        return replace(self, demand=replace(self.demand, risk_alpha=float(alpha)))


class InvalidInstanceError(ValueError):
    """Raised when an instance fails validation; carries the violation list."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("invalid market instance: " + "; ".join(violations))


def validate(instance: MarketInstance) -> list[str]:
    """Check every structural invariant of a market instance.

    Returns:
        A list of human-readable violation strings; empty iff the instance
        is well-formed. ``load_instance`` accepts exactly the instances for
        which this returns ``[]``.
    """
    v: list[str] = []
    sc = instance.scenarios
    s_count = sc.n_scenarios
    if s_count < 1:
        v.append("scenario set must contain at least one scenario")
        return v
    if sc.rt_demand.shape != (s_count,):
        v.append(
            f"rt demand has shape {sc.rt_demand.shape}, expected ({s_count},)"
        )
        return v
    if not np.all(np.isfinite(sc.probability)) or not np.all(
        np.isfinite(sc.rt_demand)
    ):
        v.append("scenario probabilities and rt demand must be finite")
        return v
    if np.any(sc.probability <= 0.0):
        v.append("every scenario probability must be strictly positive")
    if abs(float(sc.probability.sum()) - 1.0) > PROBABILITY_SUM_TOL:
        v.append(
            f"scenario probabilities sum to {sc.probability.sum()!r}, "
            f"expected 1 within {PROBABILITY_SUM_TOL}"
        )
    if np.any(sc.rt_demand < 0.0):
        v.append("rt demand must be non-negative in every scenario")

    if instance.n_generators < 1:
        v.append("instance must contain at least one generator")
    for idx, g in enumerate(instance.generators):
        tag = g.name or f"generator[{idx}]"
        if g.spot_fuel_cost.shape != (s_count,):
            v.append(f"{tag}: spot fuel cost must have one entry per scenario")
            continue
        if g.resale_value.shape != (s_count,):
            v.append(f"{tag}: resale value must have one entry per scenario")
            continue
        finite = (
            np.isfinite(g.marginal_cost)
            and np.isfinite(g.advance_fuel_cost)
            and np.isfinite(g.capacity)
            and np.isfinite(g.fuel_endowment)
            and np.all(np.isfinite(g.spot_fuel_cost))
            and np.all(np.isfinite(g.resale_value))
        )
        if not finite:
            v.append(f"{tag}: all cost and capacity figures must be finite")
            continue
        if not g.capacity > 0.0:
            v.append(f"{tag}: capacity must be strictly positive")
        if g.fuel_endowment < 0.0:
            v.append(f"{tag}: fuel endowment must be non-negative")
        if not (0.0 < g.risk_alpha <= 1.0):
            v.append(f"{tag}: risk alpha must lie in (0, 1]")
        if np.any(g.resale_value > g.spot_fuel_cost):
            v.append(
                f"{tag}: resale value must not exceed spot fuel cost in any "
                "scenario (no riskless fuel round trip)"
            )

    if not (0.0 < instance.demand.risk_alpha <= 1.0):
        v.append("demand: risk alpha must lie in (0, 1]")

    d = instance.design
    if d.kind is DesignKind.EMIR and d.strike < 0.0:
        v.append("design: strike price must be non-negative")
    if d.kind in (DesignKind.EMIR, DesignKind.EMO_LF) and d.forecast < 0.0:
        v.append("design: load forecast must be non-negative")

    total_capacity = float(sum(g.capacity for g in instance.generators))
    if instance.generators and sc.rt_demand.size:
        if total_capacity < float(sc.rt_demand.max()):
            v.append(
                f"total capacity {total_capacity} cannot serve the peak rt "
                f"demand {float(sc.rt_demand.max())}"
            )
    if d.kind in (DesignKind.EMIR, DesignKind.EMO_LF) and instance.generators:
        if total_capacity < d.forecast:
            v.append(
                f"total capacity {total_capacity} cannot cover the load "
                f"forecast {d.forecast}"
            )
    return v


def _require_keys(obj: dict, keys: Iterable[str], where: str, v: list[str]) -> bool:
    ok = True
    for key in keys:
        if key not in obj:
            v.append(f"{where}: missing required field '{key}'")
            ok = False
    return ok


def instance_from_dict(payload: dict[str, Any]) -> MarketInstance:
    """Build and validate a :class:`MarketInstance` from its dict form.

    Raises:
        InvalidInstanceError: if the payload is malformed or violates any
            invariant checked by :func:`validate`.
    """
    v: list[str] = []
    if not isinstance(payload, dict):
        raise InvalidInstanceError(["top-level payload must be an object"])
    if not _require_keys(payload, ("scenarios", "generators", "design"), "payload", v):
        raise InvalidInstanceError(v)

    sc_obj = payload["scenarios"]
    if not _require_keys(sc_obj, ("pi", "d_rt"), "scenarios", v):
        raise InvalidInstanceError(v)
    scenarios = ScenarioSet(
        probability=np.asarray(sc_obj["pi"], dtype=float),
        rt_demand=np.asarray(sc_obj["d_rt"], dtype=float),
        legacy_da_demand=(
            float(sc_obj["d_da"]) if sc_obj.get("d_da") is not None else None
        ),
    )

    gens: list[GeneratorParams] = []
    gen_objs = payload["generators"]
    if not isinstance(gen_objs, list):
        raise InvalidInstanceError(["generators must be a list"])
    for idx, g_obj in enumerate(gen_objs):
        where = f"generators[{idx}]"
        if not _require_keys(g_obj, ("c", "c_f", "q", "alpha", "c_i", "r"), where, v):
            continue
        gens.append(
            GeneratorParams(
                marginal_cost=float(g_obj["c"]),
                advance_fuel_cost=float(g_obj["c_f"]),
                capacity=float(g_obj["q"]),
                fuel_endowment=float(g_obj.get("f", 0.0)),
                risk_alpha=float(g_obj["alpha"]),
                spot_fuel_cost=np.asarray(g_obj["c_i"], dtype=float),
                resale_value=np.asarray(g_obj["r"], dtype=float),
                name=str(g_obj.get("name", f"g{idx + 1}")),
            )
        )
    if v:
        raise InvalidInstanceError(v)

    dm_obj = payload.get("demand", {})
    demand = DemandParams(
        risk_alpha=float(dm_obj.get("alpha", 1.0)),
        participates_da=bool(dm_obj.get("participates_da", True)),
    )

    ds_obj = payload["design"]
    if not _require_keys(ds_obj, ("kind",), "design", v):
        raise InvalidInstanceError(v)
    kind_raw = str(ds_obj["kind"])
    try:
        kind = DesignKind(kind_raw)
    except ValueError:
        raise InvalidInstanceError(
            [f"design: unknown kind '{kind_raw}' (expected emo, emir or emo_lf)"]
        ) from None
    design = MarketDesign(
        kind=kind,
        strike=float(ds_obj.get("k", 0.0)),
        forecast=float(ds_obj.get("fer", 0.0)),
    )

    instance = MarketInstance(
        scenarios=scenarios, generators=gens, demand=demand, design=design
    )
    violations = validate(instance)
    if violations:
        raise InvalidInstanceError(violations)
    return instance


def instance_to_dict(instance: MarketInstance) -> dict[str, Any]:
    """Serialize an instance to its canonical dict form (inverse of
    :func:`instance_from_dict` up to field defaults)."""
    sc = instance.scenarios
    sc_obj: dict[str, Any] = {
        "pi": [float(x) for x in sc.probability],
        "d_rt": [float(x) for x in sc.rt_demand],
    }
    if sc.legacy_da_demand is not None:
        sc_obj["d_da"] = float(sc.legacy_da_demand)
    gens = []
    for g in instance.generators:
        gens.append(
            {
                "name": g.name,
                "c": float(g.marginal_cost),
                "c_f": float(g.advance_fuel_cost),
                "q": float(g.capacity),
                "f": float(g.fuel_endowment),
                "alpha": float(g.risk_alpha),
                "c_i": [float(x) for x in g.spot_fuel_cost],
                "r": [float(x) for x in g.resale_value],
            }
        )
    design_obj: dict[str, Any] = {"kind": instance.design.kind.value}
    if instance.design.kind is DesignKind.EMIR:
        design_obj["k"] = float(instance.design.strike)
    if instance.design.kind in (DesignKind.EMIR, DesignKind.EMO_LF):
        design_obj["fer"] = float(instance.design.forecast)
    return {
        "scenarios": sc_obj,
        "generators": gens,
        "demand": {
            "alpha": float(instance.demand.risk_alpha),
            "participates_da": bool(instance.demand.participates_da),
        },
        "design": design_obj,
    }


def loads_instance(text: str) -> MarketInstance:
    """Parse an instance from JSON text."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInstanceError([f"not valid JSON: {exc}"]) from exc
    return instance_from_dict(payload)


def load_instance(path: str | Path) -> MarketInstance:
    """Load and validate an instance from a JSON file."""
    return loads_instance(Path(path).read_text())


def save_instance(instance: MarketInstance, path: str | Path) -> None:
    """Write an instance as deterministic, round-trippable JSON."""
    Path(path).write_text(
        json.dumps(instance_to_dict(instance), indent=2, sort_keys=False) + "\n"
    )


def single_generator_study_instance(
    design: MarketDesign | None = None,
    alpha: float = 1.0,
    demand_alpha: float = 1.0,
) -> MarketInstance:
    """Two-scenario, one-generator study instance.

    Zero marginal cost, spot fuel at (10, 15) $/MWh, advance fuel at 13,
    capacity 150 MWh, rt load (75, 125) MWh with equal probabilities, no
    resale value, demand settling purely in real time.
    """
    if design is None:
        design = MarketDesign(kind=DesignKind.EMO)
    return MarketInstance(
        scenarios=ScenarioSet(
            probability=np.array([0.5, 0.5]), rt_demand=np.array([75.0, 125.0])
        ),
        generators=[
            GeneratorParams(
                marginal_cost=0.0,
                advance_fuel_cost=13.0,
                capacity=150.0,
                fuel_endowment=0.0,
                risk_alpha=float(alpha),
                spot_fuel_cost=np.array([10.0, 15.0]),
                resale_value=np.array([0.0, 0.0]),
                name="g1",
            )
        ],
        demand=DemandParams(risk_alpha=float(demand_alpha), participates_da=False),
        design=design,
    )


def two_generator_study_instance(
    design: MarketDesign | None = None,
    alpha: float = 1.0,
    demand_alpha: float = 1.0,
) -> MarketInstance:
    """Five-scenario, two-generator study instance.

    Both generators have 100 MWh capacity and 50 $/MWh advance fuel; the
    second carries a 5 $/MWh marginal cost so the first is always first in
    merit. Spot fuel cost rises steeply with load, resale recovers 10 $/MWh.
    """
    if design is None:
        design = MarketDesign(kind=DesignKind.EMO)
    spot = np.array([15.0, 20.0, 30.0, 50.0, 100.0])
    resale = np.full(5, 10.0)
    return MarketInstance(
        scenarios=ScenarioSet(
            probability=np.full(5, 0.2),
            rt_demand=np.array([50.0, 75.0, 100.0, 125.0, 150.0]),
        ),
        generators=[
            GeneratorParams(
                marginal_cost=0.0,
                advance_fuel_cost=50.0,
                capacity=100.0,
                fuel_endowment=0.0,
                risk_alpha=float(alpha),
                spot_fuel_cost=spot.copy(),
                resale_value=resale.copy(),
                name="g1",
            ),
            GeneratorParams(
                marginal_cost=5.0,
                advance_fuel_cost=50.0,
                capacity=100.0,
                fuel_endowment=0.0,
                risk_alpha=float(alpha),
                spot_fuel_cost=spot.copy(),
                resale_value=resale.copy(),
                name="g2",
            ),
        ],
        demand=DemandParams(risk_alpha=float(demand_alpha), participates_da=True),
        design=design,
    )

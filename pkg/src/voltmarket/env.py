"""Episodic grid simulator: composes traces, renewable generation and customer
agents; consumes a retail price each step and returns the next observation
window plus the quantities the reward is computed from."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .customers import CustomerSpec, cooperative_adjustment, elastic_demand, storage_demand
from .model import (
    Horizon,
    ScenarioTraces,
    StateWindow,
    build_state_window,
    renewable_generation,
)


class ScenarioValidationError(ValueError):
    """Scenario failed validation; carries every violation found."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid scenario: " + "; ".join(self.violations))


class EpisodeLifecycleError(RuntimeError):
    """Stepped an environment that is finished or was never reset."""


@dataclass(frozen=True)
class Scenario:
    """A reproducible environment configuration."""

    customers: tuple[CustomerSpec, ...]
    traces: ScenarioTraces
    horizon: Horizon
    episode_length: int
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "customers", tuple(self.customers))

    def violations(self) -> list[str]:
        """All validation problems, empty when the scenario is usable."""
        problems: list[str] = []
        if not self.customers:
            problems.append("scenario requires at least one customer")
        if self.episode_length <= 0:
            problems.append(f"episode_length must be > 0, got {self.episode_length}")
        required = self.episode_length + self.horizon.p
        if len(self.traces) < required:
            problems.append(
                f"traces of length {len(self.traces)} are shorter than "
                f"episode_length + p = {required}"
            )
        for i, spec in enumerate(self.customers):
            if len(spec.baseline_load) < required:
                problems.append(
                    f"customer {i} baseline_load of length {len(spec.baseline_load)} "
                    f"is shorter than episode_length + p = {required}"
                )
        return problems


@dataclass(frozen=True, eq=False)
class StepOutcome:
    """Result of one environment step, in reward-ready units."""

    next_state: StateWindow
    e_demand: float
    e_renewable: float
    price_sold: float
    purchase_price: float
    done: bool


class GridEnv:
    """Single-scenario episodic simulator.

    One instance is strictly sequential (battery state serializes steps);
    independent instances share nothing and may run in parallel.
    """

    def __init__(self, scenario: Scenario):
        problems = scenario.violations()
        if problems:
            raise ScenarioValidationError(problems)
        self.scenario = scenario
        self._t: int | None = None
        self._done = False
        self._soc: list[float | None] = [None] * len(scenario.customers)
        # Receding-horizon schedules keyed by (price, t, soc); the announced
        # price window is a persistence of a single value, so keys stay finite
        # whenever prices come from a discrete grid.
        self._dp_cache: list[dict[tuple[float, int, float], tuple[float, float]]] = [
            {} for _ in scenario.customers
        ]
        self.last_customer_demands: np.ndarray | None = None

    @property
    def t(self) -> int | None:
        return self._t

    @property
    def done(self) -> bool:
        return self._done

    def reset(self) -> StateWindow:
        """Start a fresh episode: t = 0, batteries at 50% charge.

        The momentary demand in the first observation is a preview of the
        customers' response to their own reference prices; it does not move
        battery state.
        """
        scenario = self.scenario
        self._t = 0
        self._done = False
        self._soc = [
            spec.battery.capacity / 2.0 if spec.kind == "storage" else None
            for spec in scenario.customers
        ]
        demands = self._aggregate_demand(0, price=None, commit=False)
        self.last_customer_demands = demands
        return build_state_window(
            scenario.traces, 0, scenario.horizon, float(demands.sum())
        )

    def step(self, price) -> StepOutcome:
        """Broadcast a retail price, collect adjusted demand, advance time.

        Accepts a plain price or any object with a .price attribute. The price
        is assumed to be constraint-processed already; no clamping happens
        here.
        """
        if self._t is None:
            raise EpisodeLifecycleError("call reset() before step()")
        if self._done:
            raise EpisodeLifecycleError("episode finished; call reset() to start another")
        price_value = float(getattr(price, "price", price))
        if not np.isfinite(price_value) or price_value < 0.0:
            raise ValueError(f"price must be finite and >= 0, got {price_value}")

        scenario = self.scenario
        t = self._t
        demands = self._aggregate_demand(t, price_value, commit=True)
        self.last_customer_demands = demands
        e_demand = float(demands.sum())
        e_renewable = renewable_generation(
            scenario.traces.weather[t],
            scenario.traces.solar_capacity_kw,
            scenario.traces.wind_capacity_kw,
            scenario.horizon.timestep_minutes,
        )
        purchase = scenario.traces.purchase_price[t]

        self._t = t + 1
        self._done = self._t == scenario.episode_length
        # At the minimum trace length the terminal window cannot start at
        # episode_length; clamp to the last valid index. Terminal states are
        # never bootstrapped, so only their contents matter for logging.
        window_t = min(self._t, len(scenario.traces) - scenario.horizon.p - 1)
        next_state = build_state_window(scenario.traces, window_t, scenario.horizon, e_demand)
        return StepOutcome(
            next_state=next_state,
            e_demand=e_demand,
            e_renewable=e_renewable,
            price_sold=price_value,
            purchase_price=purchase,
            done=self._done,
        )

    def _aggregate_demand(self, t: int, price: float | None, commit: bool) -> np.ndarray:
        """Per-customer grid draws at timestep t under a broadcast price.

        price=None evaluates each customer against its own reference price
        (reset preview). Storage customers see a persistence window of the
        announced price; only the first scheduled move is executed.
        """
        scenario = self.scenario
        window = scenario.horizon.window_length
        demands = np.empty(len(scenario.customers))
        baselines_now = np.empty(len(scenario.customers))
        for i, spec in enumerate(scenario.customers):
            baseline_window = spec.baseline_load[t : t + window]
            customer_price = spec.reference_price if price is None else price
            baselines_now[i] = baseline_window[0]
            if spec.kind == "storage":
                soc = self._soc[i]
                assert soc is not None
                key = (customer_price, t, soc)
                cached = self._dp_cache[i].get(key)
                if cached is None:
                    cached = storage_demand(
                        spec,
                        np.full(window, customer_price),
                        np.asarray(baseline_window),
                        soc,
                    )
                    self._dp_cache[i][key] = cached
                draw, new_soc = cached
                if commit:
                    self._soc[i] = new_soc
                demands[i] = draw
            else:
                demands[i] = elastic_demand(
                    baseline_window[0],
                    customer_price,
                    spec.elasticity,
                    spec.reference_price,
                )
        capacity_signal = renewable_generation(
            scenario.traces.weather[t],
            scenario.traces.solar_capacity_kw,
            scenario.traces.wind_capacity_kw,
            scenario.horizon.timestep_minutes,
        )
        flags = [spec.cooperative for spec in scenario.customers]
        return cooperative_adjustment(demands, baselines_now, flags, capacity_signal)

    def battery_soc(self, customer_index: int) -> float | None:
        """Current SOC of a storage customer (None for elastic ones)."""
        return self._soc[customer_index]

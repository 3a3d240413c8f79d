"""Shared test fixtures and independent oracles (kept separate from the
implementation so the dual-route checks stay honest)."""

from __future__ import annotations

import math

import numpy as np

from voltmarket import (
    Battery,
    CustomerSpec,
    Horizon,
    Scenario,
    ScenarioTraces,
    WeatherSample,
    customer_cost,
)


def constant_traces(
    length: int,
    irradiance: float = 0.5,
    wind: float = 0.0,
    temperature: float = 15.0,
    purchase_price: float = 0.10,
    solar_capacity_kw: float = 20.0,
    wind_capacity_kw: float = 0.0,
) -> ScenarioTraces:
    return ScenarioTraces(
        weather=tuple(WeatherSample(temperature, irradiance, wind) for _ in range(length)),
        purchase_price=tuple(purchase_price for _ in range(length)),
        solar_capacity_kw=solar_capacity_kw,
        wind_capacity_kw=wind_capacity_kw,
    )


def varied_traces(length: int, seed: int = 0, **kwargs) -> ScenarioTraces:
    rng = np.random.default_rng(seed)
    weather = tuple(
        WeatherSample(
            temperature_c=float(rng.uniform(0, 30)),
            solar_irradiance=float(rng.uniform(0, 1)),
            wind_speed=float(rng.uniform(0, 15)),
        )
        for _ in range(length)
    )
    prices = tuple(float(rng.uniform(0.05, 0.25)) for _ in range(length))
    return ScenarioTraces(
        weather=weather,
        purchase_price=prices,
        solar_capacity_kw=kwargs.get("solar_capacity_kw", 20.0),
        wind_capacity_kw=kwargs.get("wind_capacity_kw", 5.0),
    )


def make_battery(
    capacity: float = 4.0,
    rate: float = 2.0,
    eta_c: float = 0.9,
    eta_d: float = 0.9,
    soc: float | None = None,
) -> Battery:
    return Battery(
        capacity=capacity,
        max_charge_rate=rate,
        max_discharge_rate=rate,
        charge_efficiency=eta_c,
        discharge_efficiency=eta_d,
        soc=capacity / 2.0 if soc is None else soc,
    )


def elastic_spec(
    baseline: tuple[float, ...],
    elasticity: float = -0.8,
    cooperative: bool = False,
    reference_price: float = 0.15,
) -> CustomerSpec:
    return CustomerSpec(
        kind="elastic",
        cooperative=cooperative,
        baseline_load=baseline,
        reference_price=reference_price,
        elasticity=elasticity,
    )


def storage_spec(
    baseline: tuple[float, ...],
    battery: Battery | None = None,
    cooperative: bool = False,
    peak_weight: float = 0.0,
    soc_levels: int = 5,
    reference_price: float = 0.15,
) -> CustomerSpec:
    return CustomerSpec(
        kind="storage",
        cooperative=cooperative,
        baseline_load=baseline,
        reference_price=reference_price,
        peak_weight=peak_weight,
        battery=battery or make_battery(),
        soc_levels=soc_levels,
    )


def small_scenario(
    episode_length: int = 8,
    p: int = 1,
    kinds: tuple[str, ...] = ("elastic", "storage"),
    seed: int = 7,
    trace_seed: int = 3,
    **trace_kwargs,
) -> Scenario:
    horizon = Horizon(p, 60)
    length = episode_length + p + 1
    traces = varied_traces(length, seed=trace_seed, **trace_kwargs)
    baseline = tuple(6.0 + 2.0 * math.sin(k / 3.0) for k in range(length))
    customers = []
    for kind in kinds:
        if kind == "elastic":
            customers.append(elastic_spec(baseline))
        else:
            customers.append(storage_spec(baseline, soc_levels=3))
    return Scenario(
        customers=tuple(customers),
        traces=traces,
        horizon=horizon,
        episode_length=episode_length,
        seed=seed,
    )


# --- independent brute-force oracle for battery scheduling ---------------

def _oracle_transitions(battery: Battery, grid: np.ndarray, index: int):
    """All distinct (next_index, battery_delta) moves from one SOC level."""
    soc = grid[index]
    moves = {index: (index, 0.0)}
    target = min(soc + battery.max_charge_rate, battery.capacity)
    j = int(np.argmin(np.abs(grid - target)))
    if j != index:
        moves[j] = (j, grid[j] - soc)
    target = max(soc - battery.max_discharge_rate, 0.0)
    j = int(np.argmin(np.abs(grid - target)))
    if j != index:
        moves[j] = (j, grid[j] - soc)
    return list(moves.values())


def oracle_draw(battery: Battery, baseline: float, delta: float) -> float:
    if delta > 0:
        draw = baseline + delta / battery.charge_efficiency
    elif delta < 0:
        draw = baseline + delta * battery.discharge_efficiency
    else:
        draw = baseline
    return max(0.0, draw)


def enumerate_plans(prices, baselines, battery: Battery, soc_levels: int):
    """Yield (deltas, draws) for every feasible plan over the window."""
    grid = np.linspace(0.0, battery.capacity, soc_levels)
    start = int(np.argmin(np.abs(grid - battery.soc)))
    steps = len(prices)

    def walk(t, state, deltas, draws):
        if t == steps:
            yield list(deltas), list(draws)
            return
        for j, delta in _oracle_transitions(battery, grid, state):
            deltas.append(delta)
            draws.append(oracle_draw(battery, baselines[t], delta))
            yield from walk(t + 1, j, deltas, draws)
            deltas.pop()
            draws.pop()

    yield from walk(0, start, [], [])


def oracle_best_cost(prices, baselines, battery: Battery, soc_levels: int, peak_weight: float) -> float:
    return min(
        customer_cost(draws, prices, peak_weight)
        for _, draws in enumerate_plans(prices, baselines, battery, soc_levels)
    )


def oracle_best_first_deltas(prices, baselines, battery, soc_levels, peak_weight):
    """First-step deltas of every cost-optimal plan (for receding-horizon checks)."""
    best = math.inf
    firsts: set[float] = set()
    for deltas, draws in enumerate_plans(prices, baselines, battery, soc_levels):
        cost = customer_cost(draws, prices, peak_weight)
        if cost < best:
            best = cost
            firsts = {deltas[0]}
        elif cost == best:
            firsts.add(deltas[0])
    return best, firsts


def dyadic(rng: np.random.Generator, lo_qtr: int, hi_qtr: int) -> float:
    """Random multiple of 1/4 in [lo_qtr/4, hi_qtr/4]; keeps float math exact."""
    return int(rng.integers(lo_qtr, hi_qtr + 1)) / 4.0

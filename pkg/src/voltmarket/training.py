"""Episode loops tying environment, agent and reward together: warm-up feature
scaling, Q-learning training, greedy and fixed-price evaluation, raw-price
evaluation with violation logging, and constraint-level policy families."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .agent import (
    FeatureScaling,
    PolicyParams,
    PriceGrid,
    Transition,
    clamp_price,
    featurize,
    select_action,
    td_update,
    window_channels,
    zeros_params,
)
from .env import GridEnv, Scenario
from .reward import RewardWeights, breakdown
from .telemetry import EpisodeRecord, EpisodeStep, ViolationLog, objective_returns


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear anneal from start to end over decay_steps, then flat."""

    start: float = 0.3
    end: float = 0.02
    decay_steps: int = 1

    def __post_init__(self) -> None:
        for name, value in (("start", self.start), ("end", self.end)):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"epsilon {name} must lie in [0, 1], got {value}")
        if self.decay_steps < 1:
            raise ValueError(f"decay_steps must be >= 1, got {self.decay_steps}")

    def value(self, step: int) -> float:
        frac = min(1.0, max(0.0, step / self.decay_steps))
        return self.start + (self.end - self.start) * frac

    @classmethod
    def constant(cls, epsilon: float) -> "EpsilonSchedule":
        return cls(start=epsilon, end=epsilon, decay_steps=1)


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 40
    lr: float = 0.01
    gamma: float = 0.5
    epsilon_start: float = 0.3
    epsilon_end: float = 0.02
    warmup_steps: int = 100
    weights: RewardWeights = RewardWeights()
    r1_mode: str = "price_diff"


@dataclass
class TrainResult:
    params: PolicyParams
    episode_returns: list[float] = field(default_factory=list)


def collect_rollout_features(
    scenario: Scenario, grid: PriceGrid, steps: int, seed: int
) -> np.ndarray:
    """Raw (unscaled) feature rows from a uniform-random-price rollout."""
    env = GridEnv(scenario)
    rng = np.random.default_rng(seed)
    state = env.reset()
    rows = [window_channels(state)]
    for _ in range(steps - 1):
        price = grid.levels[int(rng.integers(grid.k))]
        outcome = env.step(price)
        rows.append(window_channels(outcome.next_state))
        if outcome.done:
            state = env.reset()
            rows[-1] = window_channels(state)
    return np.asarray(rows)


def scaling_from_features(rows: np.ndarray) -> FeatureScaling:
    """Standardize to the empirical moments; constant features keep unit scale."""
    mean = rows.mean(axis=0)
    scale = rows.std(axis=0)
    scale[scale < 1e-9] = 1.0
    return FeatureScaling(mean=mean, scale=scale)


def warmup_scaling(
    scenario: Scenario, grid: PriceGrid, steps: int = 100, seed: int = 0
) -> FeatureScaling:
    return scaling_from_features(collect_rollout_features(scenario, grid, steps, seed))


def learn_on_env(
    env: GridEnv,
    params: PolicyParams,
    grid: PriceGrid,
    steps: int,
    lr: float,
    gamma: float,
    epsilon: EpsilonSchedule,
    rng: np.random.Generator,
    weights: RewardWeights = RewardWeights(),
    r1_mode: str = "price_diff",
) -> tuple[PolicyParams, list[float]]:
    """Run a fixed number of epsilon-greedy Q-learning steps on one env.

    Episodes reset automatically; returns the updated params and the return
    of each completed episode.
    """
    episode_returns: list[float] = []
    features = featurize(env.reset(), params.scaling)
    ep_return = 0.0
    for step in range(steps):
        signal = select_action(params, features, epsilon.value(step), grid, rng)
        outcome = env.step(signal.price)
        reward = breakdown(
            outcome.price_sold,
            outcome.purchase_price,
            outcome.e_renewable,
            outcome.e_demand,
            weights,
            r1_mode,
        )
        next_features = featurize(outcome.next_state, params.scaling)
        params = td_update(
            params,
            Transition(features, signal.level_index, reward.total, next_features, outcome.done),
            lr,
            gamma,
        )
        ep_return += reward.total
        if outcome.done:
            episode_returns.append(ep_return)
            ep_return = 0.0
            next_features = featurize(env.reset(), params.scaling)
        features = next_features
    return params, episode_returns


def train_policy(
    scenario: Scenario,
    grid: PriceGrid,
    config: TrainConfig,
    seed: int,
    scaling: FeatureScaling | None = None,
    init: PolicyParams | None = None,
) -> TrainResult:
    """Train a policy on one scenario for config.episodes episodes.

    Exploration anneals linearly over the first 70% of all steps. The feature
    scaling comes from a warm-up rollout unless one is supplied (or implied
    by an explicit initial policy).
    """
    if init is not None:
        scaling = init.scaling
    elif scaling is None:
        scaling = warmup_scaling(scenario, grid, config.warmup_steps, seed)
    params = init if init is not None else zeros_params(grid.k, scaling)

    total_steps = config.episodes * scenario.episode_length
    epsilon = EpsilonSchedule(
        start=config.epsilon_start,
        end=config.epsilon_end,
        decay_steps=max(1, int(0.7 * total_steps)),
    )
    rng = np.random.default_rng(seed)
    env = GridEnv(scenario)
    params, returns = learn_on_env(
        env,
        params,
        grid,
        total_steps,
        config.lr,
        config.gamma,
        epsilon,
        rng,
        config.weights,
        config.r1_mode,
    )
    return TrainResult(params=params, episode_returns=returns)


def _rollout(
    scenario: Scenario,
    price_for_state,
    weights: RewardWeights,
    r1_mode: str,
) -> EpisodeRecord:
    """One full episode driven by a state -> price function; logs every step."""
    env = GridEnv(scenario)
    state = env.reset()
    record = EpisodeRecord(alpha1=weights.alpha1, alpha2=weights.alpha2)
    for t in range(scenario.episode_length):
        price = price_for_state(state)
        outcome = env.step(price)
        reward = breakdown(
            outcome.price_sold,
            outcome.purchase_price,
            outcome.e_renewable,
            outcome.e_demand,
            weights,
            r1_mode,
        )
        record.steps.append(
            EpisodeStep(
                t=t,
                price=outcome.price_sold,
                e_demand=outcome.e_demand,
                e_renewable=outcome.e_renewable,
                purchase_price=outcome.purchase_price,
                r1=reward.r1,
                r2=reward.r2,
                total=reward.total,
            )
        )
        state = outcome.next_state
    return record


def run_greedy_episode(
    scenario: Scenario,
    params: PolicyParams,
    grid: PriceGrid,
    weights: RewardWeights = RewardWeights(),
    r1_mode: str = "price_diff",
) -> EpisodeRecord:
    """Deterministic evaluation episode under the greedy policy."""

    def choose(state):
        return select_action(params, featurize(state, params.scaling), 0.0, grid).price

    return _rollout(scenario, choose, weights, r1_mode)


def run_fixed_price_episode(
    scenario: Scenario,
    price: float,
    weights: RewardWeights = RewardWeights(),
    r1_mode: str = "price_diff",
) -> EpisodeRecord:
    """Evaluation episode under a constant price (the no-agent baseline)."""
    return _rollout(scenario, lambda _state: price, weights, r1_mode)


def episode_return(record: EpisodeRecord) -> float:
    return objective_returns(record)[2]


def evaluate_price_sequence(
    scenario: Scenario,
    prices: Sequence[float],
    grid: PriceGrid,
    weights: RewardWeights = RewardWeights(),
    r1_mode: str = "price_diff",
) -> tuple[EpisodeRecord, ViolationLog]:
    """Evaluate an externally supplied raw price sequence.

    Prices outside the band are clamped and logged; the episode runs on the
    clamped values.
    """
    if len(prices) < scenario.episode_length:
        raise ValueError(
            f"need {scenario.episode_length} prices, got {len(prices)}"
        )
    log = ViolationLog()
    it = iter(range(scenario.episode_length))

    def choose(_state):
        t = next(it)
        clamped, violated = clamp_price(prices[t], grid)
        if violated:
            log.record(t, prices[t], clamped)
        return clamped

    record = _rollout(scenario, choose, weights, r1_mode)
    return record, log


@dataclass(frozen=True, eq=False)
class TradeoffPoint:
    p_min: float
    p_max: float
    params: PolicyParams
    mean_return: float
    mean_sum_r1: float
    mean_sum_r2: float


def train_constraint_family(
    scenario: Scenario,
    bands: Sequence[tuple[float, float]],
    config: TrainConfig,
    seed: int,
    k_levels: int = 11,
    max_workers: int = 1,
) -> list[TradeoffPoint]:
    """Train one policy per price band, identical seed and config otherwise.

    Emits the band-vs-performance table operators use to judge how much
    return a tighter constraint costs. Bands are independent, so they may be
    trained on parallel workers; results keep band order either way.
    """
    if len(bands) < 1:
        raise ValueError("train_constraint_family requires at least one band")

    def run(band: tuple[float, float]) -> TradeoffPoint:
        p_min, p_max = band
        grid = (
            PriceGrid.uniform(p_min, p_max)
            if p_min == p_max
            else PriceGrid.uniform(p_min, p_max, k_levels)
        )
        result = train_policy(scenario, grid, config, seed)
        record = run_greedy_episode(scenario, result.params, grid, config.weights, config.r1_mode)
        sum_r1, sum_r2, total = objective_returns(record)
        return TradeoffPoint(
            p_min=p_min,
            p_max=p_max,
            params=result.params,
            mean_return=total,
            mean_sum_r1=sum_r1,
            mean_sum_r2=sum_r2,
        )

    if max_workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(run, bands))
    return [run(band) for band in bands]

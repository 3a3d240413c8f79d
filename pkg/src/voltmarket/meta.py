"""First-order meta-training across a scenario pool: per-task Q-learning
adaptation, an averaged-difference outer update, and a held-out
sample-efficiency comparison against a non-meta initialization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agent import PolicyParams, PriceGrid
from .env import GridEnv, Scenario
from .reward import RewardWeights
from .telemetry import objective_returns
from .training import EpsilonSchedule, learn_on_env, run_greedy_episode

STOP_META_ITERATIONS = "meta_iterations"
STOP_PERFORMANCE_THRESHOLD = "performance_threshold"


@dataclass(frozen=True)
class MetaConfig:
    """Outer/inner loop sizes and the stop threshold (no sensible default
    exists for the threshold, so it is required)."""

    performance_threshold: float
    inner_steps: int = 200
    inner_lr: float = 0.01
    meta_lr: float = 0.5
    meta_iterations: int = 15
    tasks_per_iteration: int = 4
    gamma: float = 0.5
    epsilon: float = 0.1

    def __post_init__(self) -> None:
        if self.inner_steps <= 0:
            raise ValueError(f"inner_steps must be > 0, got {self.inner_steps}")
        if self.inner_lr <= 0.0:
            raise ValueError(f"inner_lr must be > 0, got {self.inner_lr}")
        if not 0.0 <= self.meta_lr <= 1.0:
            raise ValueError(f"meta_lr must lie in [0, 1], got {self.meta_lr}")
        if self.meta_iterations <= 0:
            raise ValueError(f"meta_iterations must be > 0, got {self.meta_iterations}")
        if self.tasks_per_iteration <= 0:
            raise ValueError(
                f"tasks_per_iteration must be > 0, got {self.tasks_per_iteration}"
            )
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")


def _adaptation_seed(base_seed: int, *streams: int) -> int:
    # Stable derived seed for one adaptation run; the tuple keeps streams
    # from different iterations/tasks/inits independent but reproducible.
    return int(np.random.SeedSequence((base_seed, *streams)).generate_state(1)[0])


def adapt(
    init: PolicyParams,
    scenario: Scenario,
    k_steps: int,
    inner_lr: float,
    gamma: float,
    epsilon_schedule: EpsilonSchedule | float,
    grid: PriceGrid,
    agent_seed: int = 0,
    weights: RewardWeights = RewardWeights(),
    r1_mode: str = "price_diff",
) -> PolicyParams:
    """Run k_steps of epsilon-greedy Q-learning from init on one scenario.

    The input parameters are never mutated; updates build fresh values.
    """
    if k_steps < 1:
        raise ValueError(f"k_steps must be >= 1, got {k_steps}")
    if isinstance(epsilon_schedule, (int, float)):
        epsilon_schedule = EpsilonSchedule.constant(float(epsilon_schedule))
    env = GridEnv(scenario)
    rng = np.random.default_rng(agent_seed)
    adapted, _ = learn_on_env(
        env,
        init,
        grid,
        k_steps,
        inner_lr,
        gamma,
        epsilon_schedule,
        rng,
        weights,
        r1_mode,
    )
    return adapted


@dataclass
class MetaIteration:
    task_indices: list[int]
    adapted_weights: list[np.ndarray]
    eval_return: float


@dataclass
class MetaResult:
    params: PolicyParams
    stop_reason: str
    initial_weights: np.ndarray
    iterations: list[MetaIteration] = field(default_factory=list)


def meta_train(
    pool: list[Scenario],
    config: MetaConfig,
    seed: int,
    *,
    grid: PriceGrid,
    init: PolicyParams,
    weights: RewardWeights = RewardWeights(),
    r1_mode: str = "price_diff",
) -> MetaResult:
    """Averaged-difference meta-training over the pool.

    Each iteration samples tasks, adapts the shared initialization on each,
    then moves the initialization toward the mean adapted parameters by
    meta_lr. Stops at meta_iterations or when the rolling mean (window 3) of
    the per-iteration greedy evaluation return crosses the performance
    threshold, whichever fires first; the result records which one did.
    """
    if not pool:
        raise ValueError("meta_train requires a non-empty scenario pool")
    if config.tasks_per_iteration > len(pool):
        raise ValueError(
            f"tasks_per_iteration ({config.tasks_per_iteration}) exceeds pool size ({len(pool)})"
        )

    task_rng = np.random.default_rng(seed)
    params = init
    result = MetaResult(
        params=params,
        stop_reason=STOP_META_ITERATIONS,
        initial_weights=init.weights.copy(),
    )
    eval_history: list[float] = []
    for iteration in range(config.meta_iterations):
        task_indices = sorted(
            task_rng.choice(len(pool), size=config.tasks_per_iteration, replace=False).tolist()
        )
        adapted_weights = []
        for slot, task_index in enumerate(task_indices):
            adapted = adapt(
                params,
                pool[task_index],
                config.inner_steps,
                config.inner_lr,
                config.gamma,
                config.epsilon,
                grid,
                agent_seed=_adaptation_seed(seed, iteration, slot),
                weights=weights,
                r1_mode=r1_mode,
            )
            adapted_weights.append(adapted.weights)

        mean_adapted = np.mean(adapted_weights, axis=0)
        new_weights = params.weights + config.meta_lr * (mean_adapted - params.weights)
        params = PolicyParams(weights=new_weights, scaling=params.scaling)

        eval_return = float(
            np.mean(
                [
                    objective_returns(
                        run_greedy_episode(pool[i], params, grid, weights, r1_mode)
                    )[2]
                    for i in task_indices
                ]
            )
        )
        eval_history.append(eval_return)
        result.iterations.append(
            MetaIteration(
                task_indices=task_indices,
                adapted_weights=adapted_weights,
                eval_return=eval_return,
            )
        )
        rolling = float(np.mean(eval_history[-3:]))
        if rolling >= config.performance_threshold:
            result.params = params
            result.stop_reason = STOP_PERFORMANCE_THRESHOLD
            return result

    result.params = params
    return result


@dataclass
class AdaptationCurve:
    scenario_seed: int
    steps: list[int]
    meta_returns: list[float]
    baseline_returns: list[float]


@dataclass(frozen=True)
class SampleEfficiencyEntry:
    scenario_index: int
    scenario_seed: int
    seed: int
    meta_return: float
    baseline_return: float


@dataclass
class SampleEfficiencyReport:
    entries: list[SampleEfficiencyEntry]
    per_scenario_meta_mean: list[float]
    per_scenario_baseline_mean: list[float]
    pooled_meta_mean: float
    pooled_baseline_mean: float
    meta_wins: int
    n_scenarios: int
    n_seeds: int
    k_steps: int
    curves: list[AdaptationCurve] = field(default_factory=list)


def _greedy_return(scenario, params, grid, weights, r1_mode) -> float:
    return objective_returns(run_greedy_episode(scenario, params, grid, weights, r1_mode))[2]


def evaluate_adaptation(
    meta_init: PolicyParams,
    baseline_init: PolicyParams,
    heldout: list[Scenario],
    k_steps: int,
    n_seeds: int,
    *,
    train_pool: list[Scenario],
    grid: PriceGrid,
    inner_lr: float,
    gamma: float,
    epsilon: float,
    weights: RewardWeights = RewardWeights(),
    r1_mode: str = "price_diff",
    curve_points: int = 0,
) -> SampleEfficiencyReport:
    """Paired comparison of two initializations on held-out scenarios.

    For every (scenario, seed) pair both initializations adapt for k_steps
    under identical seeds, then the greedy return over the scenario's
    episode is compared. Held-out scenarios must be disjoint (by seed) from
    the training pool, which keeps this a genuine out-of-distribution check.
    curve_points > 0 additionally evaluates both inits at evenly spaced
    adaptation checkpoints.
    """
    if not heldout:
        raise ValueError("evaluate_adaptation requires held-out scenarios")
    train_seeds = {s.seed for s in train_pool}
    overlap = sorted(train_seeds & {s.seed for s in heldout})
    if overlap:
        raise ValueError(f"held-out scenarios overlap the training pool (seeds {overlap})")

    checkpoints: list[int] = []
    if curve_points > 0:
        checkpoints = sorted({round(k_steps * j / curve_points) for j in range(curve_points + 1)})

    entries: list[SampleEfficiencyEntry] = []
    curves: list[AdaptationCurve] = []
    per_scenario_meta: list[float] = []
    per_scenario_baseline: list[float] = []

    for idx, scenario in enumerate(heldout):
        meta_returns = []
        baseline_returns = []
        curve_meta = np.zeros(len(checkpoints))
        curve_base = np.zeros(len(checkpoints))
        for s in range(n_seeds):
            agent_seed = _adaptation_seed(scenario.seed, s)
            pair = []
            for which, init in enumerate((meta_init, baseline_init)):
                adapted = adapt(
                    init,
                    scenario,
                    k_steps,
                    inner_lr,
                    gamma,
                    epsilon,
                    grid,
                    agent_seed=agent_seed,
                    weights=weights,
                    r1_mode=r1_mode,
                )
                pair.append(_greedy_return(scenario, adapted, grid, weights, r1_mode))
                for ci, checkpoint in enumerate(checkpoints):
                    point = init
                    if checkpoint > 0:
                        point = adapt(
                            init,
                            scenario,
                            checkpoint,
                            inner_lr,
                            gamma,
                            epsilon,
                            grid,
                            agent_seed=agent_seed,
                            weights=weights,
                            r1_mode=r1_mode,
                        )
                    value = _greedy_return(scenario, point, grid, weights, r1_mode)
                    if which == 0:
                        curve_meta[ci] += value / n_seeds
                    else:
                        curve_base[ci] += value / n_seeds
            meta_returns.append(pair[0])
            baseline_returns.append(pair[1])
            entries.append(
                SampleEfficiencyEntry(
                    scenario_index=idx,
                    scenario_seed=scenario.seed,
                    seed=s,
                    meta_return=pair[0],
                    baseline_return=pair[1],
                )
            )
        per_scenario_meta.append(float(np.mean(meta_returns)))
        per_scenario_baseline.append(float(np.mean(baseline_returns)))
        if checkpoints:
            curves.append(
                AdaptationCurve(
                    scenario_seed=scenario.seed,
                    steps=list(checkpoints),
                    meta_returns=curve_meta.tolist(),
                    baseline_returns=curve_base.tolist(),
                )
            )

    meta_wins = sum(
        1 for m, b in zip(per_scenario_meta, per_scenario_baseline) if m > b
    )
    return SampleEfficiencyReport(
        entries=entries,
        per_scenario_meta_mean=per_scenario_meta,
        per_scenario_baseline_mean=per_scenario_baseline,
        pooled_meta_mean=float(np.mean(per_scenario_meta)),
        pooled_baseline_mean=float(np.mean(per_scenario_baseline)),
        meta_wins=meta_wins,
        n_scenarios=len(heldout),
        n_seeds=n_seeds,
        k_steps=k_steps,
        curves=curves,
    )

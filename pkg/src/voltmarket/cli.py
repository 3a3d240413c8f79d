"""Batch harness: validate / build-pool / train / meta-train / evaluate /
tradeoff / report subcommands (plus run, which chains them all), every output
declared in a hashed manifest."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from .agent import PriceGrid, random_params, zeros_params
from .config import ConfigValidationError, ExperimentConfig, load_config, worker_count
from .env import Scenario, ScenarioValidationError
from .io import (
    ArtifactWriter,
    PolicyFileError,
    TraceFormatError,
    ingest_traces,
    load_policy,
    policy_document,
    scenario_to_dict,
    violation_log_to_dict,
)
from .meta import evaluate_adaptation, meta_train
from .model import ScenarioTraces
from .pool import PoolConfigError, build_scenario_pool
from .telemetry import ViolationLog, alignment_metrics, objective_returns, summarize_violations
from .training import (
    TrainConfig,
    run_greedy_episode,
    scaling_from_features,
    collect_rollout_features,
    train_constraint_family,
    train_policy,
)

SUBCOMMANDS = ("validate", "build-pool", "train", "meta-train", "evaluate", "tradeoff", "report", "run")


def _grid(config: ExperimentConfig) -> PriceGrid:
    agent = config.agent
    if agent.p_min == agent.p_max:
        return PriceGrid.uniform(agent.p_min, agent.p_max)
    return PriceGrid.uniform(agent.p_min, agent.p_max, agent.levels)


def _train_config(config: ExperimentConfig) -> TrainConfig:
    agent = config.agent
    return TrainConfig(
        episodes=agent.episodes,
        lr=agent.lr,
        gamma=agent.gamma,
        epsilon_start=agent.epsilon_start,
        epsilon_end=agent.epsilon_end,
        warmup_steps=agent.warmup_steps,
        weights=config.reward_weights,
        r1_mode=config.r1_mode,
    )


def _load_traces(config: ExperimentConfig) -> ScenarioTraces | None:
    if config.traces_path is None:
        return None
    return ingest_traces(
        config.traces_path,
        config.horizon.timestep_minutes,
        config.pool.solar_capacity_kw,
        config.pool.wind_capacity_kw,
    )


def _build_pools(config: ExperimentConfig) -> tuple[list[Scenario], list[Scenario]]:
    """Training pool plus disjoint held-out scenarios, one deterministic sweep."""
    traces = _load_traces(config)
    total = config.pool.n_scenarios + config.meta.heldout_scenarios
    pool_config = replace(config.pool, n_scenarios=total)
    scenarios = build_scenario_pool(pool_config, config.pool_base_seed, traces)
    return scenarios[: config.pool.n_scenarios], scenarios[config.pool.n_scenarios :]


def cmd_validate(config: ExperimentConfig, out_dir: str, seed: int) -> int:
    _build_pools(config)  # exercises trace ingestion and scenario construction
    print("config OK")
    return 0


def cmd_build_pool(config: ExperimentConfig, out_dir: str, seed: int) -> int:
    writer = ArtifactWriter(out_dir)
    train_pool, heldout = _build_pools(config)
    writer.write_json(
        "pool.json",
        {
            "base_seed": config.pool_base_seed,
            "train": [scenario_to_dict(s) for s in train_pool],
            "heldout": [scenario_to_dict(s) for s in heldout],
        },
    )
    writer.write_manifest()
    print(f"pool: {len(train_pool)} training + {len(heldout)} held-out scenarios")
    return 0


def cmd_train(config: ExperimentConfig, out_dir: str, seed: int) -> int:
    writer = ArtifactWriter(out_dir)
    train_pool, _ = _build_pools(config)
    scenario = train_pool[config.agent.scenario_index]
    grid = _grid(config)
    tc = _train_config(config)

    per_seed = []
    first_params = None
    for i in range(config.n_seeds):
        seed_i = seed + i
        result = train_policy(scenario, grid, tc, seed_i)
        record = run_greedy_episode(scenario, result.params, grid, tc.weights, tc.r1_mode)
        sum_r1, sum_r2, total = objective_returns(record)
        writer.write_episode_csv(
            f"episodes/train_scenario{config.agent.scenario_index}_seed{seed_i}.csv", record
        )
        per_seed.append(
            {
                "seed": seed_i,
                "episode_returns": result.episode_returns,
                "eval_return": total,
                "eval_sum_r1": sum_r1,
                "eval_sum_r2": sum_r2,
            }
        )
        if first_params is None:
            first_params = result.params
    assert first_params is not None
    writer.write_json("policy.json", policy_document(first_params, grid, config.horizon))
    # Grid-mode training cannot leave the band, so the log stays empty; it is
    # emitted anyway as the violation accounting surface.
    log = ViolationLog()
    writer.write_json("violations.json", violation_log_to_dict(log, summarize_violations(log)))
    writer.write_json("training_summary.json", {"scenario_index": config.agent.scenario_index, "per_seed": per_seed})
    writer.write_manifest()
    print(f"trained {config.n_seeds} seed(s); eval return {per_seed[0]['eval_return']:.3f}")
    return 0


def cmd_evaluate(config: ExperimentConfig, out_dir: str, seed: int) -> int:
    writer = ArtifactWriter(out_dir)
    params, grid, _horizon = load_policy(writer.path("policy.json"))
    train_pool, _ = _build_pools(config)
    summary = []
    for i, scenario in enumerate(train_pool):
        record = run_greedy_episode(scenario, params, grid, config.reward_weights, config.r1_mode)
        writer.write_episode_csv(f"episodes/eval_scenario{i}.csv", record)
        sum_r1, sum_r2, total = objective_returns(record)
        metrics = alignment_metrics(record) if len(record) >= 2 else None
        summary.append(
            {
                "scenario_index": i,
                "scenario_seed": scenario.seed,
                "sum_r1": sum_r1,
                "sum_r2": sum_r2,
                "return": total,
                "rmse": metrics.rmse if metrics else None,
                "pearson_r": metrics.pearson_r if metrics else None,
            }
        )
    log = ViolationLog()
    writer.write_json("violations.json", violation_log_to_dict(log, summarize_violations(log)))
    writer.write_json("eval_summary.json", {"scenarios": summary})
    writer.write_manifest()
    print(f"evaluated policy on {len(train_pool)} scenario(s)")
    return 0


def cmd_meta_train(config: ExperimentConfig, out_dir: str, seed: int) -> int:
    writer = ArtifactWriter(out_dir)
    train_pool, heldout = _build_pools(config)
    grid = _grid(config)
    meta_cfg = config.meta.config

    rows = [
        collect_rollout_features(s, grid, config.agent.warmup_steps, seed)
        for s in train_pool[: min(3, len(train_pool))]
    ]
    scaling = scaling_from_features(np.concatenate(rows))
    init = zeros_params(grid.k, scaling)
    result = meta_train(
        train_pool,
        meta_cfg,
        seed,
        grid=grid,
        init=init,
        weights=config.reward_weights,
        r1_mode=config.r1_mode,
    )
    writer.write_json("policy_meta.json", policy_document(result.params, grid, config.horizon))
    writer.write_json(
        "meta_history.json",
        {
            "stop_reason": result.stop_reason,
            "iterations_run": len(result.iterations),
            "eval_returns": [it.eval_return for it in result.iterations],
        },
    )

    baseline = random_params(
        grid.k, scaling, np.random.default_rng(seed), std=config.meta.baseline_std
    )
    report = evaluate_adaptation(
        result.params,
        baseline,
        heldout,
        config.meta.adapt_steps,
        config.n_seeds,
        train_pool=train_pool,
        grid=grid,
        inner_lr=meta_cfg.inner_lr,
        gamma=meta_cfg.gamma,
        epsilon=meta_cfg.epsilon,
        weights=config.reward_weights,
        r1_mode=config.r1_mode,
        curve_points=config.meta.curve_points,
    )
    writer.write_json(
        "sample_efficiency.json",
        {
            "k_steps": report.k_steps,
            "n_seeds": report.n_seeds,
            "n_scenarios": report.n_scenarios,
            "meta_wins": report.meta_wins,
            "pooled_meta_mean": report.pooled_meta_mean,
            "pooled_baseline_mean": report.pooled_baseline_mean,
            "per_scenario_meta_mean": report.per_scenario_meta_mean,
            "per_scenario_baseline_mean": report.per_scenario_baseline_mean,
            "entries": [
                {
                    "scenario_index": e.scenario_index,
                    "scenario_seed": e.scenario_seed,
                    "seed": e.seed,
                    "meta_return": e.meta_return,
                    "baseline_return": e.baseline_return,
                }
                for e in report.entries
            ],
            "curves": [
                {
                    "scenario_seed": c.scenario_seed,
                    "steps": c.steps,
                    "meta_returns": c.meta_returns,
                    "baseline_returns": c.baseline_returns,
                }
                for c in report.curves
            ],
        },
    )
    writer.write_csv(
        "sample_efficiency.csv",
        ("scenario_index", "scenario_seed", "seed", "meta_return", "baseline_return"),
        [
            (e.scenario_index, e.scenario_seed, e.seed, e.meta_return, e.baseline_return)
            for e in report.entries
        ],
    )
    writer.write_manifest()
    print(
        f"meta-training stopped by {result.stop_reason}; "
        f"held-out wins {report.meta_wins}/{report.n_scenarios}"
    )
    return 0


def cmd_tradeoff(config: ExperimentConfig, out_dir: str, seed: int) -> int:
    writer = ArtifactWriter(out_dir)
    train_pool, _ = _build_pools(config)
    scenario = train_pool[config.agent.scenario_index]
    points = train_constraint_family(
        scenario,
        list(config.tradeoff_bands),
        _train_config(config),
        seed,
        k_levels=config.agent.levels,
        max_workers=worker_count(),
    )
    writer.write_csv(
        "tradeoff.csv",
        ("p_min", "p_max", "mean_return", "mean_sum_r1", "mean_sum_r2"),
        [(pt.p_min, pt.p_max, pt.mean_return, pt.mean_sum_r1, pt.mean_sum_r2) for pt in points],
    )
    writer.write_manifest()
    print(f"trade-off table over {len(points)} band(s) written")
    return 0


def cmd_report(config: ExperimentConfig, out_dir: str, seed: int) -> int:
    writer = ArtifactWriter(out_dir)
    from .io import read_episode_csv  # local import keeps the module graph flat

    episode_rows = []
    episodes_dir = writer.path("episodes")
    if episodes_dir.is_dir():
        for csv_path in sorted(episodes_dir.glob("*.csv")):
            record = read_episode_csv(
                csv_path, config.reward_weights.alpha1, config.reward_weights.alpha2
            )
            if not record.steps:
                continue
            sum_r1, sum_r2, total = objective_returns(record)
            metrics = alignment_metrics(record) if len(record) >= 2 else None
            episode_rows.append(
                {
                    "source": f"episodes/{csv_path.name}",
                    "sum_r1": sum_r1,
                    "sum_r2": sum_r2,
                    "sum_total": total,
                    "rmse": metrics.rmse if metrics else None,
                    "pearson_r": metrics.pearson_r if metrics else None,
                }
            )

    summary = {"episodes": episode_rows}
    for name in ("violations.json", "tradeoff.csv", "sample_efficiency.json"):
        summary[name.split(".")[0]] = writer.path(name).exists()

    writer.write_json("summary.json", summary)
    writer.write_csv(
        "summary.csv",
        ("source", "sum_r1", "sum_r2", "sum_total", "rmse", "pearson_r"),
        [
            (
                row["source"],
                row["sum_r1"],
                row["sum_r2"],
                row["sum_total"],
                "" if row["rmse"] is None else row["rmse"],
                "" if row["pearson_r"] is None else row["pearson_r"],
            )
            for row in episode_rows
        ],
    )
    writer.write_manifest()
    print(f"report over {len(episode_rows)} episode file(s) written")
    return 0


def cmd_run(config: ExperimentConfig, out_dir: str, seed: int) -> int:
    """The full pipeline in dependency order, one output directory."""
    for step in (
        cmd_validate,
        cmd_build_pool,
        cmd_train,
        cmd_meta_train,
        cmd_evaluate,
        cmd_tradeoff,
        cmd_report,
    ):
        status = step(config, out_dir, seed)
        if status != 0:
            return status
    return 0


_HANDLERS = {
    "validate": cmd_validate,
    "build-pool": cmd_build_pool,
    "train": cmd_train,
    "meta-train": cmd_meta_train,
    "evaluate": cmd_evaluate,
    "tradeoff": cmd_tradeoff,
    "report": cmd_report,
    "run": cmd_run,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="voltmarket",
        description="Desk-scale electricity market simulator and pricing-agent harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="path to the experiment JSON config")
        cmd.add_argument("--out", default=None, help="output directory (default: config paths.output_dir)")
        cmd.add_argument("--seed", type=int, default=None, help="training seed (default: config seeds.train_seed)")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
    except ConfigValidationError as exc:
        print(exc, file=sys.stderr)
        return 2
    out_dir = args.out if args.out is not None else config.output_dir
    seed = args.seed if args.seed is not None else config.train_seed

    try:
        return _HANDLERS[args.command](config, out_dir, seed)
    except (TraceFormatError, PoolConfigError, ScenarioValidationError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except (PolicyFileError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""
experiment_producer.py

Train learners on the LEO MF-RIS environment and stream per-slot metrics to CSV.

    py -m producers.experiment_producer run configs/desk.env
    py -m producers.experiment_producer run configs/desk.env --algorithm maddpg --seed 0
    py -m producers.experiment_producer sweep configs/desk.env --axis num_elements --values 4,16
    py -m producers.experiment_producer check

Example metrics row (after the "# schema_version=1" line and the header):

    3,17,0,41.27,44.9,6.31,1.8e+06,89122.4,0,0.12,0,0,sun

Exit codes: 0 success, 1 run failure, 2 bad config, 3 bad checkpoint.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import argparse
import pathlib
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np
import pandas as pd

from agents.fed import partition_groups
from agents.maddpg_trainer import CentralDdpgTrainer, FlSettings, MultiAgentTrainer, RandomPolicy
from consumers.metrics_consumer import (
    METRICS_FILE,
    SCHEMA_VERSION,
    SUMMARY_FILE,
    summarize_run,
    sweep_table,
    write_summary,
    write_sweep_table,
)
from envs.leo_ris_env import LeoRisEnv, RewardBreakdown, SlotMetrics
from utils.utils_config import (
    ALGORITHMS,
    ExperimentConfig,
    element_grid,
    get_default_config_path,
    get_output_dir,
    get_workers,
    load_experiment_config,
    with_overrides,
)
from utils.utils_errors import CheckpointError, ConfigError, FemadError
from utils.utils_logger import logger

#####################################
# Metrics record
#####################################


@dataclass(frozen=True)
class MetricsRecord:
    """One row of the metrics stream: one (episode, slot, agent)."""

    episode: int
    slot: int
    agent: int
    reward: float
    ee: float
    rate_sum: float
    E_tot: float
    battery: float
    c1: float
    c2: float
    c3: float
    c4: float
    phase: str


METRICS_COLUMNS: tuple[str, ...] = tuple(f.name for f in fields(MetricsRecord))
FLOAT_FORMAT = "%.10g"


def slot_records(episode: int, metrics: SlotMetrics, rewards: Sequence[RewardBreakdown]) -> list[MetricsRecord]:
    rate_sum = metrics.rate_sum
    return [
        MetricsRecord(
            episode=episode,
            slot=metrics.slot,
            agent=l,
            reward=r.reward,
            ee=r.ee,
            rate_sum=float(rate_sum[l]),
            E_tot=float(metrics.e_tot[l]),
            battery=float(metrics.battery[l]),
            c1=r.c[0],
            c2=r.c[1],
            c3=r.c[2],
            c4=r.c[3],
            phase=metrics.phase[l].value,
        )
        for l, r in enumerate(rewards)
    ]


def start_metrics_file(path: pathlib.Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(f"# schema_version={SCHEMA_VERSION}\n")
        f.write(",".join(METRICS_COLUMNS) + "\n")


def append_metrics(path: pathlib.Path, records: Sequence[MetricsRecord]) -> None:
    frame = pd.DataFrame([asdict(r) for r in records], columns=list(METRICS_COLUMNS))
    frame.to_csv(path, mode="a", header=False, index=False, float_format=FLOAT_FORMAT)


#####################################
# Learner construction
#####################################


def build_learner(config: ExperimentConfig, seed: int):
    """femad and maddpg share one trainer; maddpg simply has no FL groups."""
    sc = config.scenario
    if config.algorithm == "femad":
        groups = partition_groups(sc.L, config.effective_group_size, config.fl_period, config.fl_slice_fraction)
        fl = FlSettings(tuple(groups), config.fl_include_target_actor, config.fl_xi)
        return MultiAgentTrainer(sc, config.train, seed, fl)
    if config.algorithm == "maddpg":
        return MultiAgentTrainer(sc, config.train, seed, FlSettings())
    if config.algorithm == "ddpg_central":
        return CentralDdpgTrainer(sc, config.train, seed)
    if config.algorithm == "random":
        return RandomPolicy(sc, seed)
    raise ConfigError(f"unknown algorithm '{config.algorithm}'", config.path)


def episode_seed(seed: int, episode: int) -> int:
    return int(np.random.SeedSequence([seed, episode]).generate_state(1)[0])


#####################################
# One seed
#####################################


def run_seed(config: ExperimentConfig, seed: int, run_dir: pathlib.Path) -> pathlib.Path:
    """Train one learner for every episode of one seed. Returns the metrics path."""
    sc = config.scenario
    seed_dir = pathlib.Path(run_dir) / f"seed_{seed}"
    metrics_path = seed_dir / METRICS_FILE
    start_metrics_file(metrics_path)

    env = LeoRisEnv(sc)
    learner = build_learner(config, seed)
    logger.info(f"Seed {seed}: {config.algorithm}, {config.episodes} episodes x {config.slots} slots -> {seed_dir}")

    for episode in range(config.episodes):
        states = env.reset(episode_seed(seed, episode))
        records: list[MetricsRecord] = []
        quality = np.zeros(sc.L)
        for slot in range(config.slots):
            raw = learner.act(states, explore=True)
            actions = env.decode_action(np.stack(raw))
            next_states, rewards, metrics = env.step(actions)
            done = slot == config.slots - 1
            learner.observe(states, raw, [r.reward for r in rewards], next_states, done)
            learner.learn()
            records.extend(slot_records(episode, metrics, rewards))
            quality += metrics.channel_quality
            states = next_states
        append_metrics(metrics_path, records)
        learner.end_episode(episode, quality / config.slots)

        mean_reward = float(np.mean([r.reward for r in records]))
        mean_ee = float(np.mean([r.ee for r in records]))
        logger.info(f"Seed {seed} episode {episode}: mean reward {mean_reward:.4f}, mean EE {mean_ee:.4f}")

    learner.save(seed_dir / "checkpoints")
    return metrics_path


def _run_seed_job(job: tuple[ExperimentConfig, int, pathlib.Path]) -> pathlib.Path:
    return run_seed(*job)


#####################################
# Run and sweep
#####################################


def run_experiment(
    config: ExperimentConfig,
    out_dir: pathlib.Path,
    seeds: Sequence[int] | None = None,
    workers: int = 1,
) -> dict:
    """Every seed of one config, then the summary recomputed from the metrics files."""
    seeds = tuple(config.seeds if seeds is None else seeds)
    run_dir = pathlib.Path(out_dir) / config.algorithm
    jobs = [(config, s, run_dir) for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_run_seed_job, jobs))
    else:
        for job in jobs:
            _run_seed_job(job)

    summary = summarize_run(run_dir, config.algorithm, config.summary_window)
    write_summary(run_dir / SUMMARY_FILE, summary)
    logger.info(f"{config.algorithm}: mean final-window EE {summary['mean_final_window_ee']:.4f} over seeds {list(seeds)}")
    return summary


SWEEP_AXES: tuple[str, ...] = ("num_leo", "num_elements", "on_fraction", "group_size", "num_antennas")


def sweep_overrides(config: ExperimentConfig, axis: str, value: str) -> dict[str, str]:
    """Config keys to replace for one sweep point."""
    if axis == "num_leo":
        overrides = {"scenario.L": str(int(value))}
        if config.fl_xi is not None:
            overrides["fl.xi"] = "none"
        return overrides
    if axis == "num_elements":
        m_h, m_v = element_grid(int(value))
        return {"scenario.M_h": str(m_h), "scenario.M_v": str(m_v)}
    if axis == "on_fraction":
        return {"scenario.element_on_fraction": str(float(value))}
    if axis == "group_size":
        if config.algorithm != "femad":
            raise ConfigError(f"axis group_size needs algorithm femad, not {config.algorithm}", config.path)
        size = int(value)
        if not 1 <= size <= config.scenario.L:
            raise ConfigError(f"group size {size} must lie in [1, {config.scenario.L}]", config.path)
        return {"fl.group_size": str(size)}
    if axis == "num_antennas":
        return {"scenario.N": str(int(value))}
    raise ConfigError(f"unknown sweep axis '{axis}' (expected one of {SWEEP_AXES})", config.path)


def run_sweep(
    config: ExperimentConfig,
    axis: str,
    values: Sequence[str],
    out_dir: pathlib.Path,
    seeds: Sequence[int] | None = None,
    workers: int = 1,
) -> pd.DataFrame:
    """One run per value; consolidated final-window EE per value per seed."""
    # Validate every point before training anything.
    try:
        points = [(v, with_overrides(config, sweep_overrides(config, axis, v))) for v in values]
    except ValueError as e:
        if isinstance(e, FemadError):
            raise
        raise ConfigError(f"bad value for axis {axis}: {e}", config.path) from e

    sweep_dir = pathlib.Path(out_dir) / f"sweep_{axis}"
    for value, point in points:
        logger.info(f"Sweep {axis}={value}")
        run_experiment(point, sweep_dir / f"value_{value}", seeds, workers)

    table = sweep_table(sweep_dir, axis, config.algorithm, config.summary_window)
    write_sweep_table(sweep_dir / f"sweep_{axis}.csv", table)
    return table


def run_checks(extra: Sequence[str] = ()) -> int:
    """Run the test suite in-process and return pytest's exit code."""
    import pytest

    tests_dir = pathlib.Path(__file__).resolve().parent.parent / "tests"
    return int(pytest.main(["-q", str(tests_dir), *extra]))


#####################################
# Command line
#####################################


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="experiment_producer", description="FEMAD experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("config", nargs="?", type=pathlib.Path, default=None, help="experiment config (.env)")
        p.add_argument("--seed", type=int, action="append", default=None, help="run only this seed (repeatable)")
        p.add_argument("--out", type=pathlib.Path, default=None, help="output root")
        p.add_argument("--algorithm", choices=ALGORITHMS, default=None, help="override experiment.algorithm")
        p.add_argument("--workers", type=int, default=None, help="parallel seed processes")

    common(sub.add_parser("run", help="train every seed of one config"))
    sweep = sub.add_parser("sweep", help="one run per value of a scenario axis")
    common(sweep)
    sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sweep.add_argument("--values", required=True, help="comma-separated values")
    check = sub.add_parser("check", help="run the test suite")
    check.add_argument("--runslow", action="store_true", help="include the slow learning-trend runs")
    return parser


def resolve_output_dir(args: argparse.Namespace, config: ExperimentConfig) -> pathlib.Path:
    if args.out is not None:
        return args.out
    if config.output_dir is not None:
        return config.output_dir
    return get_output_dir() / config.path.stem if config.path else get_output_dir()


def dispatch(args: argparse.Namespace) -> int:
    if args.command == "check":
        return run_checks(["--runslow"] if args.runslow else [])

    config_path = args.config or get_default_config_path()
    overrides = {"experiment.algorithm": args.algorithm} if args.algorithm else None
    config = load_experiment_config(config_path, overrides)
    out_dir = resolve_output_dir(args, config)
    workers = args.workers if args.workers is not None else get_workers()
    seeds = args.seed

    if args.command == "run":
        run_experiment(config, out_dir, seeds, workers)
    else:
        values = [v.strip() for v in args.values.split(",") if v.strip()]
        if not values:
            raise ConfigError("--values needs at least one value", config.path)
        run_sweep(config, args.axis, values, out_dir, seeds, workers)
    return 0


#####################################
# Main Function
#####################################


def main(argv: Sequence[str] | None = None) -> int:
    """
    Main entry point for the experiment runner.

    - Parses the command line and the experiment config.
    - Trains every requested seed and writes metrics, checkpoints and summaries.
    - Maps failures to exit codes.
    """
    logger.info("START experiment producer.")
    args = build_parser().parse_args(argv)
    try:
        code = dispatch(args)
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        return 2
    except CheckpointError as e:
        logger.error(f"Checkpoint error: {e}")
        return 3
    except FemadError as e:
        logger.error(f"Run failed: {e}")
        return 1
    except KeyboardInterrupt:
        logger.warning("Experiment interrupted by user.")
        return 1
    logger.info("END experiment producer.")
    return code


#####################################
# Conditional Execution
#####################################

if __name__ == "__main__":
    sys.exit(main())

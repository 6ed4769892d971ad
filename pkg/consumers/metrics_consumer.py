"""
metrics_consumer.py

Read the metrics streams written by the experiment producer and turn them into
summaries and learning-curve plots.

Every number this module reports is recomputed from metrics.csv files, so a
run directory can be summarized again long after training finished.

Run directory layout (one algorithm):

    <out>/<algorithm>/seed_<s>/metrics.csv
    <out>/<algorithm>/seed_<s>/checkpoints/*.ckpt
    <out>/<algorithm>/summary.json

Sweep layout:

    <out>/sweep_<axis>/value_<v>/<algorithm>/...
    <out>/sweep_<axis>/sweep_<axis>.csv
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import json
import math
import pathlib
import sys
from typing import Iterable

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from utils.utils_config import get_output_dir  # noqa: E402
from utils.utils_errors import FemadError, PreconditionError  # noqa: E402
from utils.utils_logger import logger  # noqa: E402

SCHEMA_VERSION = 1
METRICS_FILE = "metrics.csv"
SUMMARY_FILE = "summary.json"

#####################################
# Reading
#####################################


def read_metrics(path: pathlib.Path) -> pd.DataFrame:
    """Load one metrics stream; the first line must carry the schema version."""
    path = pathlib.Path(path)
    with open(path, "r") as f:
        first = f.readline().strip()
    if first != f"# schema_version={SCHEMA_VERSION}":
        raise PreconditionError(f"{path}: unsupported metrics header '{first}'")
    return pd.read_csv(path, skiprows=1)


def seed_dirs(run_dir: pathlib.Path) -> list[pathlib.Path]:
    """seed_<s> folders holding a metrics file, ordered by seed."""
    found = [p for p in pathlib.Path(run_dir).glob("seed_*") if (p / METRICS_FILE).exists()]
    return sorted(found, key=lambda p: int(p.name.split("_", 1)[1]))


#####################################
# Summaries
#####################################


def window_size(episodes: int, fraction: float) -> int:
    """Episodes in a first/last window: ceil(fraction * episodes), at least one."""
    return max(1, math.ceil(round(fraction * episodes, 9)))


def episode_means(df: pd.DataFrame) -> pd.DataFrame:
    """Mean reward, EE and rate sum per episode over all slots and agents."""
    return df.groupby("episode")[["reward", "ee", "rate_sum"]].mean().sort_index()


def seed_summary(df: pd.DataFrame, fraction: float) -> dict[str, float | int]:
    per_episode = episode_means(df)
    episodes = len(per_episode)
    window = window_size(episodes, fraction)
    first = per_episode.iloc[:window]
    last = per_episode.iloc[-window:]
    return {
        "episodes": episodes,
        "window_episodes": window,
        "first_window_reward": float(first["reward"].mean()),
        "last_window_reward": float(last["reward"].mean()),
        "first_window_ee": float(first["ee"].mean()),
        "final_window_ee": float(last["ee"].mean()),
        "mean_ee": float(per_episode["ee"].mean()),
        "depletion_slots": int((df["c4"] > 0).sum()),
    }


def summarize_run(run_dir: pathlib.Path, algorithm: str, fraction: float) -> dict:
    """Per-seed and across-seed summary of one algorithm's run directory."""
    run_dir = pathlib.Path(run_dir)
    dirs = seed_dirs(run_dir)
    if not dirs:
        raise PreconditionError(f"{run_dir}: no metrics files found")
    per_seed = {}
    for d in dirs:
        per_seed[d.name.split("_", 1)[1]] = seed_summary(read_metrics(d / METRICS_FILE), fraction)
    finals = [s["final_window_ee"] for s in per_seed.values()]
    return {
        "schema_version": SCHEMA_VERSION,
        "algorithm": algorithm,
        "summary_window": fraction,
        "seeds": [int(k) for k in per_seed],
        "per_seed": per_seed,
        "mean_final_window_ee": float(sum(finals) / len(finals)),
        "mean_first_window_reward": float(
            sum(s["first_window_reward"] for s in per_seed.values()) / len(per_seed)
        ),
        "mean_last_window_reward": float(
            sum(s["last_window_reward"] for s in per_seed.values()) / len(per_seed)
        ),
    }


def write_summary(path: pathlib.Path, summary: dict) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info(f"Summary written: {path}")


def compare_algorithms(out_dir: pathlib.Path, fraction: float = 0.1) -> pd.DataFrame:
    """Final-window EE per (algorithm, seed) for every algorithm folder under out_dir."""
    rows = []
    for run_dir in sorted(p for p in pathlib.Path(out_dir).iterdir() if p.is_dir()):
        for d in seed_dirs(run_dir):
            summary = seed_summary(read_metrics(d / METRICS_FILE), fraction)
            rows.append(
                {
                    "algorithm": run_dir.name,
                    "seed": int(d.name.split("_", 1)[1]),
                    "final_window_ee": summary["final_window_ee"],
                    "last_window_reward": summary["last_window_reward"],
                }
            )
    return pd.DataFrame(rows, columns=["algorithm", "seed", "final_window_ee", "last_window_reward"])


#####################################
# Sweeps
#####################################

SWEEP_COLUMNS = ["axis", "value", "seed", "final_window_ee"]


def sweep_table(sweep_dir: pathlib.Path, axis: str, algorithm: str, fraction: float) -> pd.DataFrame:
    """Final-window EE per sweep value per seed, rebuilt from the point metrics files."""
    sweep_dir = pathlib.Path(sweep_dir)
    rows = []
    points = sorted(sweep_dir.glob("value_*"), key=lambda p: float(p.name.split("_", 1)[1]))
    for point in points:
        value = point.name.split("_", 1)[1]
        for d in seed_dirs(point / algorithm):
            summary = seed_summary(read_metrics(d / METRICS_FILE), fraction)
            rows.append(
                {
                    "axis": axis,
                    "value": value,
                    "seed": int(d.name.split("_", 1)[1]),
                    "final_window_ee": summary["final_window_ee"],
                }
            )
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def write_sweep_table(path: pathlib.Path, table: pd.DataFrame) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(f"# schema_version={SCHEMA_VERSION}\n")
        table.to_csv(f, index=False, float_format="%.10g")
    logger.info(f"Sweep table written: {path} ({len(table)} rows)")


def read_sweep_table(path: pathlib.Path) -> pd.DataFrame:
    return pd.read_csv(path, skiprows=1, dtype={"value": str})


#####################################
# Plots
#####################################


def plot_learning_curves(run_dirs: Iterable[pathlib.Path], out_file: pathlib.Path) -> pathlib.Path:
    """Episode-mean EE and reward, averaged over seeds, one line per run directory."""
    fig, (ax_ee, ax_reward) = plt.subplots(1, 2, figsize=(11, 4))
    for run_dir in run_dirs:
        frames = [episode_means(read_metrics(d / METRICS_FILE)) for d in seed_dirs(run_dir)]
        if not frames:
            logger.warning(f"No metrics under {run_dir}, skipping.")
            continue
        mean = pd.concat(frames).groupby(level=0).mean()
        ax_ee.plot(mean.index, mean["ee"], label=pathlib.Path(run_dir).name)
        ax_reward.plot(mean.index, mean["reward"], label=pathlib.Path(run_dir).name)

    ax_ee.set_xlabel("Episode")
    ax_ee.set_ylabel("Energy efficiency (bit/s/Hz per MJ)")
    ax_reward.set_xlabel("Episode")
    ax_reward.set_ylabel("Mean reward")
    ax_ee.legend()
    ax_reward.legend()
    plt.tight_layout()
    out_file = pathlib.Path(out_file)
    out_file.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_file)
    plt.close(fig)
    logger.info(f"Learning curves saved: {out_file}")
    return out_file


def plot_sweep(table: pd.DataFrame, out_file: pathlib.Path) -> pathlib.Path:
    """Mean final-window EE against the swept value."""
    fig, ax = plt.subplots()
    grouped = table.assign(value=table["value"].astype(float)).groupby("value")["final_window_ee"]
    means = grouped.mean()
    ax.errorbar(means.index, means.values, yerr=grouped.std().fillna(0.0).values, marker="o", capsize=3)
    ax.set_xlabel(str(table["axis"].iloc[0]) if len(table) else "value")
    ax.set_ylabel("Final-window EE")
    plt.tight_layout()
    out_file = pathlib.Path(out_file)
    out_file.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_file)
    plt.close(fig)
    logger.info(f"Sweep plot saved: {out_file}")
    return out_file


#####################################
# Main Function
#####################################


def main() -> None:
    """
    Summarize and plot every algorithm folder under the output root.

    The root comes from the first argument or FEMAD_OUTPUT_DIR.
    """
    logger.info("START consumer.")
    out_dir = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else get_output_dir()
    if not out_dir.exists():
        logger.error(f"Output folder not found: {out_dir}. Exiting.")
        sys.exit(1)

    try:
        run_dirs = [p for p in sorted(out_dir.iterdir()) if p.is_dir() and seed_dirs(p)]
        for run_dir in run_dirs:
            summary = summarize_run(run_dir, run_dir.name, 0.1)
            write_summary(run_dir / SUMMARY_FILE, summary)
            logger.info(f"{run_dir.name}: mean final-window EE {summary['mean_final_window_ee']:.4f}")
        if run_dirs:
            plot_learning_curves(run_dirs, out_dir / "learning_curves.png")
            table = compare_algorithms(out_dir)
            logger.info(f"Final-window EE by algorithm:\n{table.groupby('algorithm')['final_window_ee'].mean()}")
        for table_path in sorted(out_dir.glob("sweep_*/sweep_*.csv")):
            plot_sweep(read_sweep_table(table_path), table_path.with_suffix(".png"))
    except FemadError as e:
        logger.error(f"Error summarizing {out_dir}: {e}")
        sys.exit(1)

    logger.info(f"END consumer for {out_dir}.")


#####################################
# Conditional Execution
#####################################

if __name__ == "__main__":
    main()

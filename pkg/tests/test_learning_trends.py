"""Desk-scale training runs. Minutes each; enable with --runslow."""

import pathlib

import pytest

from producers.experiment_producer import run_experiment
from utils.utils_config import load_experiment_config, with_overrides

DESK = pathlib.Path(__file__).resolve().parent.parent / "configs" / "desk.env"


def final_ee(summary):
    return {int(seed): s["final_window_ee"] for seed, s in summary["per_seed"].items()}


@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk")
    base = load_experiment_config(DESK)
    return {
        algorithm: run_experiment(with_overrides(base, {"experiment.algorithm": algorithm}), out)
        for algorithm in ("femad", "maddpg", "random")
    }


@pytest.mark.slow
def test_femad_reward_improves_for_every_seed(desk_runs):
    for seed, s in desk_runs["femad"]["per_seed"].items():
        assert s["last_window_reward"] > s["first_window_reward"], f"seed {seed}"


@pytest.mark.slow
def test_federation_does_not_hurt_efficiency(desk_runs):
    femad = final_ee(desk_runs["femad"])
    maddpg = final_ee(desk_runs["maddpg"])
    assert sum(femad[s] >= maddpg[s] for s in femad) >= 2


@pytest.mark.slow
def test_learners_beat_random(desk_runs):
    rand = final_ee(desk_runs["random"])
    for algorithm in ("femad", "maddpg"):
        learned = final_ee(desk_runs[algorithm])
        assert all(learned[s] > rand[s] for s in rand), algorithm


@pytest.mark.slow
def test_ablation_ordering(tmp_path):
    base = load_experiment_config(DESK)
    ee = {}
    for ablation in ("full", "fixed_eh", "no_eh", "no_amplify", "reflect_only"):
        config = with_overrides(base, {"scenario.ablation": ablation, "scenario.fixed_alpha": "0.5"})
        ee[ablation] = final_ee(run_experiment(config, tmp_path / ablation))
    seeds = list(ee["full"])

    def holds(better, worse):
        return sum(ee[better][s] >= ee[worse][s] for s in seeds) >= 2

    assert holds("full", "fixed_eh")
    assert holds("fixed_eh", "no_eh")
    assert holds("full", "no_amplify")
    assert holds("full", "reflect_only")

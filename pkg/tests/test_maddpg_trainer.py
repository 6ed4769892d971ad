import copy

import numpy as np
import pytest

from agents.ddpg import TrainConfig, critic_loss_and_grad, critic_target, load_checkpoint
from agents.fed import partition_groups
from agents.maddpg_trainer import CentralDdpgTrainer, FlSettings, MultiAgentTrainer, RandomPolicy
from envs.leo_ris_env import LeoRisEnv, Scenario

SC = Scenario(L=2, K=2, N=2, M_h=2, M_v=2)
CFG = TrainConfig(batch_size=4, buffer_size=50, hidden=(8, 8))


def fill(trainer, env, slots=6):
    states = env.reset(0)
    for _ in range(slots):
        raw = trainer.act(states)
        next_states, rewards, _ = env.step(env.decode_action(np.stack(raw)))
        trainer.observe(states, raw, [r.reward for r in rewards], next_states, False)
        states = next_states


def test_critic_sees_every_agent_action():
    trainer = MultiAgentTrainer(SC, CFG, seed=0)
    for agent in trainer.agents:
        assert agent.critic.input_dim == SC.state_dim + SC.L * SC.action_dim
        assert agent.actor.output_dim == SC.action_dim


def test_learn_waits_for_a_full_batch():
    trainer = MultiAgentTrainer(SC, CFG, seed=0)
    env = LeoRisEnv(SC)
    fill(trainer, env, slots=3)
    assert trainer.learn() is None
    fill(trainer, env, slots=3)
    stats = trainer.learn()
    assert np.isfinite(stats["critic_loss"])
    assert np.isfinite(stats["actor_grad_norm"])


def test_same_seed_same_learner():
    a = MultiAgentTrainer(SC, CFG, seed=3)
    b = MultiAgentTrainer(SC, CFG, seed=3)
    np.testing.assert_array_equal(a.agents[1].actor.params, b.agents[1].actor.params)
    assert not np.array_equal(a.agents[0].actor.params, a.agents[1].actor.params)


def test_federated_round_equalizes_target_critics():
    groups = tuple(partition_groups(SC.L, 2, period=1, slice_fraction=1.0))
    trainer = MultiAgentTrainer(SC, CFG, seed=1, fl=FlSettings(groups))
    a, b = trainer.agents
    assert not np.array_equal(a.critic_target.params, b.critic_target.params)
    trainer.end_episode(0, [0.3, 0.1])
    np.testing.assert_array_equal(a.critic_target.params, b.critic_target.params)
    assert not np.array_equal(a.actor_target.params, b.actor_target.params)
    assert trainer.round_index == 1


def test_federated_round_can_include_target_actors():
    groups = tuple(partition_groups(SC.L, 2, period=1, slice_fraction=1.0))
    trainer = MultiAgentTrainer(SC, CFG, seed=1, fl=FlSettings(groups, include_target_actor=True))
    trainer.end_episode(0, [0.3, 0.1])
    a, b = trainer.agents
    np.testing.assert_array_equal(a.actor_target.params, b.actor_target.params)


def test_federated_round_waits_for_period():
    groups = tuple(partition_groups(SC.L, 2, period=3, slice_fraction=1.0))
    trainer = MultiAgentTrainer(SC, CFG, seed=1, fl=FlSettings(groups))
    trainer.end_episode(0, [0.3, 0.1])
    trainer.end_episode(1, [0.3, 0.1])
    assert trainer.round_index == 0
    trainer.end_episode(2, [0.3, 0.1])
    assert trainer.round_index == 1


def test_without_groups_nothing_is_exchanged():
    trainer = MultiAgentTrainer(SC, CFG, seed=1)
    trainer.end_episode(4, [0.3, 0.1])
    a, b = trainer.agents
    assert not np.array_equal(a.critic_target.params, b.critic_target.params)
    assert trainer.noise_sigma == pytest.approx(CFG.noise_sigma * CFG.noise_decay)


def test_central_learner_splits_joint_action():
    trainer = CentralDdpgTrainer(SC, CFG, seed=0)
    env = LeoRisEnv(SC)
    states = env.reset(0)
    raw = trainer.act(states)
    assert len(raw) == SC.L
    assert all(r.shape == (SC.action_dim,) for r in raw)
    assert trainer.agent.critic.input_dim == SC.L * (SC.state_dim + SC.action_dim)
    fill(trainer, env, slots=5)
    assert trainer.learn() is not None


def test_random_policy_acts_without_learning():
    policy = RandomPolicy(SC, seed=0)
    raw = policy.act([np.zeros(SC.state_dim)] * SC.L)
    assert [r.shape for r in raw] == [(SC.action_dim,)] * SC.L
    assert policy.learn() is None


def test_save_writes_loadable_checkpoints(tmp_path):
    trainer = MultiAgentTrainer(SC, CFG, seed=2)
    trainer.save(tmp_path)
    for l in range(SC.L):
        for part in ("actor", "critic", "actor_target", "critic_target"):
            assert (tmp_path / f"agent_{l}_{part}.ckpt").exists()
    loaded = load_checkpoint(tmp_path / "agent_1_actor.ckpt")
    np.testing.assert_array_equal(loaded.params, trainer.agents[1].actor.params)


def test_every_target_comes_from_pre_update_networks():
    cfg = TrainConfig(batch_size=4, buffer_size=50, hidden=(8, 8), tau=0.5, lr_actor=0.05)
    trainer = MultiAgentTrainer(SC, cfg, seed=4)
    fill(trainer, LeoRisEnv(SC), slots=6)
    before = copy.deepcopy(trainer)

    stats = trainer.learn()

    idx = before.agents[0].buffer.sample_indices(cfg.batch_size, before.sample_rng)
    batches = [agent.buffer.gather(idx) for agent in before.agents]
    next_joint = [b.s_next for b in batches]
    target_actors = [agent.actor_target for agent in before.agents]
    losses = []
    for agent, batch in zip(before.agents, batches):
        batch.s_next_joint = next_joint
        y = critic_target(agent.critic_target, target_actors, batch, cfg.gamma)
        losses.append(critic_loss_and_grad(agent.critic, y, batch)[0])
    assert stats["critic_loss"] == pytest.approx(np.mean(losses), rel=1e-12)
    assert not np.array_equal(trainer.agents[0].actor_target.params, before.agents[0].actor_target.params)

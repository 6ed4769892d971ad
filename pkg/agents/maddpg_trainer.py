"""
maddpg_trainer.py - learners that drive the LEO MF-RIS environment.

    MultiAgentTrainer   one DDPG learner per LEO with centralized critics
                        (MADDPG); with FL groups it becomes FEMAD
    CentralDdpgTrainer  one learner over all agents' states and actions
    RandomPolicy        uniform feasible actions, no learning

All three expose act / observe / learn / end_episode / save so the runner can
treat them alike.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import pathlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import numpy.typing as npt

from agents.ddpg import (
    Minibatch,
    Mlp,
    ReplayBuffer,
    TrainConfig,
    act,
    actor_update,
    critic_target,
    critic_update,
    make_optimizer,
    save_checkpoint,
    soft_update,
)
from agents.fed import FlGroup, federated_round
from envs.leo_ris_env import Scenario, random_raw_action
from utils.utils_logger import logger

Array = npt.NDArray[np.float64]

#####################################
# Federated settings
#####################################


@dataclass(frozen=True)
class FlSettings:
    """Groups plus exchange options; an empty group list disables the exchange."""

    groups: tuple[FlGroup, ...] = ()
    include_target_actor: bool = False
    xi: tuple[float, ...] | None = None

    @property
    def enabled(self) -> bool:
        return any(len(g.members) > 1 for g in self.groups)


#####################################
# Single DDPG learner
#####################################


class DdpgAgent:
    """Actor, critic, their targets, optimizers and a replay buffer."""

    def __init__(
        self,
        agent_id: int,
        state_dim: int,
        action_dim: int,
        critic_input_dim: int,
        cfg: TrainConfig,
        rng: np.random.Generator,
    ):
        self.agent_id = agent_id
        self.cfg = cfg
        self.rng = rng
        self.actor = Mlp([state_dim, *cfg.hidden, action_dim], rng=rng)
        self.critic = Mlp([critic_input_dim, *cfg.hidden, 1], rng=rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_opt = make_optimizer(cfg.optimizer, cfg.lr_actor)
        self.critic_opt = make_optimizer(cfg.optimizer, cfg.lr_critic)
        self.buffer = ReplayBuffer(cfg.buffer_size)

    def act(self, state, noise_sigma: float) -> Array:
        return act(self.actor, state, noise_sigma, self.rng)

    def target(self, batch: Minibatch, target_actors: Sequence[Mlp]) -> Array:
        return critic_target(self.critic_target, target_actors, batch, self.cfg.gamma)

    def update(self, batch: Minibatch, y: Array, action_offset: int) -> tuple[float, float]:
        """Critic step toward y, actor step, then soft updates. Returns (critic loss, actor grad norm)."""
        cfg = self.cfg
        loss = critic_update(self.critic, y, batch, self.critic_opt, cfg.grad_clip)
        grad_norm = actor_update(self.actor, self.critic, batch, self.actor_opt, action_offset, cfg.grad_clip)
        soft_update(self.actor_target, self.actor, cfg.tau)
        soft_update(self.critic_target, self.critic, cfg.tau)
        return loss, grad_norm

    def save(self, out_dir: pathlib.Path, prefix: str) -> None:
        save_checkpoint(out_dir / f"{prefix}_actor.ckpt", self.actor)
        save_checkpoint(out_dir / f"{prefix}_critic.ckpt", self.critic)
        save_checkpoint(out_dir / f"{prefix}_actor_target.ckpt", self.actor_target)
        save_checkpoint(out_dir / f"{prefix}_critic_target.ckpt", self.critic_target)


def _spawn_rngs(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


#####################################
# MADDPG / FEMAD
#####################################


class MultiAgentTrainer:
    """Per-agent actors; each critic sees its own state and every agent's raw action."""

    def __init__(self, scenario: Scenario, cfg: TrainConfig, seed: int, fl: FlSettings | None = None):
        self.sc = scenario
        self.cfg = cfg
        self.seed = seed
        self.fl = fl or FlSettings()
        self.noise_sigma = cfg.noise_sigma
        self.round_index = 0
        rngs = _spawn_rngs(seed, scenario.L + 1)
        self.sample_rng = rngs[-1]
        critic_in = scenario.state_dim + scenario.L * scenario.action_dim
        self.agents = [
            DdpgAgent(l, scenario.state_dim, scenario.action_dim, critic_in, cfg, rngs[l])
            for l in range(scenario.L)
        ]
        logger.info(
            f"MADDPG learners: {scenario.L} agents, state {scenario.state_dim}, "
            f"action {scenario.action_dim}, critic input {critic_in}, FL {'on' if self.fl.enabled else 'off'}"
        )

    def act(self, states: Sequence[Array], explore: bool = True) -> list[Array]:
        sigma = self.noise_sigma if explore else 0.0
        return [agent.act(s, sigma) for agent, s in zip(self.agents, states)]

    def observe(self, states, raw_actions, rewards: Sequence[float], next_states, done: bool) -> None:
        a_joint = np.concatenate(raw_actions)
        for agent, s, r, s_next in zip(self.agents, states, rewards, next_states):
            agent.buffer.push(s, a_joint, r * self.cfg.reward_scale, s_next, done)

    def learn(self) -> dict[str, float] | None:
        """One update for every agent on a shared draw of buffer rows."""
        # Buffers fill in lockstep, so one index draw aligns every agent's rows.
        idx = self.agents[0].buffer.sample_indices(self.cfg.batch_size, self.sample_rng)
        if idx is None:
            return None
        batches = [agent.buffer.gather(idx) for agent in self.agents]
        next_joint = [b.s_next for b in batches]
        target_actors = [agent.actor_target for agent in self.agents]
        for batch in batches:
            batch.s_next_joint = next_joint
        # Every target is taken from the pre-update target networks.
        targets = [agent.target(batch, target_actors) for agent, batch in zip(self.agents, batches)]
        losses, norms = [], []
        for l, (agent, batch, y) in enumerate(zip(self.agents, batches, targets)):
            loss, norm = agent.update(batch, y, l * self.sc.action_dim)
            losses.append(loss)
            norms.append(norm)
        return {"critic_loss": float(np.mean(losses)), "actor_grad_norm": float(np.mean(norms))}

    def end_episode(self, episode: int, channel_quality: Sequence[float]) -> None:
        """Decay exploration and run a federated round when one is due."""
        self.noise_sigma *= self.cfg.noise_decay
        if not self.fl.enabled:
            return
        period = min(g.period for g in self.fl.groups)
        if (episode + 1) % period != 0:
            return
        self._federated_round(channel_quality)

    def _federated_round(self, channel_quality: Sequence[float]) -> None:
        xi = None if self.fl.xi is None else dict(enumerate(self.fl.xi))
        weights = {a.agent_id: a.critic_target.params for a in self.agents}
        merged, reports = federated_round(self.fl.groups, weights, channel_quality, self.seed, self.round_index, xi)
        for agent in self.agents:
            agent.critic_target.params = merged[agent.agent_id]
        if self.fl.include_target_actor:
            actor_weights = {a.agent_id: a.actor_target.params for a in self.agents}
            # Distinct round index keeps the actor mask independent of the critic mask.
            merged_actor, _ = federated_round(
                self.fl.groups, actor_weights, channel_quality, self.seed, 2**31 + self.round_index, xi
            )
            for agent in self.agents:
                agent.actor_target.params = merged_actor[agent.agent_id]
        for report in reports:
            logger.info(
                f"FL round {self.round_index}: group {report.group.members} edge LEO {report.edge}, "
                f"{report.exchanged} target-critic weights exchanged"
            )
        self.round_index += 1

    def save(self, out_dir: pathlib.Path) -> None:
        for agent in self.agents:
            agent.save(out_dir, f"agent_{agent.agent_id}")


#####################################
# Centralized DDPG baseline
#####################################


class CentralDdpgTrainer:
    """One learner acting for every LEO on the concatenated state, trained on the reward sum."""

    def __init__(self, scenario: Scenario, cfg: TrainConfig, seed: int):
        self.sc = scenario
        self.cfg = cfg
        self.noise_sigma = cfg.noise_sigma
        rngs = _spawn_rngs(seed, 2)
        self.sample_rng = rngs[1]
        state_dim = scenario.L * scenario.state_dim
        action_dim = scenario.L * scenario.action_dim
        self.agent = DdpgAgent(0, state_dim, action_dim, state_dim + action_dim, cfg, rngs[0])
        logger.info(f"Central DDPG learner: state {state_dim}, action {action_dim}")

    def act(self, states: Sequence[Array], explore: bool = True) -> list[Array]:
        sigma = self.noise_sigma if explore else 0.0
        joint = self.agent.act(np.concatenate(states), sigma)
        return list(np.split(joint, self.sc.L))

    def observe(self, states, raw_actions, rewards, next_states, done: bool) -> None:
        self.agent.buffer.push(
            np.concatenate(states),
            np.concatenate(raw_actions),
            float(np.sum(rewards)) * self.cfg.reward_scale,
            np.concatenate(next_states),
            done,
        )

    def learn(self) -> dict[str, float] | None:
        idx = self.agent.buffer.sample_indices(self.cfg.batch_size, self.sample_rng)
        if idx is None:
            return None
        batch = self.agent.buffer.gather(idx)
        y = self.agent.target(batch, [self.agent.actor_target])
        loss, norm = self.agent.update(batch, y, 0)
        return {"critic_loss": loss, "actor_grad_norm": norm}

    def end_episode(self, episode: int, channel_quality: Sequence[float]) -> None:
        self.noise_sigma *= self.cfg.noise_decay

    def save(self, out_dir: pathlib.Path) -> None:
        self.agent.save(out_dir, "central")


#####################################
# Random policy
#####################################


class RandomPolicy:
    """Uniform feasible actions; nothing to learn or save."""

    def __init__(self, scenario: Scenario, seed: int):
        self.sc = scenario
        self.rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])

    def act(self, states: Sequence[Array], explore: bool = True) -> list[Array]:
        return [random_raw_action(self.sc, self.rng) for _ in states]

    def observe(self, states, raw_actions, rewards, next_states, done: bool) -> None:
        pass

    def learn(self) -> None:
        return None

    def end_episode(self, episode: int, channel_quality: Sequence[float]) -> None:
        pass

    def save(self, out_dir: pathlib.Path) -> None:
        pass

"""
ddpg.py - actor-critic building blocks with hand-written backprop.

Networks are tanh MLPs with a linear output layer. All parameters of a network
live in one flat float64 vector laid out layer by layer as W_i (row-major,
shape out x in) followed by b_i. The same flat vector is what the federated
exchange slices and what checkpoints store.
"""

#####################################
# Import Modules
#####################################

from __future__ import annotations

import pathlib
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
import numpy.typing as npt

from utils.utils_errors import CheckpointError, InvalidParameterError

Array = npt.NDArray[np.float64]

CHECKPOINT_MAGIC = b"FMAD"
CHECKPOINT_VERSION = 1

#####################################
# Training configuration
#####################################


@dataclass(frozen=True)
class TrainConfig:
    """Learner hyper-parameters. Defaults follow the reference simulation setup."""

    lr_actor: float = 0.001
    lr_critic: float = 0.0005
    gamma: float = 0.99
    tau: float = 0.005
    batch_size: int = 64
    buffer_size: int = 100_000
    noise_sigma: float = 0.1
    noise_decay: float = 0.999
    hidden: tuple[int, ...] = (256, 256)
    optimizer: str = "sgd"
    reward_scale: float = 0.01
    grad_clip: float = 10.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidParameterError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 <= self.tau <= 1.0:
            raise InvalidParameterError(f"tau must lie in [0, 1], got {self.tau}")
        if self.batch_size < 1 or self.batch_size > self.buffer_size:
            raise InvalidParameterError(
                f"batch size {self.batch_size} must lie in [1, buffer size {self.buffer_size}]"
            )
        if self.optimizer not in ("sgd", "adam"):
            raise InvalidParameterError(f"unknown optimizer '{self.optimizer}'")
        if self.lr_actor <= 0 or self.lr_critic <= 0 or self.noise_sigma < 0:
            raise InvalidParameterError("learning rates must be > 0 and noise_sigma >= 0")
        if self.grad_clip < 0 or self.reward_scale <= 0:
            raise InvalidParameterError("grad_clip must be >= 0 and reward_scale > 0")


#####################################
# Multi-layer perceptron
#####################################


class Mlp:
    """tanh hidden layers, linear output, parameters in one flat vector."""

    def __init__(
        self,
        layer_sizes: Sequence[int],
        params: Array | None = None,
        rng: np.random.Generator | None = None,
        final_scale: float = 3e-3,
    ):
        self.layer_sizes = tuple(int(n) for n in layer_sizes)
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise InvalidParameterError(f"invalid layer sizes {self.layer_sizes}")
        self.param_count = sum(
            (n_in + 1) * n_out for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:])
        )
        if params is not None:
            params = np.array(params, dtype=np.float64)
            if params.shape != (self.param_count,):
                raise InvalidParameterError(
                    f"expected {self.param_count} parameters, got {params.shape}"
                )
            self.params = params
        else:
            self.params = np.zeros(self.param_count)
            if rng is not None:
                self._init_params(rng, final_scale)

    def _init_params(self, rng: np.random.Generator, final_scale: float) -> None:
        last = len(self.layer_sizes) - 2
        for i, (W, b) in enumerate(self.layers()):
            bound = final_scale if i == last else 1.0 / np.sqrt(W.shape[1])
            W[...] = rng.uniform(-bound, bound, size=W.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)

    def layers(self) -> list[tuple[Array, Array]]:
        """(W, b) views into the flat parameter vector."""
        views = []
        offset = 0
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            W = self.params[offset : offset + n_in * n_out].reshape(n_out, n_in)
            offset += n_in * n_out
            b = self.params[offset : offset + n_out]
            offset += n_out
            views.append((W, b))
        return views

    def copy(self) -> "Mlp":
        return Mlp(self.layer_sizes, self.params.copy())

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    def _as_batch(self, x) -> tuple[Array, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        batch = x[None, :] if single else x
        if batch.ndim != 2 or batch.shape[1] != self.input_dim:
            raise InvalidParameterError(
                f"input must have {self.input_dim} features, got shape {x.shape}"
            )
        return batch, single

    def forward_cached(self, x) -> tuple[Array, list[Array]]:
        """Forward pass that also returns every layer's activation."""
        a, single = self._as_batch(x)
        activations = [a]
        layers = self.layers()
        for i, (W, b) in enumerate(layers):
            z = a @ W.T + b
            a = np.tanh(z) if i < len(layers) - 1 else z
            activations.append(a)
        out = a[0] if single else a
        return out, activations

    def forward(self, x) -> Array:
        """Network output for one input vector or a batch of rows."""
        return self.forward_cached(x)[0]

    def backward(self, x, upstream, activations: list[Array] | None = None) -> tuple[Array, Array]:
        """
        Gradient of sum(output * upstream) with respect to the flat parameters
        and to the input. Batches are summed over rows.
        """
        batch, single = self._as_batch(x)
        upstream = np.asarray(upstream, dtype=np.float64)
        delta = upstream[None, :] if upstream.ndim == 1 else upstream
        if delta.shape != (batch.shape[0], self.output_dim):
            raise InvalidParameterError(
                f"upstream gradient shape {upstream.shape} does not match output {self.output_dim}"
            )
        if activations is None:
            _, activations = self.forward_cached(batch)

        grad = np.zeros(self.param_count)
        grad_net = Mlp(self.layer_sizes, grad)
        grad_layers = grad_net.layers()
        layers = self.layers()
        for i in range(len(layers) - 1, -1, -1):
            W, _ = layers[i]
            a_prev = activations[i]
            gW, gb = grad_layers[i]
            gW[...] = delta.T @ a_prev
            gb[...] = delta.sum(axis=0)
            delta = delta @ W
            if i > 0:
                delta = delta * (1.0 - a_prev**2)
        grad_input = delta[0] if single else delta
        return grad_net.params, grad_input


#####################################
# Optimizers
#####################################


class SgdOptimizer:
    """Plain gradient descent."""

    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: Array, grad: Array) -> None:
        params -= self.lr * grad


class AdamOptimizer:
    """Adaptive moment estimation."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: Array | None = None
        self.v: Array | None = None
        self.t = 0

    def step(self, params: Array, grad: Array) -> None:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad**2
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(kind: str, lr: float) -> SgdOptimizer | AdamOptimizer:
    if kind == "adam":
        return AdamOptimizer(lr)
    if kind == "sgd":
        return SgdOptimizer(lr)
    raise InvalidParameterError(f"unknown optimizer '{kind}'")


def clip_by_norm(grad: Array, max_norm: float) -> Array:
    """Rescale grad to max_norm if it is longer; max_norm = 0 disables clipping."""
    if max_norm <= 0:
        return grad
    norm = float(np.linalg.norm(grad))
    return grad * (max_norm / norm) if norm > max_norm else grad


#####################################
# Replay buffer
#####################################


@dataclass
class Minibatch:
    """Rows of transitions. s_next_joint holds every agent's next state for target actions."""

    s: Array
    a_joint: Array
    r: Array
    s_next: Array
    done: Array
    s_next_joint: list[Array] | None = None

    def __len__(self) -> int:
        return int(self.r.shape[0])


class ReplayBuffer:
    """Fixed-capacity ring of (s, a_joint, r, s_next, done); the oldest entry is evicted first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise InvalidParameterError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.size = 0
        self._next = 0
        self._s: Array | None = None
        self._a: Array | None = None
        self._r = np.zeros(self.capacity)
        self._s_next: Array | None = None
        self._done = np.zeros(self.capacity)

    def __len__(self) -> int:
        return self.size

    def push(self, s, a_joint, r: float, s_next, done: bool = False) -> None:
        s = np.asarray(s, dtype=np.float64)
        a_joint = np.asarray(a_joint, dtype=np.float64)
        if self._s is None:
            self._s = np.zeros((self.capacity, s.shape[0]))
            self._a = np.zeros((self.capacity, a_joint.shape[0]))
            self._s_next = np.zeros((self.capacity, s.shape[0]))
        i = self._next
        self._s[i] = s
        self._a[i] = a_joint
        self._r[i] = r
        self._s_next[i] = s_next
        self._done[i] = float(done)
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> npt.NDArray[np.int64] | None:
        """Uniform draw with replacement, or None while fewer than batch_size entries exist."""
        if self.size < batch_size:
            return None
        return rng.integers(0, self.size, size=batch_size)

    def gather(self, idx) -> Minibatch:
        return Minibatch(
            s=self._s[idx],
            a_joint=self._a[idx],
            r=self._r[idx],
            s_next=self._s_next[idx],
            done=self._done[idx],
        )


def sample_minibatch(buf: ReplayBuffer, batch_size: int, rng: np.random.Generator) -> Minibatch | None:
    """Draw a minibatch, or None when the buffer is not ready yet."""
    idx = buf.sample_indices(batch_size, rng)
    return None if idx is None else buf.gather(idx)


#####################################
# DDPG operations
#####################################


class Critic(Protocol):
    def forward_cached(self, x) -> tuple[Array, list[Array]]: ...

    def backward(self, x, upstream, activations=None) -> tuple[Array, Array]: ...


def act(actor: Mlp, s, noise_sigma: float, rng: np.random.Generator) -> Array:
    """Policy output plus N(0, noise_sigma^2) exploration noise per component."""
    out = actor.forward(s)
    return out + rng.normal(0.0, noise_sigma, size=out.shape)


def critic_target(
    critic_t: Mlp,
    actors_t: Sequence[Mlp],
    batch: Minibatch,
    gamma: float,
) -> Array:
    """y = r + gamma * Q'(s', mu'_1(s'_1), ..., mu'_L(s'_L)), bootstrap masked on terminal rows."""
    next_states = batch.s_next_joint if batch.s_next_joint is not None else [batch.s_next]
    if len(next_states) != len(actors_t):
        raise InvalidParameterError(f"{len(actors_t)} target actors but {len(next_states)} next-state blocks")
    next_actions = np.concatenate(
        [actor.forward(s_next) for actor, s_next in zip(actors_t, next_states)], axis=1
    )
    q_next = critic_t.forward(np.concatenate([batch.s_next, next_actions], axis=1))[:, 0]
    return batch.r + gamma * (1.0 - batch.done) * q_next


def critic_loss_and_grad(critic: Mlp, y_tar: Array, batch: Minibatch) -> tuple[float, Array]:
    """Mean squared TD error and its gradient with respect to the critic parameters."""
    x = np.concatenate([batch.s, batch.a_joint], axis=1)
    q, activations = critic.forward_cached(x)
    err = y_tar - q[:, 0]
    loss = float(np.mean(err**2))
    upstream = (-2.0 / len(err) * err)[:, None]
    grad, _ = critic.backward(x, upstream, activations)
    return loss, grad


def critic_update(critic: Mlp, y_tar: Array, batch: Minibatch, optimizer, grad_clip: float = 0.0) -> float:
    """One descent step on the TD loss; returns the loss before the step."""
    loss, grad = critic_loss_and_grad(critic, y_tar, batch)
    optimizer.step(critic.params, clip_by_norm(grad, grad_clip))
    return loss


def actor_objective_grad(
    actor: Mlp,
    critic: Critic,
    batch: Minibatch,
    action_offset: int,
) -> tuple[float, Array]:
    """
    Mean Q with the agent's own action slot replaced by mu(s), and its gradient
    with respect to the actor parameters. Other agents' actions come from the batch.
    """
    own, actor_acts = actor.forward_cached(batch.s)
    a_joint = batch.a_joint.copy()
    width = own.shape[1]
    a_joint[:, action_offset : action_offset + width] = own
    x = np.concatenate([batch.s, a_joint], axis=1)
    q, critic_acts = critic.forward_cached(x)
    upstream = np.full((x.shape[0], 1), 1.0 / x.shape[0])
    _, grad_x = critic.backward(x, upstream, critic_acts)
    state_dim = batch.s.shape[1]
    grad_a = grad_x[:, state_dim + action_offset : state_dim + action_offset + width]
    grad, _ = actor.backward(batch.s, grad_a, actor_acts)
    return float(np.mean(q)), grad


def actor_update(
    actor: Mlp,
    critic: Critic,
    batch: Minibatch,
    optimizer,
    action_offset: int = 0,
    grad_clip: float = 0.0,
) -> float:
    """One ascent step on mean Q; returns the gradient norm before clipping."""
    _, grad = actor_objective_grad(actor, critic, batch, action_offset)
    optimizer.step(actor.params, -clip_by_norm(grad, grad_clip))
    return float(np.linalg.norm(grad))


def soft_update(target: Mlp, current: Mlp, tau: float) -> None:
    """target <- tau * current + (1 - tau) * target, in place."""
    if target.layer_sizes != current.layer_sizes:
        raise InvalidParameterError(
            f"architecture mismatch: {target.layer_sizes} vs {current.layer_sizes}"
        )
    target.params[:] = tau * current.params + (1.0 - tau) * target.params


#####################################
# Checkpoints
#####################################


def save_checkpoint(path: pathlib.Path, net: Mlp) -> None:
    """Header (magic, version, layer count, layer sizes) then little-endian float64 parameters."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.array([CHECKPOINT_VERSION, len(net.layer_sizes), *net.layer_sizes], dtype="<u4")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(header.tobytes())
        f.write(net.params.astype("<f8").tobytes())


def load_checkpoint(path: pathlib.Path) -> Mlp:
    """Read a network written by save_checkpoint."""
    data = pathlib.Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC or len(data) < 12:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version, count = np.frombuffer(data, dtype="<u4", count=2, offset=4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    offset = 12 + 4 * int(count)
    if len(data) < offset or (len(data) - offset) % 8:
        raise CheckpointError(f"{path}: truncated file")
    sizes = np.frombuffer(data, dtype="<u4", count=int(count), offset=12).astype(int).tolist()
    if len(sizes) < 2 or min(sizes) < 1:
        raise CheckpointError(f"{path}: invalid layer sizes {sizes}")
    expected = sum((n_in + 1) * n_out for n_in, n_out in zip(sizes[:-1], sizes[1:]))
    params = np.frombuffer(data, dtype="<f8", offset=offset)
    if params.shape[0] != expected:
        raise CheckpointError(f"{path}: expected {expected} parameters, found {params.shape[0]}")
    return Mlp(sizes, params=params)

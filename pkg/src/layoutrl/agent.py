"""Q-learning machinery: network, optimizer, replay, action selection.

The function approximator is a small fully connected ReLU network written
directly on numpy arrays, trained with Adam on the squared TD error of the
taken action.  Invalid actions (moves the simulator would drop) are masked
out of both action selection and the bootstrap max, so their Q-values
receive no gradient and never steer behaviour during training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class TrainingError(Exception):
    """Numerical failure during optimization (non-finite loss or weights)."""


class CheckpointError(Exception):
    """Unreadable or incompatible checkpoint data."""


# ---------------------------------------------------------------------------
# Network
# ---------------------------------------------------------------------------

class QNetwork:
    """Fully connected network; ReLU hidden layers, identity output.

    Parameters are initialized uniformly in +-1/sqrt(fan_in) from the
    provided generator, so construction is deterministic per seed.
    """

    def __init__(self, dims: tuple[int, ...], rng: np.random.Generator):
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError(f"need at least input and output dims, got {dims!r}")
        self.dims = tuple(int(d) for d in dims)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.dims[:-1], self.dims[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, fan_out))

    @property
    def n_actions(self) -> int:
        return self.dims[-1]

    def forward(self, obs: np.ndarray) -> np.ndarray:
        """Q-values for a single observation vector."""
        if obs.shape != (self.dims[0],):
            raise ValueError(f"expected observation shape ({self.dims[0]},), got {obs.shape}")
        a = obs
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ W + b, 0.0)
        return a @ self.weights[-1] + self.biases[-1]

    def forward_batch(self, obs: np.ndarray) -> np.ndarray:
        """Q-values for a (batch, obs_dim) matrix."""
        if obs.ndim != 2 or obs.shape[1] != self.dims[0]:
            raise ValueError(f"expected shape (batch, {self.dims[0]}), got {obs.shape}")
        a = obs
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ W + b, 0.0)
        return a @ self.weights[-1] + self.biases[-1]

    def clone(self) -> "QNetwork":
        other = QNetwork.__new__(QNetwork)
        other.dims = self.dims
        other.weights = [W.copy() for W in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other


def sync_target(net: QNetwork, target: QNetwork) -> None:
    """Copy online parameters into the target network in place."""
    if net.dims != target.dims:
        raise ValueError(f"dimension mismatch: {net.dims} vs {target.dims}")
    for dst, src in zip(target.weights, net.weights):
        np.copyto(dst, src)
    for dst, src in zip(target.biases, net.biases):
        np.copyto(dst, src)


def loss_and_grads(net: QNetwork, obs: np.ndarray, actions: np.ndarray,
                   targets: np.ndarray):
    """Mean squared TD error of the taken actions, with its gradient.

    Args:
        net: Network to differentiate.
        obs: (batch, obs_dim) observations.
        actions: (batch,) taken action indices.
        targets: (batch,) fixed regression targets.

    Returns:
        (loss, weight_grads, bias_grads) where the grads mirror the
        parameter lists of ``net``.
    """
    batch = obs.shape[0]
    activations = [obs]
    pre = []
    a = obs
    for W, b in zip(net.weights[:-1], net.biases[:-1]):
        z = a @ W + b
        pre.append(z)
        a = np.maximum(z, 0.0)
        activations.append(a)
    q = a @ net.weights[-1] + net.biases[-1]

    taken = q[np.arange(batch), actions]
    diff = taken - targets
    loss = float(np.mean(diff * diff))

    grad_q = np.zeros_like(q)
    grad_q[np.arange(batch), actions] = 2.0 * diff / batch
    grads_w = [np.empty(0)] * len(net.weights)
    grads_b = [np.empty(0)] * len(net.biases)
    g = grad_q
    for layer in range(len(net.weights) - 1, -1, -1):
        grads_w[layer] = activations[layer].T @ g
        grads_b[layer] = g.sum(axis=0)
        if layer > 0:
            g = (g @ net.weights[layer].T) * (pre[layer - 1] > 0.0)
    return loss, grads_w, grads_b


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

class Adam:
    """Adam with bias correction, one moment pair per parameter array."""

    def __init__(self, net: QNetwork, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.net = net
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m_w = [np.zeros_like(W) for W in net.weights]
        self.v_w = [np.zeros_like(W) for W in net.weights]
        self.m_b = [np.zeros_like(b) for b in net.biases]
        self.v_b = [np.zeros_like(b) for b in net.biases]

    def apply(self, grads_w: list[np.ndarray], grads_b: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.net.weights, grads_w, self.m_w, self.v_w):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        for p, g, m, v in zip(self.net.biases, grads_b, self.m_b, self.v_b):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# ---------------------------------------------------------------------------
# Transitions, replay, exploration
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Transition:
    """One stored experience.

    ``next_mask`` records which actions are valid in the next state so the
    bootstrap max can skip moves the simulator would drop.
    """

    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    terminal: bool
    next_mask: np.ndarray


class ReplayBuffer:
    """Fixed-capacity ring of transitions; FIFO overwrite when full."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._ptr = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, tr: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(tr)
        else:
            self._items[self._ptr] = tr
            self._ptr = (self._ptr + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Uniform sample with replacement, or None while undersized."""
        if len(self._items) < batch_size:
            return None
        idx = rng.integers(0, len(self._items), batch_size)
        return [self._items[i] for i in idx]

    def snapshot(self) -> list[Transition]:
        return list(self._items)


@dataclass(frozen=True)
class ExplorationSchedule:
    """Linear epsilon decay over a fixed number of environment steps."""

    start: float = 1.0
    end: float = 0.05
    decay_steps: int = 20_000

    def __post_init__(self):
        if not (0.0 <= self.end <= self.start <= 1.0):
            raise ValueError(f"need 0 <= end <= start <= 1, got {self}")
        if self.decay_steps < 1:
            raise ValueError(f"decay_steps must be positive, got {self.decay_steps}")

    def epsilon(self, step: int) -> float:
        frac = min(max(step, 0), self.decay_steps) / self.decay_steps
        return self.start + (self.end - self.start) * frac


def select_action(q_values: np.ndarray, valid_mask: np.ndarray, epsilon: float,
                  rng: np.random.Generator | None = None) -> int:
    """Epsilon-greedy over valid actions; greedy ties go to the lowest index.

    With ``epsilon == 0`` no randomness is consumed and ``rng`` may be None.
    """
    valid = np.flatnonzero(valid_mask)
    if valid.size == 0:
        raise ValueError("no valid actions to select from")
    if epsilon > 0.0:
        if rng is None:
            raise ValueError("epsilon > 0 requires a generator")
        if rng.uniform() < epsilon:
            return int(valid[rng.integers(valid.size)])
    masked = np.where(valid_mask, q_values, -np.inf)
    return int(np.argmax(masked))


def td_target(tr: Transition, target_net: QNetwork, gamma: float) -> float:
    """Bootstrap target: reward, plus the discounted masked max when alive."""
    if tr.terminal or not tr.next_mask.any():
        return tr.reward
    q = target_net.forward(tr.next_obs)
    return tr.reward + gamma * float(np.max(q[tr.next_mask]))


def _td_targets_batch(batch: list[Transition], target_net: QNetwork,
                      gamma: float) -> np.ndarray:
    next_obs = np.stack([tr.next_obs for tr in batch])
    q = target_net.forward_batch(next_obs)
    masks = np.stack([tr.next_mask for tr in batch])
    masked = np.where(masks, q, -np.inf)
    best = masked.max(axis=1)
    out = np.empty(len(batch))
    for i, tr in enumerate(batch):
        if tr.terminal or not tr.next_mask.any():
            out[i] = tr.reward
        else:
            out[i] = tr.reward + gamma * best[i]
    return out


def update_step(net: QNetwork, batch: list[Transition], target_net: QNetwork,
                gamma: float, optimizer: Adam) -> float:
    """One Adam step on the batch's TD loss; returns the pre-update loss."""
    obs = np.stack([tr.obs for tr in batch])
    actions = np.array([tr.action for tr in batch], dtype=int)
    targets = _td_targets_batch(batch, target_net, gamma)
    loss, grads_w, grads_b = loss_and_grads(net, obs, actions, targets)
    if not math.isfinite(loss):
        raise TrainingError(f"non-finite TD loss {loss!r} at optimizer step {optimizer.t + 1}")
    optimizer.apply(grads_w, grads_b)
    return loss


# ---------------------------------------------------------------------------
# Per-plane learner
# ---------------------------------------------------------------------------

class DQNAgent:
    """Everything one plane needs to learn: nets, replay, exploration."""

    def __init__(self, n_actions: int, obs_dim: int = 12,
                 hidden: tuple[int, ...] = (128, 128), lr: float = 1e-3,
                 gamma: float = 0.95, buffer_capacity: int = 50_000,
                 batch_size: int = 64, target_sync_every: int = 500,
                 schedule: ExplorationSchedule = ExplorationSchedule(),
                 init_rng: np.random.Generator | None = None,
                 explore_rng: np.random.Generator | None = None,
                 sample_rng: np.random.Generator | None = None):
        init_rng = init_rng if init_rng is not None else np.random.default_rng(0)
        self.net = QNetwork((obs_dim, *hidden, n_actions), init_rng)
        self.target = self.net.clone()
        self.optimizer = Adam(self.net, lr=lr)
        self.buffer = ReplayBuffer(buffer_capacity)
        self.schedule = schedule
        self.gamma = gamma
        self.batch_size = batch_size
        self.target_sync_every = target_sync_every
        self.explore_rng = explore_rng if explore_rng is not None else np.random.default_rng(1)
        self.sample_rng = sample_rng if sample_rng is not None else np.random.default_rng(2)
        self.env_steps = 0
        self.updates = 0

    @property
    def epsilon(self) -> float:
        return self.schedule.epsilon(self.env_steps)

    def act_train(self, obs: np.ndarray, valid_mask: np.ndarray) -> int:
        return select_action(self.net.forward(obs), valid_mask, self.epsilon,
                             self.explore_rng)

    def act_greedy(self, obs: np.ndarray) -> int:
        q = self.net.forward(obs)
        return select_action(q, np.ones(q.shape, dtype=bool), 0.0)

    def remember(self, tr: Transition) -> None:
        self.buffer.push(tr)
        self.env_steps += 1

    def maybe_update(self) -> float | None:
        """One gradient step if the buffer is ready; returns the loss."""
        batch = self.buffer.sample(self.batch_size, self.sample_rng)
        if batch is None:
            return None
        loss = update_step(self.net, batch, self.target, self.gamma, self.optimizer)
        self.updates += 1
        if self.updates % self.target_sync_every == 0:
            sync_target(self.net, self.target)
        return loss


# ---------------------------------------------------------------------------
# Tabular baseline
# ---------------------------------------------------------------------------

class TabularQ:
    """Dense Q-table over integer states; same masking rules as the network."""

    def __init__(self, n_states: int, n_actions: int):
        self.q = np.zeros((n_states, n_actions))

    def update(self, s: int, a: int, reward: float, s_next: int, terminal: bool,
               next_mask: np.ndarray, gamma: float, alpha: float) -> float:
        """Standard one-step Q-learning update; returns the TD error."""
        if terminal or not next_mask.any():
            target = reward
        else:
            target = reward + gamma * float(np.max(self.q[s_next][next_mask]))
        td = target - self.q[s, a]
        self.q[s, a] += alpha * td
        return td

    def greedy(self, s: int, valid_mask: np.ndarray) -> int:
        return select_action(self.q[s], valid_mask, 0.0)


# ---------------------------------------------------------------------------
# Checkpoint helpers (arrays + metadata; composed into files by training)
# ---------------------------------------------------------------------------

def agent_arrays(agent: DQNAgent, prefix: str) -> dict[str, np.ndarray]:
    """All array state of an agent, keyed for one shared npz archive."""
    out: dict[str, np.ndarray] = {}
    for i, (W, b) in enumerate(zip(agent.net.weights, agent.net.biases)):
        out[f"{prefix}_w{i}"] = W
        out[f"{prefix}_b{i}"] = b
        out[f"{prefix}_mw{i}"] = agent.optimizer.m_w[i]
        out[f"{prefix}_vw{i}"] = agent.optimizer.v_w[i]
        out[f"{prefix}_mb{i}"] = agent.optimizer.m_b[i]
        out[f"{prefix}_vb{i}"] = agent.optimizer.v_b[i]
    for i, (W, b) in enumerate(zip(agent.target.weights, agent.target.biases)):
        out[f"{prefix}_tw{i}"] = W
        out[f"{prefix}_tb{i}"] = b
    items = agent.buffer.snapshot()
    if items:
        out[f"{prefix}_buf_obs"] = np.stack([t.obs for t in items])
        out[f"{prefix}_buf_action"] = np.array([t.action for t in items], dtype=np.int64)
        out[f"{prefix}_buf_reward"] = np.array([t.reward for t in items])
        out[f"{prefix}_buf_next_obs"] = np.stack([t.next_obs for t in items])
        out[f"{prefix}_buf_terminal"] = np.array([t.terminal for t in items], dtype=bool)
        out[f"{prefix}_buf_next_mask"] = np.stack([t.next_mask for t in items])
    return out


def agent_meta(agent: DQNAgent) -> dict:
    """JSON-ready scalar state of an agent."""
    return {
        "dims": list(agent.net.dims),
        "lr": agent.optimizer.lr,
        "beta1": agent.optimizer.beta1,
        "beta2": agent.optimizer.beta2,
        "adam_eps": agent.optimizer.eps,
        "adam_t": agent.optimizer.t,
        "gamma": agent.gamma,
        "batch_size": agent.batch_size,
        "target_sync_every": agent.target_sync_every,
        "buffer_capacity": agent.buffer.capacity,
        "buffer_ptr": agent.buffer._ptr,
        "schedule": {
            "start": agent.schedule.start,
            "end": agent.schedule.end,
            "decay_steps": agent.schedule.decay_steps,
        },
        "env_steps": agent.env_steps,
        "updates": agent.updates,
        "explore_rng": agent.explore_rng.bit_generator.state,
        "sample_rng": agent.sample_rng.bit_generator.state,
    }


def restore_agent(meta: dict, arrays, prefix: str) -> DQNAgent:
    """Rebuild an agent from ``agent_meta``/``agent_arrays`` output."""
    try:
        dims = tuple(meta["dims"])
        schedule = ExplorationSchedule(**meta["schedule"])
        agent = DQNAgent(
            n_actions=dims[-1], obs_dim=dims[0], hidden=tuple(dims[1:-1]),
            lr=meta["lr"], gamma=meta["gamma"],
            buffer_capacity=meta["buffer_capacity"],
            batch_size=meta["batch_size"],
            target_sync_every=meta["target_sync_every"], schedule=schedule,
            init_rng=np.random.default_rng(0),
        )
        for i in range(len(agent.net.weights)):
            agent.net.weights[i] = np.array(arrays[f"{prefix}_w{i}"])
            agent.net.biases[i] = np.array(arrays[f"{prefix}_b{i}"])
            agent.target.weights[i] = np.array(arrays[f"{prefix}_tw{i}"])
            agent.target.biases[i] = np.array(arrays[f"{prefix}_tb{i}"])
            agent.optimizer.m_w[i] = np.array(arrays[f"{prefix}_mw{i}"])
            agent.optimizer.v_w[i] = np.array(arrays[f"{prefix}_vw{i}"])
            agent.optimizer.m_b[i] = np.array(arrays[f"{prefix}_mb{i}"])
            agent.optimizer.v_b[i] = np.array(arrays[f"{prefix}_vb{i}"])
        agent.optimizer.net = agent.net
        agent.optimizer.beta1 = meta["beta1"]
        agent.optimizer.beta2 = meta["beta2"]
        agent.optimizer.eps = meta["adam_eps"]
        agent.optimizer.t = meta["adam_t"]
        if f"{prefix}_buf_obs" in arrays:
            # materialize each column once: indexing the archive itself
            # re-extracts the whole array on every access
            obs = np.array(arrays[f"{prefix}_buf_obs"])
            action = np.array(arrays[f"{prefix}_buf_action"])
            reward = np.array(arrays[f"{prefix}_buf_reward"])
            next_obs = np.array(arrays[f"{prefix}_buf_next_obs"])
            terminal = np.array(arrays[f"{prefix}_buf_terminal"])
            next_mask = np.array(arrays[f"{prefix}_buf_next_mask"])
            for i in range(obs.shape[0]):
                agent.buffer.push(Transition(
                    obs=obs[i].copy(),
                    action=int(action[i]),
                    reward=float(reward[i]),
                    next_obs=next_obs[i].copy(),
                    terminal=bool(terminal[i]),
                    next_mask=next_mask[i].copy(),
                ))
        agent.buffer._ptr = meta["buffer_ptr"]
        agent.env_steps = meta["env_steps"]
        agent.updates = meta["updates"]
        agent.explore_rng.bit_generator.state = meta["explore_rng"]
        agent.sample_rng.bit_generator.state = meta["sample_rng"]
        return agent
    except KeyError as exc:
        raise CheckpointError(f"checkpoint is missing entry {exc}") from exc

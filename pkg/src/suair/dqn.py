"""Dueling Double-DQN student: replay buffer, epsilon-greedy, target network.

The TD target selects the next action with the online network and evaluates
it with the lagged target copy. Regression targets for actions that were not
taken equal the current predictions, so the gradient flows only through the
taken action.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import Minibatch, Network, copy_params


class ReplayUnderfull(RuntimeError):
    """Sampling requested before the buffer reached its training gate."""


@dataclass
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool

    def __post_init__(self):
        if not np.isfinite(self.reward):
            raise ValueError("reward must be finite")
        if self.action < 0:
            raise ValueError("action must be a non-negative index")


class ReplayBuffer:
    """FIFO ring of transitions with a minimum-size training gate.

    Backed by a plain list ring so sampling stays O(1) per index at any
    capacity.
    """

    def __init__(self, capacity: int, min_size: int):
        if capacity < 1 or min_size < 1 or min_size > capacity:
            raise ValueError("need 1 <= min_size <= capacity")
        self.capacity = capacity
        self.min_size = min_size
        self._storage: list[Transition] = []
        self._write = 0  # next slot to overwrite once full

    def __len__(self) -> int:
        return len(self._storage)

    @property
    def ready(self) -> bool:
        return len(self._storage) >= self.min_size

    def append(self, transition: Transition) -> None:
        if len(self._storage) < self.capacity:
            self._storage.append(transition)
        else:
            self._storage[self._write] = transition
            self._write = (self._write + 1) % self.capacity

    def oldest(self) -> Transition:
        if not self._storage:
            raise ReplayUnderfull("buffer is empty")
        if len(self._storage) < self.capacity:
            return self._storage[0]
        return self._storage[self._write]

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        if not self.ready:
            raise ReplayUnderfull(
                f"buffer has {len(self)} < min_size {self.min_size} transitions")
        idx = rng.integers(0, len(self._storage), size=batch_size)
        return [self._storage[i] for i in idx]


def linear_epsilon(step: int, eps_init: float, eps_final: float,
                   decay_steps: int) -> float:
    """Linear decay from eps_init to eps_final over decay_steps, then hold."""
    if step >= decay_steps:
        return eps_final
    frac = step / decay_steps
    return eps_init + (eps_final - eps_init) * frac


class StudentAgent:
    """Learning agent; owns the online/target pair and the replay buffer."""

    def __init__(self, obs_dim: int, n_actions: int,
                 hidden: tuple[int, ...] = (64, 64),
                 gamma: float = 0.99, learning_rate: float = 1e-3,
                 batch_size: int = 32,
                 replay_capacity: int = 50_000, replay_min: int = 1_000,
                 target_sync_period: int = 500,
                 eps_init: float = 1.0, eps_final: float = 0.01,
                 eps_decay_steps: int = 20_000, seed: int = 0):
        if not 0.0 <= gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        self.n_actions = n_actions
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.eps_init, self.eps_final = eps_init, eps_final
        self.eps_decay_steps = eps_decay_steps
        self.target_sync_period = target_sync_period
        self.online_net = Network(obs_dim, list(hidden), n_actions,
                                  head="dueling", seed=seed)
        self.target_net = Network(obs_dim, list(hidden), n_actions,
                                  head="dueling", seed=seed + 1)
        copy_params(self.online_net, self.target_net)
        self.replay = ReplayBuffer(replay_capacity, replay_min)
        self.train_count = 0

    def epsilon(self, step: int) -> float:
        return linear_epsilon(step, self.eps_init, self.eps_final,
                              self.eps_decay_steps)

    def act(self, state: np.ndarray, step: int, rng: np.random.Generator) -> int:
        """Epsilon-greedy behavior action for training-time steps."""
        if rng.random() < self.epsilon(step):
            return int(rng.integers(self.n_actions))
        return self.greedy(state)

    def greedy(self, state: np.ndarray) -> int:
        """Deterministic argmax action; ties break to the lowest index."""
        return int(np.argmax(self.online_net.forward(state)))

    def dqn_update(self, rng: np.random.Generator) -> tuple[float, Minibatch]:
        """One Double-DQN step on a uniform sample; returns the exact
        minibatch so a shadowing network can train on identical data."""
        sample = self.replay.sample(self.batch_size, rng)
        states = np.stack([t.state for t in sample])
        next_states = np.stack([t.next_state for t in sample])
        rewards = np.array([t.reward for t in sample])
        actions = np.array([t.action for t in sample])
        not_done = np.array([0.0 if t.done else 1.0 for t in sample])

        q_now = self.online_net.forward_batch(states)
        next_online = self.online_net.forward_batch(next_states)
        next_actions = np.argmax(next_online, axis=1)
        next_target = self.target_net.forward_batch(next_states)
        rows = np.arange(len(sample))
        y = rewards + self.gamma * not_done * next_target[rows, next_actions]

        targets = q_now.copy()
        targets[rows, actions] = y
        batch = Minibatch(states, targets)
        loss = self.online_net.train_step(batch, "mse", self.learning_rate)
        self.train_count += 1
        if self.train_count % self.target_sync_period == 0:
            copy_params(self.online_net, self.target_net)
        return loss, batch

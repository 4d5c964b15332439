"""Model of the teacher: behavior cloning over collected advice.

The model is a softmax classifier trained on (state, advised action) pairs
with cross-entropy. Its own MC-dropout uncertainty gates advice reuse; the
reuse threshold is a high percentile of model uncertainty over the states
the model was fit on.
"""

from __future__ import annotations

import numpy as np

from .network import Minibatch, Network
from .uncertainty import mean_action_variance, nearest_rank

C2_SUBSAMPLE_CAP = 2_000
_C2_SUBSAMPLE_SEED = 977

IMITATION_LEARNING_RATE = 1e-4
IMITATION_BATCH_SIZE = 32


class UntrainedModelError(RuntimeError):
    """The model was consulted before its first training round."""


class AdviceBuffer:
    """Append-only store of (state, teacher action) pairs."""

    def __init__(self, n_actions: int):
        self.n_actions = n_actions
        self._states: list[np.ndarray] = []
        self._actions: list[int] = []

    def __len__(self) -> int:
        return len(self._states)

    def append(self, state: np.ndarray, action: int) -> None:
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action {action} out of range")
        self._states.append(np.asarray(state, dtype=float))
        self._actions.append(int(action))

    def states(self) -> np.ndarray:
        return np.stack(self._states)

    def actions(self) -> np.ndarray:
        return np.asarray(self._actions)

    def sample_batch(self, batch_size: int, rng: np.random.Generator) -> Minibatch:
        idx = rng.integers(0, len(self._states), size=batch_size)
        states = np.stack([self._states[i] for i in idx])
        targets = np.eye(self.n_actions)[[self._actions[i] for i in idx]]
        return Minibatch(states, targets)

    def rows(self):
        return zip(self._states, self._actions)


class TeacherModel:
    """Softmax imitation net plus its training/threshold bookkeeping."""

    def __init__(self, net: Network, n_passes: int = 100,
                 learning_rate: float = IMITATION_LEARNING_RATE,
                 batch_size: int = IMITATION_BATCH_SIZE):
        self.net = net
        self.n_passes = n_passes
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.trained = False
        self.n_last = 0
        self.t_last = 0
        self.c2: float | None = None

    @classmethod
    def create(cls, obs_dim: int, n_actions: int,
               hidden: tuple[int, ...] = (64, 64), dropout: float = 0.35,
               n_passes: int = 100, seed: int = 0, **kw) -> "TeacherModel":
        net = Network(obs_dim, list(hidden), n_actions, head="softmax",
                      hidden_dropout=dropout, seed=seed)
        return cls(net, n_passes=n_passes, **kw)


def model_action(model: TeacherModel, state: np.ndarray) -> int:
    """Deterministic argmax over the softmax output; low index wins ties."""
    if not model.trained:
        raise UntrainedModelError("model_action before first training")
    return int(np.argmax(model.net.forward(state)))


def model_uncertainty(model: TeacherModel, state: np.ndarray,
                      rng: np.random.Generator | None = None) -> float:
    """Mean per-action variance of class probabilities across MC passes."""
    if not model.trained:
        raise UntrainedModelError("model_uncertainty before first training")
    passes = model.net.mc_forward(state, model.n_passes, rng=rng)
    return mean_action_variance(passes)


def compute_c2(model: TeacherModel, advice: AdviceBuffer, p2: float,
               rng: np.random.Generator | None = None) -> float:
    """Reuse threshold: nearest-rank p2 percentile of model uncertainty over
    the advice states (uniform fixed-seed subsample beyond the cap)."""
    if not model.trained:
        raise UntrainedModelError("compute_c2 before first training")
    if len(advice) == 0:
        raise ValueError("compute_c2 needs a nonempty advice buffer")
    states = advice.states()
    if len(states) > C2_SUBSAMPLE_CAP:
        picker = np.random.default_rng(_C2_SUBSAMPLE_SEED)
        idx = picker.choice(len(states), size=C2_SUBSAMPLE_CAP, replace=False)
        states = states[idx]
    values = [model_uncertainty(model, s, rng=rng) for s in states]
    return nearest_rank(values, p2)


def training_due(model: TeacherModel, advice_size: int, t: int,
                 n_min: int, t_min: int) -> bool:
    """Retrain trigger: a full quota of fresh advice, or half a quota that
    has been sitting for at least t_min steps."""
    gained = advice_size - model.n_last
    return gained >= n_min or (gained >= n_min / 2 and t - model.t_last >= t_min)


def maybe_train(model: TeacherModel, advice: AdviceBuffer, t: int, cfg,
                rng: np.random.Generator | None = None) -> bool:
    """Train for k_init (first time) or k_periodic iterations when due;
    recomputes the reuse threshold and advances the bookkeeping."""
    if not training_due(model, len(advice), t, cfg.n_min, cfg.t_min):
        return False
    iterations = cfg.k_init if not model.trained else cfg.k_periodic
    sample_rng = rng if rng is not None else model.net.rng
    # stack once per round; per-iteration batches are index slices
    states = advice.states()
    onehot = np.eye(advice.n_actions)[advice.actions()]
    for _ in range(iterations):
        idx = sample_rng.integers(0, len(states), size=model.batch_size)
        batch = Minibatch(states[idx], onehot[idx])
        model.net.train_step(batch, "cross_entropy", model.learning_rate, rng=rng)
    model.trained = True
    model.c2 = compute_c2(model, advice, cfg.p2, rng=rng)
    model.n_last = len(advice)
    model.t_last = t
    return True

"""Student epistemic uncertainty via a dropout twin of the Q-network.

The twin trains on the exact minibatches and targets the student just used,
so its spread over stochastic forward passes tracks what the student has and
has not absorbed. Per-state uncertainty is the mean over actions of the
population variance of the pass matrix columns; asking thresholds come from
a percentile over a sliding window of recent values.
"""

from __future__ import annotations

from fractions import Fraction
import math

import numpy as np

from .network import Minibatch, Network


def nearest_rank_index(p: float, n: int) -> int:
    """0-based nearest-rank index into an ascending sort of n values.

    Rank = ceil(p/100 * n), computed exactly over the decimal value of p so
    results never depend on binary float rounding; p = 100 selects the max.
    """
    if n < 1:
        raise ValueError("need at least one value")
    frac = Fraction(str(p))
    if not 0 < frac <= 100:
        raise ValueError("percentile must be in (0, 100]")
    rank = math.ceil(frac * n / 100)
    return min(max(rank, 1), n) - 1


def nearest_rank(values, p: float) -> float:
    arr = np.asarray(values, dtype=float)
    idx = nearest_rank_index(p, arr.size)
    return float(np.partition(arr, idx)[idx])


def mean_action_variance(passes: np.ndarray) -> float:
    """Mean over actions of the per-column population variance.

    Identical rows short-circuit to exactly 0.0: with dropout disabled every
    pass is the same vector and the result must not pick up summation noise.
    """
    passes = np.asarray(passes, dtype=float)
    if passes.ndim != 2 or passes.shape[0] < 1:
        raise ValueError("pass matrix must be 2-D with at least one row")
    if (passes == passes[0]).all():
        return 0.0
    return float(passes.var(axis=0, ddof=0).mean())


class SecondaryNet:
    """Dropout twin mirroring the student net's input/output dimensions."""

    def __init__(self, net: Network, n_passes: int = 100):
        if n_passes < 1:
            raise ValueError("n_passes must be positive")
        if all(l.dropout_rate == 0.0 for l in net.layers):
            raise ValueError("secondary network needs dropout on some layer")
        self.net = net
        self.n_passes = n_passes
        self.trained_once = False

    @classmethod
    def for_student(cls, obs_dim: int, n_actions: int,
                    hidden: tuple[int, ...] = (64, 64), dropout: float = 0.2,
                    n_passes: int = 100, seed: int = 0) -> "SecondaryNet":
        net = Network(obs_dim, list(hidden), n_actions, head="linear",
                      hidden_dropout=dropout, seed=seed)
        return cls(net, n_passes=n_passes)


def student_uncertainty(sec: SecondaryNet, state: np.ndarray,
                        rng: np.random.Generator | None = None) -> float:
    """Mean per-action variance over n_passes stochastic forwards."""
    passes = sec.net.mc_forward(state, sec.n_passes, rng=rng)
    return mean_action_variance(passes)


def update_secondary(sec: SecondaryNet, batch: Minibatch, learning_rate: float,
                     rng: np.random.Generator | None = None) -> float:
    """Mirror one student update onto the twin; marks it usable."""
    loss = sec.net.train_step(batch, "mse", learning_rate, rng=rng)
    sec.trained_once = True
    return loss


class UncertaintyBuffer:
    """Bounded FIFO window of recent uncertainty values."""

    def __init__(self, min_window: int = 200, max_window: int = 10_000):
        if not 1 <= min_window <= max_window:
            raise ValueError("need 1 <= min_window <= max_window")
        self.min_window = min_window
        self.max_window = max_window
        self._ring = np.zeros(max_window)
        self._size = 0
        self._head = 0  # next write position once the ring is full

    def __len__(self) -> int:
        return self._size

    @property
    def full_enough(self) -> bool:
        return self._size >= self.min_window

    def append(self, value: float) -> None:
        value = float(value)
        if not np.isfinite(value) or value < 0.0:
            raise ValueError("uncertainty values must be finite and non-negative")
        if self._size < self.max_window:
            self._ring[self._size] = value
            self._size += 1
        else:
            self._ring[self._head] = value
            self._head = (self._head + 1) % self.max_window

    def values(self) -> np.ndarray:
        return self._ring[: self._size].copy()

    def threshold(self, p: float) -> float:
        """Nearest-rank percentile of the current window."""
        if self._size == 0:
            raise ValueError("threshold of an empty window")
        return nearest_rank(self._ring[: self._size], p)


def record_and_threshold(buf: UncertaintyBuffer, u_s: float,
                         p1: float) -> float | None:
    """Append u_s and return the asking threshold, or None while the window
    is still below its minimum size (early advising: treat as always ask)."""
    buf.append(u_s)
    if not buf.full_enough:
        return None
    return buf.threshold(p1)

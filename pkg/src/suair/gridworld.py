"""Deterministic gridworld environments and an exact Q-table solver.

Episodes walk a rectangular grid with four moves; bumping a wall or the
border leaves the agent in place. Observations are a one-hot over cells,
optionally augmented with normalized (x, y). The solver doubles as the
fixed competent teacher and as ground truth in tests.

Actions are indexed up=0, down=1, left=2, right=3.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .network import Network

N_ACTIONS = 4
ACTION_NAMES = ("up", "down", "left", "right")
_DELTAS = ((0, -1), (0, 1), (-1, 0), (1, 0))


class ProtocolError(RuntimeError):
    """Episode protocol misuse, e.g. stepping a finished episode."""


@dataclass
class GridSpec:
    width: int
    height: int
    walls: frozenset = frozenset()
    start: tuple[int, int] = (0, 0)
    goal: tuple[int, int] = (0, 0)
    step_reward: float = -0.01
    goal_reward: float = 1.0
    max_steps: int = 100
    slip_prob: float = 0.0
    xy_features: bool = False

    def __post_init__(self):
        self.walls = frozenset(tuple(w) for w in self.walls)
        self.start = tuple(self.start)
        self.goal = tuple(self.goal)
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must be at least 1x1")
        if self.start == self.goal:
            raise ValueError("start and goal must differ")
        for name, cell in (("start", self.start), ("goal", self.goal)):
            if not self._in_bounds(cell):
                raise ValueError(f"{name} {cell} out of bounds")
            if cell in self.walls:
                raise ValueError(f"{name} {cell} is a wall")
        if not 0.0 <= self.slip_prob < 1.0:
            raise ValueError("slip_prob must be in [0, 1)")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if self.goal not in self._reachable_from(self.start):
            raise ValueError("goal is not reachable from start")

    def _in_bounds(self, cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def _reachable_from(self, origin) -> set:
        seen = {origin}
        frontier = deque([origin])
        while frontier:
            cell = frontier.popleft()
            for action in range(N_ACTIONS):
                nxt = self.next_cell(cell, action)
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return seen

    # ------------------------------------------------------------- geometry

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    @property
    def obs_dim(self) -> int:
        return self.n_cells + (2 if self.xy_features else 0)

    def cell_index(self, cell) -> int:
        x, y = cell
        return y * self.width + x

    def next_cell(self, cell, action: int):
        """Destination of a move, accounting for walls and borders."""
        dx, dy = _DELTAS[action]
        candidate = (cell[0] + dx, cell[1] + dy)
        if not self._in_bounds(candidate) or candidate in self.walls:
            return cell
        return candidate

    def observe(self, cell) -> np.ndarray:
        features = np.zeros(self.obs_dim)
        features[self.cell_index(cell)] = 1.0
        if self.xy_features:
            features[self.n_cells] = cell[0] / max(self.width - 1, 1)
            features[self.n_cells + 1] = cell[1] / max(self.height - 1, 1)
        return features

    def cell_of(self, observation: np.ndarray) -> tuple[int, int]:
        idx = int(np.argmax(observation[: self.n_cells]))
        return idx % self.width, idx // self.width


def parse_map(text: str) -> dict:
    """Parse the plain-text map format: '#' wall, 'S' start, 'G' goal, '.' empty.

    Returns keyword arguments for GridSpec (geometry only).
    """
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise ValueError("empty map")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("map rows must have equal length")
    walls, start, goal = set(), None, None
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch == "#":
                walls.add((x, y))
            elif ch == "S":
                if start is not None:
                    raise ValueError("multiple start cells")
                start = (x, y)
            elif ch == "G":
                if goal is not None:
                    raise ValueError("multiple goal cells")
                goal = (x, y)
            elif ch != ".":
                raise ValueError(f"unknown map character {ch!r}")
    if start is None or goal is None:
        raise ValueError("map needs exactly one S and one G")
    return dict(width=width, height=len(rows), walls=frozenset(walls),
                start=start, goal=goal)


class GridWorld:
    """Episodic wrapper around a GridSpec."""

    def __init__(self, spec: GridSpec, seed: int | None = None):
        self.spec = spec
        self._rng = np.random.default_rng(seed)
        self._cell = spec.start
        self._steps = 0
        self._done = True  # must reset before stepping

    @property
    def n_actions(self) -> int:
        return N_ACTIONS

    @property
    def obs_dim(self) -> int:
        return self.spec.obs_dim

    @property
    def done(self) -> bool:
        return self._done

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._cell = self.spec.start
        self._steps = 0
        self._done = False
        return self.spec.observe(self._cell)

    def step(self, action: int):
        """Apply a move; returns (observation, reward, done)."""
        if self._done:
            raise ProtocolError("step() on a finished episode; call reset()")
        if not 0 <= action < N_ACTIONS:
            raise ValueError(f"action must be in [0, {N_ACTIONS})")
        if self.spec.slip_prob > 0.0 and self._rng.random() < self.spec.slip_prob:
            action = int(self._rng.integers(N_ACTIONS))
        self._cell = self.spec.next_cell(self._cell, action)
        self._steps += 1
        reward = self.spec.step_reward
        if self._cell == self.spec.goal:
            reward += self.spec.goal_reward
            self._done = True
        elif self._steps >= self.spec.max_steps:
            self._done = True
        return self.spec.observe(self._cell), reward, self._done


# ------------------------------------------------------------------- solver


def value_iteration(spec: GridSpec, gamma: float, tol: float = 1e-10) -> np.ndarray:
    """Bellman-optimality sweeps until the max change drops below tol.

    Returns a (n_cells, 4) Q-table; the goal is absorbing with value 0,
    wall rows stay 0. Exact up to tol for slip_prob = 0 and equally valid
    in expectation for slipping grids.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = spec.n_cells
    next_idx = np.zeros((n, N_ACTIONS), dtype=int)
    reward = np.zeros((n, N_ACTIONS))
    active = np.ones(n, dtype=bool)
    for y in range(spec.height):
        for x in range(spec.width):
            s = spec.cell_index((x, y))
            if (x, y) in spec.walls or (x, y) == spec.goal:
                active[s] = False
                next_idx[s] = s
                continue
            for a in range(N_ACTIONS):
                nxt = spec.next_cell((x, y), a)
                next_idx[s, a] = spec.cell_index(nxt)
                reward[s, a] = spec.step_reward + (
                    spec.goal_reward if nxt == spec.goal else 0.0)

    slip = spec.slip_prob
    q = np.zeros((n, N_ACTIONS))
    while True:
        v = np.where(active, q.max(axis=1), 0.0)
        backup = reward + gamma * v[next_idx]           # (n, 4) per effective move
        if slip > 0.0:
            expected = (1.0 - slip) * backup + slip * backup.mean(axis=1, keepdims=True)
        else:
            expected = backup
        new_q = np.where(active[:, None], expected, 0.0)
        delta = np.abs(new_q - q).max()
        q = new_q
        if delta < tol:
            return q


def optimal_return(spec: GridSpec, gamma: float, tol: float = 1e-10) -> float:
    """Discounted value of the start state under the solved Q-table."""
    q = value_iteration(spec, gamma, tol)
    return float(q[spec.cell_index(spec.start)].max())


# ------------------------------------------------------------------ teacher


class TeacherPolicy:
    """Fixed deterministic advice source: a solved Q-table or a checkpoint net."""

    def __init__(self, mode: str, spec: GridSpec,
                 q_table: np.ndarray | None = None,
                 net: Network | None = None):
        if mode not in ("oracle_greedy", "checkpoint"):
            raise ValueError(f"unknown teacher mode {mode!r}")
        if mode == "oracle_greedy" and q_table is None:
            raise ValueError("oracle_greedy teacher needs a q_table")
        if mode == "checkpoint" and net is None:
            raise ValueError("checkpoint teacher needs a network")
        self.mode = mode
        self.spec = spec
        self.q_table = q_table
        self.net = net

    @classmethod
    def oracle(cls, spec: GridSpec, gamma: float) -> "TeacherPolicy":
        return cls("oracle_greedy", spec, q_table=value_iteration(spec, gamma))

    @classmethod
    def from_network(cls, spec: GridSpec, net: Network) -> "TeacherPolicy":
        return cls("checkpoint", spec, net=net)

    def action(self, observation: np.ndarray) -> int:
        if self.mode == "oracle_greedy":
            cell = self.spec.cell_of(observation)
            return int(np.argmax(self.q_table[self.spec.cell_index(cell)]))
        return int(np.argmax(self.net.forward(observation)))


def teacher_action(teacher: TeacherPolicy, observation: np.ndarray) -> int:
    return teacher.action(observation)


def load_network_teacher(spec: GridSpec, path: str) -> TeacherPolicy:
    """Teacher backed by a parameter snapshot on disk."""
    from .network import load_network

    return TeacherPolicy.from_network(spec, load_network(path))


def q_table_as_network(spec: GridSpec, q_table: np.ndarray) -> Network:
    """Encode a Q-table as a single linear layer over the one-hot features.

    forward(one_hot(cell)) reproduces the table row exactly, which lets the
    oracle teacher travel through the regular checkpoint format.
    """
    from .network import DenseLayer

    w = np.zeros((N_ACTIONS, spec.obs_dim))
    w[:, : spec.n_cells] = q_table.T
    layer = DenseLayer(w=w, b=np.zeros(N_ACTIONS), activation="linear")
    return Network.from_parts([layer], head=None)


# ------------------------------------------------------------------ presets

_MAZE7_MAP = """\
S......
######.
.......
.######
.......
######.
......G
"""


def _preset_open5() -> GridSpec:
    return GridSpec(width=5, height=5, start=(0, 0), goal=(4, 4), max_steps=100)


def _preset_corridor9() -> GridSpec:
    return GridSpec(width=9, height=1, start=(0, 0), goal=(8, 0), max_steps=50)


def _preset_maze7() -> GridSpec:
    return GridSpec(max_steps=150, **parse_map(_MAZE7_MAP))


def _preset_slip5() -> GridSpec:
    return replace(_preset_open5(), slip_prob=0.1)


PRESETS = {
    "open5": _preset_open5,
    "corridor9": _preset_corridor9,
    "maze7": _preset_maze7,
    "slip5": _preset_slip5,
}


def make_spec(preset: str, **overrides) -> GridSpec:
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; have {sorted(PRESETS)}")
    spec = PRESETS[preset]()
    return replace(spec, **overrides) if overrides else spec

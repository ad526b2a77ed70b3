"""Grid worlds: the discrete plus-reward grid and the continuous Gaussian-mixture plane.

Discrete states carry the whole path walked so far. Because a path has a
single parent (drop its last cell), the state graph is a tree and the
backward policy is trivially 1. The reward of a finished path is the value
of its final cell.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import EnvironmentContractError, UsageError

LOW, MID, HIGH = 0.1, 40.0, 200.0
LEVELS = (LOW, MID, HIGH)
DEFAULT_CENTRES = ((2, 2), (2, 7), (7, 2), (7, 7))
SHIFTS = ("none", "up", "down", "left", "right")
_SHIFT_DELTA = {"none": (0, 0), "up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}

LEFT, RIGHT, UP, DOWN, STOP = range(5)
ACTION_NAMES = ("Left", "Right", "Up", "Down", "Stop")
_MOVES = ((0, -1), (0, 1), (-1, 0), (1, 0))


@dataclass(frozen=True)
class DiscreteRewardGrid:
    cells: np.ndarray = field(compare=False)
    centres: tuple
    shifts: tuple

    @property
    def shape(self):
        return self.cells.shape

    def to_json_obj(self):
        return {"cells": self.cells.tolist(), "centres": [list(c) for c in self.centres],
                "shifts": list(self.shifts)}

    @classmethod
    def from_json_obj(cls, doc):
        return cls(np.array(doc["cells"], dtype=np.float64),
                   tuple(tuple(c) for c in doc["centres"]), tuple(doc["shifts"]))


def _plus_fits(centre, shape):
    r, c = centre
    return 1 <= r <= shape[0] - 2 and 1 <= c <= shape[1] - 2


def build_reward_grid(shifts, centres=DEFAULT_CENTRES, size=10):
    """Paint the pluses after applying ``shifts``; shifts that leave the board become 'none'."""
    shape = (size, size)
    cells = np.full(shape, LOW)
    applied = []
    for (r, c), s in zip(centres, shifts):
        dr, dc = _SHIFT_DELTA[s]
        if not _plus_fits((r + dr, c + dc), shape):
            s, dr, dc = "none", 0, 0
        applied.append(s)
        r, c = r + dr, c + dc
        for ar, ac in _MOVES:
            cells[r + ar, c + ac] = max(cells[r + ar, c + ac], MID)
        cells[r, c] = HIGH
    return DiscreteRewardGrid(cells, tuple(tuple(x) for x in centres), tuple(applied))


def sample_discrete_reward(p_shift, rng, centres=DEFAULT_CENTRES, size=10):
    if not 0.0 <= p_shift <= 1.0:
        raise UsageError(f"p_shift must be in [0, 1], got {p_shift}")
    shifts = []
    for _ in centres:
        if rng.random() < p_shift:
            shifts.append(SHIFTS[1 + int(rng.integers(4))])
        else:
            shifts.append("none")
    return build_reward_grid(shifts, centres, size)


def all_reward_grids(centres=DEFAULT_CENTRES, size=10):
    """Every grid in the support, keyed by its shift tuple (5^k entries)."""
    return {s: build_reward_grid(s, centres, size)
            for s in itertools.product(SHIFTS, repeat=len(centres))}


def one_hot_grid(cells):
    """(3, H, W) one-hot over the three reward levels, flattened to 3*H*W."""
    cells = np.asarray(cells)
    level = np.argmin(np.abs(cells[None] - np.array(LEVELS)[:, None, None]), axis=0)
    return (level[None] == np.arange(3)[:, None, None]).astype(np.float64).ravel()


@dataclass(frozen=True)
class GridState:
    path: tuple  # cells visited so far, start first
    done: bool = False

    @property
    def position(self):
        return self.path[-1]

    @property
    def steps(self):
        return len(self.path) - 1


class DiscreteGridEnv:
    """Walk a reward grid without revisiting cells, stopping on a mid/high cell or when stuck.

    A path that cannot move (boxed in, or at ``max_steps`` moves) may always
    stop, whatever its final reward.
    """

    n_actions = 5

    def __init__(self, cells, max_steps=20, start=None):
        self.cells = np.asarray(cells, dtype=np.float64)
        self.height, self.width = self.cells.shape
        self.max_steps = int(max_steps)
        self.start = None if start is None else tuple(int(v) for v in start)
        self._log_cells = np.log(self.cells)
        self._stop_ok = self.cells > self.cells.min()
        self._index = {(r, c): r * self.width + c for r in range(self.height) for c in range(self.width)}
        self._rows = {}  # path -> encoded row

    @property
    def n_cells(self):
        return self.height * self.width

    @property
    def feature_dim(self):
        return 2 * self.n_cells + 1

    def initial_state(self, rng=None):
        if self.start is not None:
            return GridState((self.start,))
        if rng is None:
            raise UsageError("a random-start grid needs an rng")
        k = int(rng.integers(self.n_cells))
        return GridState(((k // self.width, k % self.width),))

    def move_mask(self, state):
        if state.done or len(state.path) > self.max_steps:
            return np.zeros(4, dtype=bool)
        r, c = state.path[-1]
        path = state.path
        h, w = self.height, self.width
        return np.array([0 <= r + dr < h and 0 <= c + dc < w and (r + dr, c + dc) not in path
                         for dr, dc in _MOVES])

    def valid_actions(self, state):
        mask = np.zeros(5, dtype=bool)
        if state.done:
            return mask
        moves = self.move_mask(state)
        mask[:4] = moves
        mask[STOP] = bool(self._stop_ok[state.path[-1]]) or not moves.any()
        return mask

    def step(self, state, action):
        action = int(action)
        if not 0 <= action <= STOP or state.done:
            raise EnvironmentContractError(f"action {action} is invalid at {state.position}")
        if action == STOP:
            if not self.valid_actions(state)[STOP]:
                raise EnvironmentContractError(f"Stop is invalid at {state.position}")
            return GridState(state.path, True)
        dr, dc = _MOVES[action]
        r, c = state.position
        nxt = (r + dr, c + dc)
        if (state.steps >= self.max_steps or not (0 <= nxt[0] < self.height and 0 <= nxt[1] < self.width)
                or nxt in state.path):
            raise EnvironmentContractError(f"action {ACTION_NAMES[action]} is invalid at {state.position}")
        return GridState(state.path + (nxt,))

    def is_terminal(self, state):
        return state.done

    def log_reward(self, state):
        return float(self._log_cells[state.position])

    def parents(self, state):
        if state.done:
            return [(GridState(state.path), STOP)]
        if len(state.path) == 1:
            return []
        (pr, pc), (r, c) = state.path[-2], state.path[-1]
        return [(GridState(state.path[:-1]), _MOVES.index((r - pr, c - pc)))]

    def log_backward(self, parent, action, state):
        return 0.0

    def terminal_key(self, state):
        return state.position

    def encode(self, states):
        """One-hot position, visited bitmap and step fraction per state."""
        cache = self._rows
        if len(cache) > 200_000:
            cache.clear()
        out = np.empty((len(states), self.feature_dim))
        for i, s in enumerate(states):
            row = cache.get(s.path)
            if row is None:
                row = np.zeros(self.feature_dim)
                idx = self._index
                row[idx[s.path[-1]]] = 1.0
                row[[self.n_cells + idx[cell] for cell in s.path]] = 1.0
                row[-1] = (len(s.path) - 1) / self.max_steps
                cache[s.path] = row
            out[i] = row
        return out

    def path_actions(self, cells):
        """Move actions that walk ``cells`` in order (the cell list of a focal path)."""
        acts = []
        for (r0, c0), (r1, c1) in zip(cells, cells[1:]):
            try:
                acts.append(_MOVES.index((r1 - r0, c1 - c0)))
            except ValueError:
                raise UsageError(f"cells {(r0, c0)} and {(r1, c1)} are not adjacent") from None
        return acts


# -- continuous plane --------------------------------------------------------

MIXTURE_VARIANCE = 0.3
MEAN_CENTRES = ((-1.0, -1.0), (1.0, 1.0))
MEAN_VARIANCE = 0.1
REWARD_FLOOR = 1e-12


@dataclass(frozen=True)
class ContinuousRewardSpec:
    means: tuple  # ((x1, y1), (x2, y2))
    variance: float = MIXTURE_VARIANCE

    def __post_init__(self):
        if not self.variance > 0:
            raise UsageError("mixture variance must be positive")

    @property
    def latent(self):
        return np.array(self.means, dtype=np.float64).ravel()

    @classmethod
    def from_latent(cls, mu, variance=MIXTURE_VARIANCE):
        mu = [float(v) for v in mu]
        return cls(((mu[0], mu[1]), (mu[2], mu[3])), variance)


def continuous_reward(spec, omega):
    """Equal-weight isotropic two-Gaussian density at ``omega`` (``(..., 2)``), floored."""
    w = np.asarray(omega, dtype=np.float64)
    var = spec.variance
    dens = 0.0
    for mx, my in spec.means:
        d2 = (w[..., 0] - mx) ** 2 + (w[..., 1] - my) ** 2
        dens = dens + 0.5 * np.exp(-0.5 * d2 / var) / (2.0 * math.pi * var)
    return dens + REWARD_FLOOR


def continuous_log_reward(spec, omega):
    w = np.asarray(omega, dtype=np.float64)
    var = spec.variance
    terms = [
        math.log(0.5 / (2.0 * math.pi * var))
        - 0.5 * ((w[..., 0] - mx) ** 2 + (w[..., 1] - my) ** 2) / var
        for mx, my in spec.means
    ]
    terms.append(np.full(np.shape(terms[0]), math.log(REWARD_FLOOR)))
    return np.logaddexp.reduce(np.stack(terms), axis=0)


def sample_continuous_spec(rng, centres=MEAN_CENTRES, mean_variance=MEAN_VARIANCE,
                           variance=MIXTURE_VARIANCE):
    sd = math.sqrt(mean_variance)
    means = tuple(tuple(float(v) for v in np.asarray(c) + sd * rng.standard_normal(2))
                  for c in centres)
    return ContinuousRewardSpec(means, variance)


@dataclass(frozen=True)
class ContinuousState:
    x: float = 0.0
    y: float = 0.0
    t: int = 0


class ContinuousGridEnv:
    """Five Gaussian moves from the origin; the reward is read at the final position."""

    def __init__(self, spec, n_steps=5):
        self.spec = spec
        self.n_steps = int(n_steps)

    def initial_state(self):
        return ContinuousState()

    def step(self, state, action):
        return continuous_step(state, action, self.n_steps)

    def is_terminal(self, state):
        return state.t == self.n_steps

    def log_reward(self, positions):
        return continuous_log_reward(self.spec, positions)

    def encode(self, xyt):
        """Raw (x, y, t) rows; ``xyt`` is an ``(n, 3)`` array."""
        return np.asarray(xyt, dtype=np.float64)


def continuous_step(state, action, n_steps=5):
    if state.t >= n_steps:
        raise UsageError(f"no moves left: trajectory already took {state.t} steps")
    dx, dy = action
    return ContinuousState(state.x + float(dx), state.y + float(dy), state.t + 1)

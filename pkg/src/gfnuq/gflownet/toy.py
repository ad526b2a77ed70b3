"""A small explicit DAG environment with integer states, for checking losses and samplers."""

from __future__ import annotations

import math

import numpy as np

from ..errors import EnvironmentContractError, UsageError


class ExplicitDagEnv:
    """States are integers; ``children[s]`` lists successors, action = slot in that list.

    Sinks are terminal and carry ``rewards[s]``. The backward policy is a
    fixed table ``backward[(parent, child)]`` (uniform over parents if omitted).
    """

    def __init__(self, children, rewards, backward=None, initial=0):
        self.children = {int(k): [int(c) for c in v] for k, v in children.items()}
        self.states = sorted(set(self.children) | {c for v in self.children.values() for c in v})
        self.rewards = {int(k): float(v) for k, v in rewards.items()}
        self.initial = initial
        self.n_actions = max(len(v) for v in self.children.values())
        self.max_steps = len(self.states)
        self._parents = {s: [] for s in self.states}
        for p, kids in self.children.items():
            for a, c in enumerate(kids):
                self._parents[c].append((p, a))
        for s in self.states:
            if self.is_terminal(s) and self.rewards.get(s, 0.0) <= 0:
                raise UsageError(f"terminal state {s} needs a positive reward")
        self.backward = backward or {
            (p, c): 1.0 / len(self._parents[c]) for c in self.states for p, _ in self._parents[c]
        }

    def initial_state(self, rng=None):
        return self.initial

    def valid_actions(self, state):
        mask = np.zeros(self.n_actions, dtype=bool)
        mask[: len(self.children.get(state, []))] = True
        return mask

    def step(self, state, action):
        kids = self.children.get(state, [])
        if not 0 <= action < len(kids):
            raise EnvironmentContractError(f"action {action} invalid at state {state}")
        return kids[action]

    def is_terminal(self, state):
        return not self.children.get(state)

    def log_reward(self, state):
        return math.log(self.rewards[state])

    def parents(self, state):
        return list(self._parents[state])

    def log_backward(self, parent, action, state):
        return math.log(self.backward[(parent, state)])

    def terminal_key(self, state):
        return state

    def encode(self, states):
        return np.asarray(states, dtype=np.int64)

    def all_trajectories(self):
        """Every complete trajectory as (states, actions)."""
        out = []

        def walk(states, actions):
            s = states[-1]
            if self.is_terminal(s):
                out.append((list(states), list(actions)))
                return
            for a, c in enumerate(self.children[s]):
                walk(states + [c], actions + [a])

        walk([self.initial], [])
        return out

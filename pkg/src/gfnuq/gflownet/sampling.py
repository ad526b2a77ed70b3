"""Trajectory rollouts, the replay buffer, and policy read-outs."""

from __future__ import annotations

from collections import Counter

import numpy as np

from ..errors import EnvironmentContractError, UsageError
from .core import Trajectory


def tempered_probs(logits, mask, temperature=1.0):
    """Masked softmax of ``logits / temperature``; masked entries are exactly 0."""
    logits = np.asarray(logits, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if temperature <= 0:
        raise UsageError("temperature must be positive (use greedy=True for argmax)")
    x = np.where(mask, logits / temperature, -np.inf)
    x = x - x.max(axis=-1, keepdims=True)
    w = np.where(mask, np.exp(x), 0.0)
    return w / w.sum(axis=-1, keepdims=True)


def _categorical(probs, mask, rng):
    """One inverse-CDF draw per row; never lands on a masked entry."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(len(probs)) * cdf[:, -1]
    choice = (cdf <= u[:, None]).sum(axis=1)
    # guard against round-off at the top of the CDF
    last_valid = mask.shape[1] - 1 - np.argmax(mask[:, ::-1], axis=1)
    choice = np.minimum(choice, last_valid)
    bad = ~mask[np.arange(len(choice)), choice]
    if bad.any():
        # u fell exactly on a flat stretch: take the next valid entry
        for row in np.flatnonzero(bad):
            choice[row] = np.flatnonzero(mask[row] & (np.arange(mask.shape[1]) >= choice[row]))[0]
    return choice


def sample_trajectories(model, env, n, rng, epsilon=0.0, temperature=1.0, greedy=False):
    """Roll out ``n`` trajectories in lock-step.

    With probability ``epsilon`` an action is drawn uniformly from the valid
    ones; otherwise from the temperature-scaled policy (or its argmax when
    ``greedy``).
    """
    paths = [[env.initial_state(rng)] for _ in range(n)]
    actions = [[] for _ in range(n)]
    masks = [[] for _ in range(n)]
    active = list(range(n))
    limit = getattr(env, "max_steps", 10_000) + 1
    for _ in range(limit + 1):
        if not active:
            break
        current = [paths[i][-1] for i in active]
        mask = np.array([env.valid_actions(s) for s in current], dtype=bool)
        if not mask.any(axis=1).all():
            raise EnvironmentContractError("non-terminal state with no valid action")
        logits = model.logits(env, current)
        if greedy:
            choice = np.argmax(np.where(mask, logits, -np.inf), axis=1)
        else:
            probs = tempered_probs(logits, mask, temperature)
            if epsilon > 0:
                explore = rng.random(len(active)) < epsilon
                uniform = mask / mask.sum(axis=1, keepdims=True)
                probs = np.where(explore[:, None], uniform, probs)
            choice = _categorical(probs, mask, rng)
        still = []
        for row, i in enumerate(active):
            a = int(choice[row])
            nxt = env.step(paths[i][-1], a)
            paths[i].append(nxt)
            actions[i].append(a)
            masks[i].append(mask[row])
            if not env.is_terminal(nxt):
                still.append(i)
        active = still
    if active:
        raise EnvironmentContractError(f"rollout exceeded {limit} steps; the state graph is not a finite DAG")
    out = []
    for i in range(n):
        states = paths[i]
        log_pb = np.array([env.log_backward(p, a, s) for p, a, s in zip(states, actions[i], states[1:])])
        out.append(Trajectory(states, actions[i], env.log_reward(states[-1]),
                              np.array(masks[i], dtype=bool), log_pb))
    return out


def sample_trajectory(model, env, rng, epsilon=0.0, temperature=1.0, greedy=False):
    return sample_trajectories(model, env, 1, rng, epsilon, temperature, greedy)[0]


class ReplayBuffer:
    """Bounded FIFO store sampled in proportion to terminal reward."""

    def __init__(self, capacity):
        if capacity < 1:
            raise UsageError("buffer capacity must be positive")
        self.capacity = int(capacity)
        self.items = []
        self.log_rewards = []
        self._next = 0

    def __len__(self):
        return len(self.items)

    def add(self, trajs):
        for t in trajs:
            if len(self.items) < self.capacity:
                self.items.append(t)
                self.log_rewards.append(t.log_reward)
            else:
                self.items[self._next] = t
                self.log_rewards[self._next] = t.log_reward
                self._next = (self._next + 1) % self.capacity

    def probabilities(self):
        lr = np.asarray(self.log_rewards)
        w = np.exp(lr - lr.max())
        return w / w.sum()

    def sample(self, k, rng):
        if not self.items:
            raise UsageError("cannot sample from an empty buffer")
        idx = rng.choice(len(self.items), size=k, p=self.probabilities())
        return [self.items[i] for i in idx]


def extract_policy(model, env, state):
    """Masked, renormalised forward policy at ``state`` (masked entries exactly 0)."""
    return policy_along(model, env, [state])[0]


def policy_along(model, env, states):
    """Policies at a list of states, shape ``(len(states), n_actions)``."""
    mask = np.array([env.valid_actions(s) for s in states], dtype=bool)
    return tempered_probs(model.logits(env, states), mask, 1.0)


def terminating_distribution(model, env, n_rollouts, rng, key=None, batch=1000):
    """Empirical terminating distribution over ``key(terminal_state)`` (ε = 0, temperature 1)."""
    if n_rollouts < 1:
        raise UsageError("need at least one rollout")
    key = key or env.terminal_key
    counts = Counter()
    left = n_rollouts
    while left:
        k = min(batch, left)
        for t in sample_trajectories(model, env, k, rng):
            counts[key(t.states[-1])] += 1
        left -= k
    return {k: v / n_rollouts for k, v in sorted(counts.items(), key=lambda kv: repr(kv[0]))}

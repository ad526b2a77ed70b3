"""GFN model, trajectories, and the flow-consistency losses (FM, DB, TB, SubTB).

A discrete environment provides::

    n_actions
    initial_state(rng)
    valid_actions(state) -> bool mask
    step(state, action) -> state
    is_terminal(state)
    log_reward(state)                       # terminal states only
    parents(state) -> [(parent, action)]    # needed by flow matching
    log_backward(parent, action, state)     # fixed backward policy
    encode(states) -> network features

Terminal states are sinks whose flow is pinned to the reward. Everything is
computed in the log domain; probabilities and flow sums are floored at 1e-30.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import EnvironmentContractError, UsageError
from ..nn import Tensor, log_softmax, logsumexp, parameter, where
from .networks import policy_from_dict

PROB_FLOOR = 1e-30
LOG_FLOOR = math.log(PROB_FLOOR)


@dataclass
class Trajectory:
    states: list
    actions: list
    log_reward: float
    masks: np.ndarray | None = None  # (n_actions_taken, n_env_actions)
    log_pb: np.ndarray | None = None

    def __post_init__(self):
        if len(self.actions) != len(self.states) - 1:
            raise UsageError("a trajectory needs one more state than actions")

    def __len__(self):
        return len(self.actions)

    @property
    def reward(self):
        return math.exp(self.log_reward)

    def complete(self, env):
        """Fill masks and backward log-probabilities from the environment if missing."""
        if self.masks is None:
            self.masks = np.array([env.valid_actions(s) for s in self.states[:-1]], dtype=bool)
        if self.log_pb is None:
            self.log_pb = np.array(
                [env.log_backward(p, a, s) for p, a, s in zip(self.states, self.actions, self.states[1:])],
                dtype=np.float64,
            )
        return self


def trajectory_from_actions(env, actions, initial=None, rng=None):
    s = env.initial_state(rng) if initial is None else initial
    states = [s]
    for a in actions:
        s = env.step(s, a)
        states.append(s)
    if not env.is_terminal(s):
        raise UsageError("action sequence does not end in a terminal state")
    return Trajectory(states, list(actions), env.log_reward(s)).complete(env)


class GfnModel:
    """Forward policy logits, optional state-flow column, optional learned log Z."""

    def __init__(self, policy, n_actions, flow_head=False, log_z=0.0):
        expected = n_actions + (1 if flow_head else 0)
        if policy.n_outputs != expected:
            raise UsageError(f"policy emits {policy.n_outputs} outputs, model needs {expected}")
        self.policy = policy
        self.n_actions = n_actions
        self.flow_head = flow_head
        self.log_z = None if log_z is None else parameter(float(log_z))

    def parameters(self):
        return self.policy.parameters()

    def all_parameters(self):
        return self.parameters() + ([self.log_z] if self.log_z is not None else [])

    def outputs(self, env, states):
        return self.policy(env.encode(states))

    def logits(self, env, states):
        """Raw logits as an array (no graph kept for the caller)."""
        return self.outputs(env, states).data[:, : self.n_actions]

    def to_dict(self):
        return {
            "policy": self.policy.to_dict(),
            "n_actions": self.n_actions,
            "flow_head": self.flow_head,
            "log_z": None if self.log_z is None else float(self.log_z.data),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(policy_from_dict(doc["policy"]), doc["n_actions"], doc["flow_head"], doc["log_z"])


def _floor(x, stats=None):
    """Clamp log-values at log(1e-30), counting clamped entries in ``stats``."""
    hit = x.data < LOG_FLOOR
    if stats is not None and hit.any():
        stats["floored"] = stats.get("floored", 0) + int(hit.sum())
    return x.clip(LOG_FLOOR, np.inf)


@dataclass
class _Batch:
    """Flattened network quantities for a list of trajectories."""

    offsets: np.ndarray  # first flat state index of each trajectory
    lengths: np.ndarray  # actions per trajectory
    log_pf: Tensor  # (E,) chosen-action log-probabilities
    log_pb: np.ndarray  # (E,)
    log_flow: Tensor | None  # (S,) state log-flows; terminal states hold log R
    log_reward: np.ndarray  # (B,)
    edge_traj: np.ndarray = field(default=None)  # (E,) owning trajectory


def _evaluate(model, env, trajs, stats=None, need_flow=False):
    for t in trajs:
        t.complete(env)
    states = [s for t in trajs for s in t.states]
    lengths = np.array([len(t) for t in trajs])
    offsets = np.concatenate([[0], np.cumsum(lengths + 1)[:-1]])
    src = np.concatenate([o + np.arange(n) for o, n in zip(offsets, lengths)])
    actions = np.concatenate([np.asarray(t.actions, dtype=np.int64) for t in trajs])
    masks = np.concatenate([t.masks for t in trajs])
    if not masks[np.arange(len(actions)), actions].all():
        raise EnvironmentContractError("trajectory takes a masked action")
    out = model.outputs(env, states)
    logp = log_softmax(out[src, : model.n_actions], masks)
    log_pf = _floor(logp[np.arange(len(actions)), actions], stats)
    log_pb = np.maximum(np.concatenate([t.log_pb for t in trajs]), LOG_FLOOR)
    log_r = np.maximum(np.array([t.log_reward for t in trajs]), LOG_FLOOR)
    log_flow = None
    if model.flow_head:
        ends = offsets + lengths
        terminal = np.zeros(len(states), dtype=bool)
        terminal[ends] = [env.is_terminal(states[e]) for e in ends]
        rewards = np.zeros(len(states))
        rewards[offsets + lengths] = log_r
        log_flow = where(terminal, rewards, out[:, model.n_actions])
    elif need_flow:
        raise UsageError("this loss needs a model with a state-flow head")
    edge_traj = np.repeat(np.arange(len(trajs)), lengths)
    return _Batch(offsets, lengths, log_pf, log_pb, log_flow, log_r, edge_traj)


def _segment_sum(values, owner, n):
    """Sum a flat (E,) tensor into n groups via a constant indicator matmul."""
    ind = np.zeros((n, len(owner)))
    ind[owner, np.arange(len(owner))] = 1.0
    return Tensor(ind) @ values


def _initial_log_flow(model, batch):
    if model.log_z is not None:
        return model.log_z
    if batch.log_flow is None:
        raise UsageError("trajectory balance needs log Z or a state-flow head")
    return batch.log_flow[batch.offsets]


def trajectory_balance(model, env, trajs, stats=None):
    """Mean over trajectories of (log Z + sum log P_f - log R - sum log P_b)^2."""
    b = _evaluate(model, env, trajs, stats)
    n = len(trajs)
    sum_pf = _segment_sum(b.log_pf, b.edge_traj, n)
    sum_pb = np.bincount(b.edge_traj, weights=b.log_pb, minlength=n)
    resid = _initial_log_flow(model, b) + sum_pf - b.log_reward - sum_pb
    return (resid * resid).mean()


def subtrajectory_balance(model, env, trajs, stats=None):
    """Unweighted mean of the squared log-ratio over every sub-range m < n of every trajectory."""
    b = _evaluate(model, env, trajs, stats, need_flow=True)
    n_traj, width = len(trajs), int(b.lengths.max()) + 1
    # gather padded per-trajectory rows; padding points at index 0 and is masked out
    state_idx = np.zeros((n_traj, width), dtype=np.int64)
    edge_idx = np.zeros((n_traj, width - 1), dtype=np.int64)
    edge_valid = np.zeros((n_traj, width - 1))
    edge_start = np.concatenate([[0], np.cumsum(b.lengths)[:-1]])
    for i, (o, n) in enumerate(zip(b.offsets, b.lengths)):
        state_idx[i, : n + 1] = o + np.arange(n + 1)
        edge_idx[i, :n] = edge_start[i] + np.arange(n)
        edge_valid[i, :n] = 1.0
    log_flow = b.log_flow[state_idx]
    if model.log_z is not None:
        first = np.zeros((n_traj, width), dtype=bool)
        first[:, 0] = True
        log_flow = where(first, model.log_z.reshape(1, 1), log_flow)
    step = (b.log_pf[edge_idx] - b.log_pb[edge_idx]) * edge_valid
    upper = np.triu(np.ones((width - 1, width)), k=1)  # cum[k] = sum_{t<k} step[t]
    a = log_flow - step @ Tensor(upper)
    diff = a.reshape(n_traj, width, 1) - a.reshape(n_traj, 1, width)
    m, k = np.meshgrid(np.arange(width), np.arange(width), indexing="ij")
    pairs = (m[None] < k[None]) & (k[None] <= b.lengths[:, None, None])
    w = pairs.astype(np.float64)
    return (diff * diff * w).sum() * (1.0 / w.sum())


def detailed_balance(model, env, trajs, stats=None):
    """Mean over edges of (log F(s) + log P_f - log F(s') - log P_b)^2."""
    b = _evaluate(model, env, trajs, stats, need_flow=True)
    src = np.concatenate([o + np.arange(n) for o, n in zip(b.offsets, b.lengths)])
    resid = b.log_flow[src] + b.log_pf - b.log_flow[src + 1] - b.log_pb
    return (resid * resid).mean()


def flow_matching(model, env, trajs, stats=None):
    """Mean over non-initial states of (log in-flow - log out-flow)^2.

    Edge flows are F(p) P_f(s | p); the out-flow of a non-terminal state is
    F(s) (its forward policy sums to one) and of a terminal state R(s).
    """
    if not model.flow_head:
        raise UsageError("flow matching needs a model with a state-flow head")
    for t in trajs:
        t.complete(env)
    targets = [s for t in trajs for s in t.states[1:]]
    edges = [(p, a, i) for i, s in enumerate(targets) for p, a in env.parents(s)]
    if not edges:
        raise UsageError("no parent edges to match")
    parents = [p for p, _, _ in edges]
    acts = np.array([a for _, a, _ in edges])
    owner = np.array([i for _, _, i in edges])
    masks = np.array([env.valid_actions(p) for p in parents], dtype=bool)
    pout = model.outputs(env, parents)
    logp = log_softmax(pout[:, : model.n_actions], masks)
    edge_flow = pout[:, model.n_actions] + _floor(logp[np.arange(len(acts)), acts], stats)
    # log-sum-exp per target through a padded (targets, max_parents) table
    width = int(np.bincount(owner).max())
    slot = np.zeros(len(owner), dtype=np.int64)
    seen = {}
    for j, i in enumerate(owner):
        slot[j] = seen.get(i, 0)
        seen[i] = slot[j] + 1
    table_idx = np.zeros((len(targets), width), dtype=np.int64)
    valid = np.zeros((len(targets), width), dtype=bool)
    table_idx[owner, slot] = np.arange(len(owner))
    valid[owner, slot] = True
    padded = where(valid, edge_flow[table_idx], -np.inf)
    log_in = _floor(logsumexp(padded, axis=1), stats)
    terminal = np.array([env.is_terminal(s) for s in targets])
    tout = model.outputs(env, targets)
    rewards = np.array([max(env.log_reward(s), LOG_FLOOR) if env.is_terminal(s) else 0.0 for s in targets])
    log_out = where(terminal, rewards, _floor(tout[:, model.n_actions], stats))
    resid = log_in - log_out
    return (resid * resid).mean()


LOSSES = {
    "fm": flow_matching,
    "db": detailed_balance,
    "tb": trajectory_balance,
    "subtb": subtrajectory_balance,
}


def batch_loss(kind, model, env, trajs, stats=None):
    try:
        fn = LOSSES[kind]
    except KeyError:
        raise UsageError(f"unknown loss {kind!r}; choose from {sorted(LOSSES)}") from None
    return fn(model, env, trajs, stats)


# -- single-object forms -----------------------------------------------------

def loss_fm(model, env, state, stats=None):
    """Flow-matching residual at one non-initial state."""
    if not env.parents(state):
        raise UsageError("flow matching is undefined at the initial state")
    parent, action = env.parents(state)[0]
    tr = Trajectory([parent, state], [action], env.log_reward(state) if env.is_terminal(state) else 0.0)
    return flow_matching(model, env, [tr], stats)


def loss_db(model, env, state, action, next_state, stats=None):
    """Detailed-balance residual for the edge ``state -> next_state``."""
    log_r = env.log_reward(next_state) if env.is_terminal(next_state) else 0.0
    tr = Trajectory([state, next_state], [action], log_r)
    b = _evaluate(model, env, [tr], stats, need_flow=True)
    resid = b.log_flow[0] + b.log_pf - b.log_flow[1] - b.log_pb
    return (resid * resid).sum()


def loss_tb(model, env, traj, stats=None):
    return trajectory_balance(model, env, [traj], stats)


def loss_subtb(model, env, traj, m, n, stats=None):
    """Squared log-ratio over the sub-range ``m .. n`` of one trajectory."""
    if not 0 <= m < n <= len(traj):
        raise UsageError(f"need 0 <= m < n <= {len(traj)}, got m={m}, n={n}")
    b = _evaluate(model, env, [traj], stats, need_flow=True)
    start = model.log_z if (m == 0 and model.log_z is not None) else b.log_flow[m]
    pf = b.log_pf[m:n].sum()
    pb = float(b.log_pb[m:n].sum())
    resid = start + pf - b.log_flow[n] - pb
    return resid * resid

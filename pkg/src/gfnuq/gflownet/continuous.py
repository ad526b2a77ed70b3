"""Gaussian-policy flow network for the continuous grid.

Two dense nets map the raw ``(x, y, t)`` triple to ``(mu_x, log var_x, mu_y,
log var_y)``: one for forward moves, one for backward moves. Log-variances are
clipped so the standard deviation stays in [0.1, 1]. The loss is trajectory
balance with Gaussian log-densities; the first backward step is skipped since
every state at ``t = 1`` has the origin as its only parent.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import TrainingDivergence, UsageError
from ..nn import AdamState, DenseNet, Tensor, backward, parameter

LOG_VAR_MIN = math.log(0.1**2)
LOG_VAR_MAX = math.log(1.0**2)
_LOG_2PI = math.log(2.0 * math.pi)


def gaussian_log_density(value, mean, log_var):
    """Sum over the last axis of independent normal log-densities (arrays or tensors)."""
    diff = value - mean
    inv_var = (-log_var).exp() if isinstance(log_var, Tensor) else np.exp(-np.asarray(log_var))
    return (-0.5 * (_LOG_2PI + log_var + diff * diff * inv_var)).sum(axis=-1)


@dataclass
class ContinuousGfn:
    forward_net: DenseNet
    backward_net: DenseNet
    log_z: object  # scalar Tensor

    @classmethod
    def create(cls, rng, hidden=(100, 100)):
        sizes = (3, *hidden, 4)
        return cls(DenseNet.create(sizes, rng), DenseNet.create(sizes, rng), parameter(np.zeros(())))

    def parameters(self):
        return self.forward_net.parameters() + self.backward_net.parameters()

    def to_dict(self):
        return {"kind": "continuous", "forward": self.forward_net.to_dict(),
                "backward": self.backward_net.to_dict(), "log_z": float(self.log_z.data)}

    @classmethod
    def from_dict(cls, doc):
        return cls(DenseNet.from_dict(doc["forward"]), DenseNet.from_dict(doc["backward"]),
                   parameter(np.array(doc["log_z"], dtype=np.float64)))


def _split(out):
    """Network output ``(..., 4)`` -> means ``(..., 2)`` and clipped log-variances."""
    mean = out[..., [0, 2]]
    log_var = out[..., [1, 3]].clip(LOG_VAR_MIN, LOG_VAR_MAX)
    return mean, log_var


def _split_np(out):
    return out[..., [0, 2]], np.clip(out[..., [1, 3]], LOG_VAR_MIN, LOG_VAR_MAX)


def _inputs(positions):
    """``(B, T+1, 2)`` positions -> ``(B, T+1, 3)`` raw (x, y, t) triples."""
    b, steps, _ = positions.shape
    t = np.broadcast_to(np.arange(steps, dtype=np.float64), (b, steps))[..., None]
    return np.concatenate([positions, t], axis=-1)


def policy_params(model, xyt):
    """Clamped Gaussian policy ``(mu_x, var_x, mu_y, var_y)`` at each ``(x, y, t)`` row."""
    mean, log_var = _split_np(model.forward_net.predict(np.atleast_2d(xyt)))
    var = np.exp(log_var)
    return np.stack([mean[:, 0], var[:, 0], mean[:, 1], var[:, 1]], axis=1)


def extract_gaussian_policy(model, state):
    """Policy at a single :class:`ContinuousState`."""
    return policy_params(model, [[state.x, state.y, float(state.t)]])[0]


def sample_paths(model, n, rng, n_steps=5, greedy=False):
    """Roll out ``n`` forward trajectories; returns positions ``(n, n_steps+1, 2)``."""
    pos = np.zeros((n, n_steps + 1, 2))
    for t in range(n_steps):
        xyt = np.column_stack([pos[:, t], np.full(n, float(t))])
        mean, log_var = _split_np(model.forward_net.predict(xyt))
        step = mean if greedy else mean + np.exp(0.5 * log_var) * rng.standard_normal((n, 2))
        pos[:, t + 1] = pos[:, t] + step
    return pos


def tb_terms(model, env, positions):
    """Per-trajectory log-ratio ``log Z + sum log P_f - log R - sum log P_b`` as a Tensor."""
    positions = np.asarray(positions, dtype=np.float64)
    xyt = _inputs(positions)
    moves = np.diff(positions, axis=1)  # (B, T, 2)
    f_mean, f_lv = _split(model.forward_net(xyt[:, :-1]))
    log_pf = gaussian_log_density(moves, f_mean, f_lv).sum(axis=1)
    b_mean, b_lv = _split(model.backward_net(xyt[:, 2:]))
    log_pb = gaussian_log_density(moves[:, 1:], b_mean, b_lv).sum(axis=1)
    log_r = np.asarray(env.log_reward(positions[:, -1]), dtype=np.float64)
    return model.log_z + log_pf - log_pb - log_r


def trajectory_balance_loss(model, env, positions):
    r = tb_terms(model, env, positions)
    return (r * r).mean()


@dataclass
class ContinuousTrainConfig:
    episodes: int = 5000
    batch_size: int = 256
    lr: float = 1e-3
    log_z_lr: float = 0.1

    def to_dict(self):
        return asdict(self)


def train_continuous(model, env, config, rng):
    """On-policy trajectory-balance training; returns the per-episode loss array."""
    if config.episodes < 1 or config.batch_size < 1:
        raise UsageError("episodes and batch size must be positive")
    params = model.parameters()
    opt = AdamState(params, lr=config.lr)
    opt_z = AdamState([model.log_z], lr=config.log_z_lr)
    losses = np.empty(config.episodes)
    for k in range(config.episodes):
        paths = sample_paths(model, config.batch_size, rng, env.n_steps)
        loss = trajectory_balance_loss(model, env, paths)
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingDivergence(f"continuous TB loss became {value} at episode {k}")
        losses[k] = value
        grads = backward(loss, params + [model.log_z])
        opt.step(grads[:-1])
        opt_z.step(grads[-1:])
    return losses


def policies_along(model, positions):
    """Gaussian policy at each non-terminal state of one path ``(T+1, 2)`` -> ``(T, 4)``."""
    xyt = _inputs(np.asarray(positions, dtype=np.float64)[None])[0, :-1]
    return policy_params(model, xyt)


__all__ = [
    "LOG_VAR_MAX",
    "LOG_VAR_MIN",
    "ContinuousGfn",
    "ContinuousTrainConfig",
    "extract_gaussian_policy",
    "gaussian_log_density",
    "policies_along",
    "policy_params",
    "sample_paths",
    "tb_terms",
    "train_continuous",
    "trajectory_balance_loss",
]

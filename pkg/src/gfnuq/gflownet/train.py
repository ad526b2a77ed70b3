"""Training loop shared by the discrete environments."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import TrainingDivergence
from ..nn import AdamState, backward
from .core import batch_loss
from .sampling import ReplayBuffer, sample_trajectories


@dataclass
class TrainConfig:
    loss: str = "tb"
    episodes: int = 1000
    batch_size: int = 64
    lr: float = 1e-3
    log_z_lr: float = 0.1
    temperature: float = 1.0
    explore: bool = True
    epsilon_start: float = 0.5
    epsilon_decay: float = 0.99
    epsilon_min: float = 0.1
    buffer_capacity: int = 10_000
    replay_batch: int = 0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        return cls(**doc)


def epsilon_schedule(k, start=0.5, decay=0.99, floor=0.1):
    """max(floor, start * decay^k) for episode ``k``."""
    return max(floor, start * decay**k)


@dataclass
class TrainResult:
    model: object
    losses: np.ndarray
    floored: int = 0


def train(model, env, config, rng):
    """Fit ``model`` to ``env`` and return it with the per-episode loss curve.

    Each episode samples a fresh on-policy batch (ε-greedy, tempered), adds
    it to a reward-prioritised buffer and optionally mixes in a replay batch.
    A non-finite loss aborts with :class:`TrainingDivergence`.
    """
    params = model.parameters()
    opt = AdamState(params, lr=config.lr)
    opt_z = AdamState([model.log_z], lr=config.log_z_lr) if model.log_z is not None else None
    buffer = ReplayBuffer(config.buffer_capacity)
    losses = np.empty(config.episodes)
    stats = {}
    for k in range(config.episodes):
        eps = (epsilon_schedule(k, config.epsilon_start, config.epsilon_decay, config.epsilon_min)
               if config.explore else 0.0)
        batch = sample_trajectories(model, env, config.batch_size, rng, eps, config.temperature)
        buffer.add(batch)
        if config.replay_batch:
            batch = batch + buffer.sample(config.replay_batch, rng)
        loss = batch_loss(config.loss, model, env, batch, stats)
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingDivergence(f"{config.loss} loss became {value} at episode {k}")
        losses[k] = value
        wrt = params + ([model.log_z] if opt_z else [])
        grads = backward(loss, wrt)
        opt.step(grads[: len(params)])
        if opt_z:
            opt_z.step(grads[len(params):])
    return TrainResult(model, losses, stats.get("floored", 0))


def write_loss_curve(path, losses):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", "loss"])
        for k, v in enumerate(losses):
            w.writerow([k, repr(float(v))])

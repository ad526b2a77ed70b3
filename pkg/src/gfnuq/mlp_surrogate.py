"""Feedforward baseline surrogate: latent code -> whole policy tensor in one net."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import TrainingDivergence, UsageError
from .nn import AdamState, DenseNet, backward, log_softmax, where
from .pce.regression import Standardisation
from .pce.surrogate import VARIANCE_BOUNDS


@dataclass
class MlpConfig:
    hidden: tuple = (64, 64)
    epochs: int = 5000
    lr: float = 1e-3

    def to_dict(self):
        doc = asdict(self)
        doc["hidden"] = list(self.hidden)
        return doc


def discrete_kl(p, q):
    """KL(p || q) over the last axis, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(p) - np.log(q)), 0.0)
    return terms.sum(axis=-1)


class MlpSurrogate:
    """Dense net m -> hidden -> T*C on standardised latents.

    Discrete outputs are logits, softmaxed per step over the channels that
    were ever non-zero in training. Gaussian outputs are ``(mu, log var)``
    pairs whose variances are clamped on the way out.
    """

    def __init__(self, net, kind, n_steps, n_channels, standardisation, active=None,
                 log_channels=(1, 3), variance_bounds=VARIANCE_BOUNDS):
        if kind not in ("discrete", "gaussian"):
            raise UsageError(f"unknown surrogate kind {kind!r}")
        if net.output_dim != n_steps * n_channels:
            raise UsageError("network output does not match steps x channels")
        self.net = net
        self.kind = kind
        self.n_steps = int(n_steps)
        self.n_channels = int(n_channels)
        self.standardisation = standardisation
        self.active = (np.ones((n_steps, n_channels), dtype=bool) if active is None
                       else np.asarray(active, dtype=bool))
        self.log_channels = tuple(log_channels) if kind == "gaussian" else ()
        self.variance_bounds = tuple(variance_bounds)

    @property
    def dim(self):
        return self.net.input_dim

    def raw(self, latents):
        """Network outputs ``(n, T, C)`` before any softmax or exp."""
        z = self.standardisation.apply(latents)
        return self.net.predict(z).reshape(-1, self.n_steps, self.n_channels)

    def __call__(self, latents):
        out = self.raw(latents)
        if self.kind == "discrete":
            x = np.where(self.active, out, -np.inf)
            x = x - x.max(axis=-1, keepdims=True)
            w = np.where(self.active, np.exp(x), 0.0)
            return w / w.sum(axis=-1, keepdims=True)
        lo, hi = self.variance_bounds
        for c in self.log_channels:
            out[:, :, c] = np.clip(np.exp(out[:, :, c]), lo, hi)
        return out

    def loss(self, latents, targets):
        """Discrete: mean over samples of the per-step KL summed over steps. Gaussian: MSE."""
        z = self.standardisation.apply(latents)
        out = self.net(z).reshape(-1, self.n_steps, self.n_channels)
        if self.kind == "discrete":
            mask = np.broadcast_to(self.active, out.shape)
            log_q = log_softmax(out, mask=mask, axis=-1)
            p = np.asarray(targets, dtype=np.float64)
            safe_p = np.where(p > 0, p, 1.0)
            entropy = float(np.sum(p * np.log(safe_p)))
            ce = -(where(mask, log_q, 0.0) * np.where(mask, p, 0.0)).sum()
            return (ce + entropy) * (1.0 / p.shape[0])
        diff = out - np.asarray(targets, dtype=np.float64)
        return (diff * diff).mean()

    def to_dict(self):
        return {
            "kind": self.kind,
            "n_steps": self.n_steps,
            "n_channels": self.n_channels,
            "net": self.net.to_dict(),
            "standardisation": self.standardisation.to_dict(),
            "active": self.active.astype(int).tolist(),
            "log_channels": list(self.log_channels),
            "variance_bounds": list(self.variance_bounds),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(DenseNet.from_dict(doc["net"]), doc["kind"], doc["n_steps"], doc["n_channels"],
                   Standardisation.from_dict(doc["standardisation"]), np.array(doc["active"], dtype=bool),
                   tuple(doc["log_channels"]), tuple(doc["variance_bounds"]))


def _targets(policies, kind, log_channels):
    p = np.asarray(policies, dtype=np.float64)
    if kind == "discrete":
        return p
    t = p.copy()
    for c in log_channels:
        t[:, :, c] = np.log(t[:, :, c])
    return t


def train_mlp_surrogate(latents, policies, rng, kind="discrete", config=None, log_channels=(1, 3)):
    """Full-batch Adam fit; returns ``(surrogate, per-epoch losses)``."""
    config = config or MlpConfig()
    x = np.atleast_2d(np.asarray(latents, dtype=np.float64))
    p = np.asarray(policies, dtype=np.float64)
    if p.ndim != 3 or p.shape[0] != x.shape[0]:
        raise UsageError("policies must be (n_samples, n_steps, n_channels) matching latents")
    _, n_steps, n_channels = p.shape
    net = DenseNet.create([x.shape[1], *config.hidden, n_steps * n_channels], rng)
    active = np.any(p > 0.0, axis=0) if kind == "discrete" else None
    model = MlpSurrogate(net, kind, n_steps, n_channels, Standardisation.fit(x), active, log_channels)
    targets = _targets(p, kind, model.log_channels)
    params = net.parameters()
    opt = AdamState(params, lr=config.lr)
    losses = np.empty(config.epochs)
    for epoch in range(config.epochs):
        loss = model.loss(x, targets)
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingDivergence(f"MLP surrogate loss became {value} at epoch {epoch}")
        losses[epoch] = value
        opt.step(backward(loss, params))
    return model, losses


def mlp_jacobian(model, x):
    """Exact ``J[i, j] = d raw_j / d x_i`` at one latent point ``x`` (forward mode).

    ``raw`` is the flattened network output (logits, or mu / log var).
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != model.dim:
        raise UsageError(f"expected a {model.dim}-dimensional latent")
    st = model.standardisation
    h = (x - st.shift) / st.scale
    jac = np.diag(1.0 / st.scale)  # d h / d x, shape (m, width)
    for layer in model.net.layers:
        pre = h @ layer.weight.data + layer.bias.data
        jac = jac @ layer.weight.data
        if layer.activation == "relu":
            slope = (pre > 0).astype(np.float64)
            h = np.maximum(pre, 0.0)
        elif layer.activation == "tanh":
            h = np.tanh(pre)
            slope = 1.0 - h * h
        else:
            slope, h = 1.0, pre
        jac = jac * slope
    return jac

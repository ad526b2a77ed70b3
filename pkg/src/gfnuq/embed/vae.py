"""Dense beta-VAE over one-hot reward grids."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import TrainingDivergence, UsageError
from ..nn import AdamState, DenseNet, backward, log_softmax

N_LEVELS = 3


@dataclass
class VaeConfig:
    epochs: int = 1000
    batch_size: int = 64
    lr: float = 1e-3
    beta: float = 4.0

    def to_dict(self):
        return asdict(self)


def kl_to_standard(mean, log_var):
    """KL(N(mean, exp(log_var)) || N(0, I)) summed over the last axis."""
    # expm1 keeps exp(v) - 1 - v non-negative near v = 0
    return 0.5 * (log_var.expm1() - log_var + mean * mean).sum(axis=-1)


class BetaVae:
    """Encoder 300 -> 128 -> (mean, log-var); decoder latent -> 128 -> 3-way logits per cell."""

    def __init__(self, encoder, decoder, beta=4.0):
        if encoder.output_dim % 2:
            raise UsageError("encoder must output a mean and a log-variance per latent dimension")
        self.encoder = encoder
        self.decoder = decoder
        self.beta = float(beta)

    @classmethod
    def create(cls, rng, input_dim=300, hidden=128, latent_dim=2, beta=4.0):
        if input_dim % N_LEVELS:
            raise UsageError(f"input dimension must be a multiple of {N_LEVELS}")
        enc = DenseNet.create([input_dim, hidden, 2 * latent_dim], rng)
        dec = DenseNet.create([latent_dim, hidden, input_dim], rng)
        return cls(enc, dec, beta)

    @property
    def latent_dim(self):
        return self.encoder.output_dim // 2

    @property
    def n_cells(self):
        return self.decoder.output_dim // N_LEVELS

    def parameters(self):
        return self.encoder.parameters() + self.decoder.parameters()

    def encode(self, grids):
        """Deterministic ``(mean, log_var)`` arrays for one-hot grids ``(n, 300)``."""
        out = self.encoder.predict(np.atleast_2d(grids))
        d = self.latent_dim
        return out[:, :d], out[:, d:]

    def sample_latent(self, grids, rng):
        mean, log_var = self.encode(grids)
        return mean + np.exp(0.5 * log_var) * rng.standard_normal(mean.shape)

    def decode_probs(self, z):
        """Per-cell level probabilities ``(n, 3, cells)`` (channel layout of the one-hot grid)."""
        logits = self.decoder.predict(np.atleast_2d(z)).reshape(-1, N_LEVELS, self.n_cells)
        logits = logits - logits.max(axis=1, keepdims=True)
        w = np.exp(logits)
        return w / w.sum(axis=1, keepdims=True)

    def reconstruct(self, grids):
        """Argmax level per cell decoded from the encoder mean."""
        return self.decode_probs(self.encode(grids)[0]).argmax(axis=1)

    def loss(self, grids, noise, beta=None):
        """Mean over the batch of categorical cross-entropy plus beta * KL."""
        beta = self.beta if beta is None else beta
        x = np.atleast_2d(np.asarray(grids, dtype=np.float64))
        out = self.encoder(x)
        d = self.latent_dim
        mean, log_var = out[:, :d], out[:, d:]
        z = mean + (0.5 * log_var).exp() * noise
        logits = self.decoder(z).reshape(-1, N_LEVELS, self.n_cells)
        recon = -(log_softmax(logits, axis=1) * x.reshape(-1, N_LEVELS, self.n_cells)).sum(axis=(1, 2))
        return (recon + beta * kl_to_standard(mean, log_var)).mean()

    def to_dict(self):
        return {"kind": "beta-vae", "beta": self.beta, "encoder": self.encoder.to_dict(),
                "decoder": self.decoder.to_dict()}

    @classmethod
    def from_dict(cls, doc):
        return cls(DenseNet.from_dict(doc["encoder"]), DenseNet.from_dict(doc["decoder"]), doc["beta"])


def reconstruction_accuracy(vae, grids):
    """Fraction of cells whose decoded argmax level matches the input."""
    x = np.atleast_2d(grids).reshape(-1, N_LEVELS, vae.n_cells)
    return float(np.mean(vae.reconstruct(grids) == x.argmax(axis=1)))


def vae_train(grids, config, rng, vae=None):
    """Mini-batch Adam on the beta-VAE objective; returns ``(vae, per-epoch losses)``."""
    x = np.atleast_2d(np.asarray(grids, dtype=np.float64))
    if vae is None:
        vae = BetaVae.create(rng, input_dim=x.shape[1], beta=config.beta)
    params = vae.parameters()
    opt = AdamState(params, lr=config.lr)
    n = x.shape[0]
    losses = np.empty(config.epochs)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            noise = rng.standard_normal((len(idx), vae.latent_dim))
            loss = vae.loss(x[idx], noise)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDivergence(f"VAE loss became {value} at epoch {epoch}")
            opt.step(backward(loss, params))
            total += value * len(idx)
        losses[epoch] = total / n
    return vae, losses

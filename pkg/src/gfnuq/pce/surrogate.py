"""Per-step policy surrogates built from one PCE per (step, channel).

Discrete policies are fitted channel-wise in logit space. Decoding inverts
each logit through its complement, ``p = 1 / (1 + exp(-l))``, and applies a
softmax over the resulting log-probabilities, which renormalises the
channels onto the simplex. Channels that are exactly zero for every training
member (structurally masked actions) are excluded and decode to exactly 0.

Gaussian policies ``(mu_x, var_x, mu_y, var_y)`` are fitted with the means
raw and the variances in log space; decoding exponentiates and clamps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UsageError
from .basis import design_matrix, total_degree_indices
from .regression import PceModel, Standardisation, solve_ridge

DEFAULT_CLAMP = 1e-6
DEFAULT_RIDGE = 1e-6
VARIANCE_BOUNDS = (0.1**2, 1.0**2)


def logit(p, eps=DEFAULT_CLAMP):
    p = np.clip(np.asarray(p, dtype=np.float64), eps, 1.0 - eps)
    return np.log(p) - np.log1p(-p)


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def decode_logits(logits, active=None, axis=-1):
    """Map channel-wise logits back to a distribution over channels."""
    logits = np.asarray(logits, dtype=np.float64)
    logp = _log_sigmoid(logits)
    if active is not None:
        logp = np.where(active, logp, -np.inf)
    logp = logp - np.max(logp, axis=axis, keepdims=True)
    w = np.exp(logp)
    return w / w.sum(axis=axis, keepdims=True)


@dataclass
class PolicySurrogate:
    kind: str  # "discrete" or "gaussian"
    family: str
    degree: int
    indices: np.ndarray
    standardisation: Standardisation
    coefficients: np.ndarray  # (n_terms, n_steps * n_channels), in fitted space
    n_steps: int
    n_channels: int
    active: np.ndarray  # (n_steps, n_channels) bool
    log_channels: tuple = ()
    variance_bounds: tuple = VARIANCE_BOUNDS

    @property
    def dim(self):
        return self.indices.shape[1]

    def model(self, step, channel):
        """The scalar :class:`PceModel` for one (step, channel) output."""
        col = step * self.n_channels + channel
        return PceModel(
            self.family,
            self.dim,
            self.degree,
            self.coefficients[:, col].copy(),
            self.standardisation,
            self.indices,
        )

    def raw(self, latents):
        """PCE outputs in fitted space, shape ``(n, n_steps, n_channels)``."""
        z = self.standardisation.apply(latents)
        if z.shape[1] != self.dim:
            raise UsageError(f"latent dimension {z.shape[1]} != surrogate input dim {self.dim}")
        out = design_matrix(self.indices, z, self.family) @ self.coefficients
        return out.reshape(-1, self.n_steps, self.n_channels)

    def __call__(self, latents):
        return surrogate_sample(self, latents)

    def to_dict(self):
        return {
            "kind": self.kind,
            "family": self.family,
            "degree": self.degree,
            "indices": self.indices.tolist(),
            "standardisation": self.standardisation.to_dict(),
            "coefficients": self.coefficients.tolist(),
            "n_steps": self.n_steps,
            "n_channels": self.n_channels,
            "active": self.active.astype(int).tolist(),
            "log_channels": list(self.log_channels),
            "variance_bounds": list(self.variance_bounds),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            kind=doc["kind"],
            family=doc["family"],
            degree=doc["degree"],
            indices=np.array(doc["indices"], dtype=np.int64),
            standardisation=Standardisation.from_dict(doc["standardisation"]),
            coefficients=np.array(doc["coefficients"], dtype=np.float64),
            n_steps=doc["n_steps"],
            n_channels=doc["n_channels"],
            active=np.array(doc["active"], dtype=bool),
            log_channels=tuple(doc["log_channels"]),
            variance_bounds=tuple(doc["variance_bounds"]),
        )


def fit_policy_surrogate(
    latents,
    policies,
    degree,
    ridge=DEFAULT_RIDGE,
    kind="discrete",
    family="hermite",
    standardisation=None,
    clamp=DEFAULT_CLAMP,
    log_channels=(1, 3),
    variance_bounds=VARIANCE_BOUNDS,
):
    """Fit one ridge PCE per (step, channel) of a ``(n, T, C)`` policy tensor.

    All outputs share one design matrix, so a single factorisation serves
    every channel. Targets are centred before the ridge solve and the mean is
    added back to the constant term, so constant outputs are reproduced
    exactly.
    """
    x = np.atleast_2d(np.asarray(latents, dtype=np.float64))
    p = np.asarray(policies, dtype=np.float64)
    if p.ndim != 3 or p.shape[0] != x.shape[0]:
        raise UsageError("policies must be (n_samples, n_steps, n_channels) matching latents")
    n, n_steps, n_channels = p.shape
    if standardisation is None:
        standardisation = Standardisation.fit(x, family)
    if kind == "discrete":
        active = np.any(p > 0.0, axis=0)
        targets = logit(p, clamp)
        log_channels = ()
    elif kind == "gaussian":
        active = np.ones((n_steps, n_channels), dtype=bool)
        targets = p.copy()
        for c in log_channels:
            targets[:, :, c] = np.log(targets[:, :, c])
    else:
        raise UsageError(f"unknown surrogate kind {kind!r}")
    indices = total_degree_indices(x.shape[1], degree)
    design = design_matrix(indices, standardisation.apply(x), family)
    targets = targets.reshape(n, n_steps * n_channels)
    # centre so the ridge penalty never shrinks the per-channel mean
    offset = targets.mean(axis=0)
    coefficients = solve_ridge(design, targets - offset, ridge)
    coefficients[0] += offset
    return PolicySurrogate(
        kind=kind,
        family=family,
        degree=degree,
        indices=indices,
        standardisation=standardisation,
        coefficients=coefficients,
        n_steps=n_steps,
        n_channels=n_channels,
        active=active,
        log_channels=tuple(log_channels),
        variance_bounds=tuple(variance_bounds),
    )


def surrogate_sample(surrogate, latents):
    """Decoded policies at ``latents``: shape ``(n, n_steps, n_channels)``."""
    raw = surrogate.raw(latents)
    if surrogate.kind == "discrete":
        return decode_logits(raw, surrogate.active[None])
    out = raw.copy()
    lo, hi = surrogate.variance_bounds
    for c in surrogate.log_channels:
        out[:, :, c] = np.clip(np.exp(out[:, :, c]), lo, hi)
    return out

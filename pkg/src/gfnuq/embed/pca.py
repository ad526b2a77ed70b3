"""PCA projection of flattened r-matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegeneracyError, UsageError

RANK_TOL = 1e-10


@dataclass
class PcaProjector:
    mean: np.ndarray  # (p,)
    components: np.ndarray  # (k, p), orthonormal rows
    variances: np.ndarray  # (k,) eigenvalues of the MLE covariance
    latent_mean: np.ndarray  # (k,) MLE Gaussian of the projected training data
    latent_variance: np.ndarray  # (k,)

    def project(self, vectors):
        v = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        return (v - self.mean) @ self.components.T

    def reconstruct(self, codes):
        return np.atleast_2d(codes) @ self.components + self.mean

    def to_dict(self):
        return {k: np.asarray(getattr(self, k)).tolist()
                for k in ("mean", "components", "variances", "latent_mean", "latent_variance")}

    @classmethod
    def from_dict(cls, doc):
        return cls(**{k: np.array(v, dtype=np.float64) for k, v in doc.items()})


def pca_fit(vectors, k=2):
    """Centred SVD of ``vectors`` (n, p); rejects data of rank below ``k``."""
    x = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    n = x.shape[0]
    if n < 3:
        raise UsageError("PCA needs at least 3 vectors")
    mean = x.mean(axis=0)
    _, s, vt = np.linalg.svd(x - mean, full_matrices=False)
    variances = s**2 / n
    if len(s) < k or s[k - 1] <= RANK_TOL * max(s[0], 1.0):
        raise DegeneracyError(f"data rank is below {k}; cannot extract {k} components")
    components = vt[:k]
    # fix the sign so the largest-magnitude loading is positive, for reproducible codes
    flip = np.sign(components[np.arange(k), np.abs(components).argmax(axis=1)])
    components = components * flip[:, None]
    codes = (x - mean) @ components.T
    return PcaProjector(mean, components, variances[:k], codes.mean(axis=0), codes.var(axis=0))


def pca_project(projector, vectors):
    return projector.project(vectors)

"""Low-dimensional codes for reward functions.

Discrete grids go through a dense beta-VAE, noisy regression targets through
an analytic Karhunen-Loeve projection and BGe rewards through PCA of their
r-matrices. Continuous grids need no embedding: the four mixture means are
the code.
"""

from .kl import kl_coefficients, kl_eigenfunctions, kl_eigenvalues, kl_gram, kl_project, kl_synthesise
from .pca import PcaProjector, pca_fit, pca_project
from .vae import BetaVae, VaeConfig, kl_to_standard, reconstruction_accuracy, vae_train

__all__ = [
    "BetaVae",
    "PcaProjector",
    "VaeConfig",
    "kl_coefficients",
    "kl_eigenfunctions",
    "kl_eigenvalues",
    "kl_gram",
    "kl_project",
    "kl_synthesise",
    "kl_to_standard",
    "pca_fit",
    "pca_project",
    "reconstruction_accuracy",
    "vae_train",
]

"""Karhunen-Loeve projection of Wiener noise on the symbolic-regression interval."""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import trapezoid

from ..envs.symreg import X_HI, X_LO

T_LENGTH = X_HI - X_LO


def kl_eigenvalues(k, length=T_LENGTH):
    """lambda_k = T^2 / ((k - 1/2) pi)^2 for k = 1, 2, ..."""
    k = np.asarray(k, dtype=np.float64)
    return length**2 / ((k - 0.5) * math.pi) ** 2


def kl_eigenfunctions(k, t, length=T_LENGTH):
    """phi_k(t) = sqrt(2/T) sin((k - 1/2) pi t / T); shape ``(len(k), len(t))``."""
    k = np.atleast_1d(np.asarray(k, dtype=np.float64))[:, None]
    t = np.asarray(t, dtype=np.float64)[None, :]
    return math.sqrt(2.0 / length) * np.sin((k - 0.5) * math.pi * t / length)


def kl_gram(n_terms, x):
    """Trapezoid inner products of the first ``n_terms`` eigenfunctions on the grid ``x``."""
    phi = kl_eigenfunctions(np.arange(1, n_terms + 1), np.asarray(x) - X_LO)
    return trapezoid(phi[:, None, :] * phi[None, :, :], x, axis=-1)


def kl_coefficients(residual, x, n_terms=2):
    """z_k = <residual, phi_k> / sqrt(lambda_k), inner product by the trapezoid rule on ``x``."""
    x = np.asarray(x, dtype=np.float64)
    k = np.arange(1, n_terms + 1)
    phi = kl_eigenfunctions(k, x - X_LO)
    inner = trapezoid(phi * np.asarray(residual, dtype=np.float64)[None, :], x, axis=-1)
    return inner / np.sqrt(kl_eigenvalues(k))


def kl_project(noisy, mean_fn, n_terms=2):
    """Latent code of a noisy target: KL coefficients of ``values - mean_fn``."""
    return kl_coefficients(np.asarray(noisy.values) - np.asarray(mean_fn), noisy.x, n_terms)


def kl_synthesise(z, x, length=T_LENGTH):
    """Path sum_k z_k sqrt(lambda_k) phi_k evaluated on the grid ``x``."""
    z = np.asarray(z, dtype=np.float64)
    k = np.arange(1, len(z) + 1)
    phi = kl_eigenfunctions(k, np.asarray(x) - X_LO, length)
    return (z * np.sqrt(kl_eigenvalues(k, length))) @ phi

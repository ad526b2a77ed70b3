"""Ridge-regression fitting of polynomial chaos expansions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ..errors import ConditioningError, UsageError
from .basis import design_matrix, family_code, total_degree_indices


@dataclass
class Standardisation:
    """Affine map ``z = (x - shift) / scale`` into the basis' reference measure."""

    shift: np.ndarray
    scale: np.ndarray

    @classmethod
    def identity(cls, m):
        return cls(np.zeros(m), np.ones(m))

    @classmethod
    def fit(cls, inputs, family="hermite"):
        """MLE Gaussian fit (hermite) or min/max box (legendre) per input."""
        x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        if family == "legendre":
            lo, hi = x.min(axis=0), x.max(axis=0)
            return cls(0.5 * (lo + hi), np.where(hi > lo, 0.5 * (hi - lo), 1.0))
        std = x.std(axis=0)
        return cls(x.mean(axis=0), np.where(std > 0, std, 1.0))

    def apply(self, inputs):
        return (np.atleast_2d(np.asarray(inputs, dtype=np.float64)) - self.shift) / self.scale

    def to_dict(self):
        return {"shift": [float(v) for v in self.shift], "scale": [float(v) for v in self.scale]}

    @classmethod
    def from_dict(cls, doc):
        return cls(np.array(doc["shift"], dtype=np.float64), np.array(doc["scale"], dtype=np.float64))


@dataclass
class PceModel:
    family: str
    dim: int
    degree: int
    coefficients: np.ndarray
    standardisation: Standardisation = None
    indices: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        family_code(self.family)
        if self.indices is None:
            self.indices = total_degree_indices(self.dim, self.degree)
        if self.standardisation is None:
            self.standardisation = Standardisation.identity(self.dim)
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if self.coefficients.shape[0] != len(self.indices):
            raise UsageError("coefficient count does not match the multi-index set")

    def design(self, inputs):
        return design_matrix(self.indices, self.standardisation.apply(inputs), self.family)

    def __call__(self, inputs):
        return self.design(inputs) @ self.coefficients

    @property
    def mean(self):
        return self.coefficients[0]

    @property
    def variance(self):
        return np.sum(self.coefficients[1:] ** 2, axis=0)

    def to_dict(self):
        return {
            "family": self.family,
            "dim": self.dim,
            "degree": self.degree,
            "indices": self.indices.tolist(),
            "coefficients": self.coefficients.tolist(),
            "standardisation": self.standardisation.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            family=doc["family"],
            dim=doc["dim"],
            degree=doc["degree"],
            coefficients=np.array(doc["coefficients"], dtype=np.float64),
            standardisation=Standardisation.from_dict(doc["standardisation"]),
            indices=np.array(doc["indices"], dtype=np.int64),
        )


def solve_ridge(design, targets, ridge):
    """Minimise ``||design c - y||^2 + ridge ||c||^2`` via the normal equations.

    ``targets`` may hold several right-hand sides as columns.
    """
    if ridge < 0:
        raise UsageError("ridge penalty must be non-negative")
    n, k = design.shape
    if ridge == 0 and n < k:
        raise ConditioningError(
            f"{n} samples for {k} basis terms: the unregularised system is singular; use ridge > 0"
        )
    gram = design.T @ design
    rhs = design.T @ targets
    if ridge > 0:
        gram[np.diag_indices_from(gram)] += ridge
    try:
        factor = linalg.cho_factor(gram, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        if ridge == 0:
            raise ConditioningError(f"normal equations are singular ({exc}); use ridge > 0") from exc
        return _gradient_descent(gram, rhs)
    diag = np.abs(np.diag(factor[0]))
    if ridge == 0 and diag.min() <= 1e-7 * diag.max():
        raise ConditioningError("normal equations are numerically singular; use ridge > 0")
    return linalg.cho_solve(factor, rhs)


def _gradient_descent(gram, rhs, tol=1e-12, max_iter=100_000):
    # fallback when Cholesky fails: plain descent on the (convex) quadratic
    step = 1.0 / np.linalg.norm(gram, 2)
    c = np.zeros_like(rhs)
    for _ in range(max_iter):
        grad = gram @ c - rhs
        c -= step * grad
        if np.linalg.norm(grad) <= tol * max(1.0, np.linalg.norm(rhs)):
            break
    return c


def fit_ridge(inputs, outputs, degree, ridge=0.0, family="hermite", standardisation=None):
    """Fit a total-degree PCE to ``outputs`` (one column per output channel)."""
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    y = np.asarray(outputs, dtype=np.float64)
    if x.shape[0] != y.shape[0]:
        raise UsageError("inputs and outputs disagree on the sample count")
    if x.shape[0] < 1:
        raise UsageError("need at least one sample")
    if standardisation is None:
        standardisation = Standardisation.identity(x.shape[1])
    elif standardisation == "fit":
        standardisation = Standardisation.fit(x, family)
    indices = total_degree_indices(x.shape[1], degree)
    design = design_matrix(indices, standardisation.apply(x), family)
    coefficients = solve_ridge(design, y, ridge)
    return PceModel(family, x.shape[1], degree, coefficients, standardisation, indices)

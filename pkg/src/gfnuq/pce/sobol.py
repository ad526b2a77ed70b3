"""Variance-based sensitivity indices read off orthonormal PCE coefficients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SobolIndices:
    first_order: np.ndarray
    total: np.ndarray
    partition: dict  # frozenset of input ids -> share of total variance
    variance: float
    degenerate: bool = False

    def to_dict(self):
        return {
            "first_order": self.first_order.tolist(),
            "total": self.total.tolist(),
            "variance": self.variance,
            "degenerate": self.degenerate,
            "partition": {
                ",".join(str(i) for i in sorted(k)): v
                for k, v in sorted(self.partition.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))
            },
        }


def anova_partition(model):
    """Squared coefficients grouped by the set of inputs each term involves."""
    coefs = np.asarray(model.coefficients, dtype=np.float64)
    if coefs.ndim != 1:
        raise ValueError("sobol indices need a single-output model")
    groups = {}
    for j, c in zip(model.indices[1:], coefs[1:]):
        key = frozenset(int(i) for i in np.flatnonzero(j))
        groups[key] = groups.get(key, 0.0) + c * c
    return groups


def sobol_indices(model):
    """First-order and total indices of a single-output :class:`PceModel`.

    A model with zero variance gets all indices 0 and ``degenerate=True``.
    """
    groups = anova_partition(model)
    variance = float(sum(groups.values()))
    m = model.dim
    first = np.zeros(m)
    total = np.zeros(m)
    if variance <= 0.0:
        return SobolIndices(first, total, {k: 0.0 for k in groups}, 0.0, degenerate=True)
    for key, v in groups.items():
        if len(key) == 1:
            first[next(iter(key))] += v
        for i in key:
            total[i] += v
    partition = {k: v / variance for k, v in groups.items()}
    return SobolIndices(first / variance, total / variance, partition, variance)

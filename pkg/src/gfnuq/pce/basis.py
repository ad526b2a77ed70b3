"""Orthonormal polynomial bases and total-degree multi-index sets."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .. import kernels
from ..errors import UsageError

FAMILIES = {"hermite": kernels.HERMITE, "legendre": kernels.LEGENDRE}


def family_code(family):
    try:
        return FAMILIES[family]
    except KeyError:
        raise UsageError(f"unknown basis family {family!r}; expected one of {sorted(FAMILIES)}") from None


def basis_eval(family, k, x):
    """Degree-``k`` orthonormal polynomial at ``x``.

    ``hermite`` is He_k / sqrt(k!) (orthonormal under N(0, 1)); ``legendre``
    is sqrt(2k + 1) P_k (orthonormal under U(-1, 1)).
    """
    if k < 0:
        raise UsageError("degree must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    table = kernels.basis_table(family_code(family), int(k), np.atleast_1d(x).ravel())
    out = table[:, k].reshape(x.shape)
    return float(out) if out.ndim == 0 else out


def total_degree_indices(m, d):
    """All ``j`` in N^m with ``sum(j) <= d``, graded by total degree.

    Within a degree, indices are in reverse lexicographic order, so the
    first-degree terms come out as ``e_1, e_2, ..., e_m``.
    """
    if m < 1 or d < 0:
        raise UsageError("need m >= 1 and d >= 0")
    out = []
    for total in range(d + 1):
        out.extend(_compositions(total, m))
    return np.array(out, dtype=np.int64).reshape(-1, m)


def _compositions(total, parts):
    if parts == 1:
        return [(total,)]
    out = []
    for first in range(total, -1, -1):
        out.extend((first,) + rest for rest in _compositions(total - first, parts - 1))
    return out


@dataclass(frozen=True)
class MultiIndexSet:
    dim: int
    degree: int

    @property
    def indices(self):
        return total_degree_indices(self.dim, self.degree)

    def __len__(self):
        return comb(self.dim + self.degree, self.degree)


def design_matrix(indices, inputs, family="hermite"):
    """``(n, |indices|)`` matrix of products of 1-D basis values."""
    if isinstance(indices, MultiIndexSet):
        indices = indices.indices
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    indices = np.asarray(indices)
    if inputs.shape[1] != indices.shape[1]:
        raise UsageError(f"inputs have {inputs.shape[1]} columns, indices {indices.shape[1]}")
    return kernels.design_matrix(family_code(family), indices, inputs)

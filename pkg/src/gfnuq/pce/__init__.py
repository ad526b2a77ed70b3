"""Polynomial chaos expansions: bases, ridge fitting, policy surrogates, Sobol' indices."""

from .basis import MultiIndexSet, basis_eval, design_matrix, total_degree_indices
from .regression import PceModel, Standardisation, fit_ridge, solve_ridge
from .sobol import SobolIndices, anova_partition, sobol_indices
from .surrogate import (
    PolicySurrogate,
    decode_logits,
    fit_policy_surrogate,
    logit,
    surrogate_sample,
)

__all__ = [
    "MultiIndexSet",
    "PceModel",
    "PolicySurrogate",
    "SobolIndices",
    "Standardisation",
    "anova_partition",
    "basis_eval",
    "decode_logits",
    "design_matrix",
    "fit_policy_surrogate",
    "fit_ridge",
    "logit",
    "sobol_indices",
    "solve_ridge",
    "surrogate_sample",
    "total_degree_indices",
]

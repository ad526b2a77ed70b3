"""Experiment orchestration: manifests, ensembles, policy tensors, surrogate fits, comparisons."""

from .comparison import compare, mode_count, read_plot_csv, variance_ratio, w1, write_plot_csv
from .experiments import EXPERIMENT_TYPES, experiment_for
from .manifest import EXPERIMENTS, FOCAL_GRID_CELLS, ExperimentManifest
from .seeds import member_seed, splitmix64, stream
from .stages import (
    PolicyTensor,
    compare_stage,
    emit_plot_data,
    extract_policy_tensor,
    fit_and_sample,
    fit_embed,
    fit_surrogate,
    run_all,
    run_ensemble,
    sample_rewards,
    sample_surrogate,
    sobol_stage,
)

__all__ = [
    "EXPERIMENTS",
    "EXPERIMENT_TYPES",
    "FOCAL_GRID_CELLS",
    "ExperimentManifest",
    "PolicyTensor",
    "compare",
    "compare_stage",
    "emit_plot_data",
    "experiment_for",
    "extract_policy_tensor",
    "fit_and_sample",
    "fit_embed",
    "fit_surrogate",
    "member_seed",
    "mode_count",
    "read_plot_csv",
    "run_all",
    "run_ensemble",
    "sample_rewards",
    "sample_surrogate",
    "sobol_stage",
    "splitmix64",
    "stream",
    "variance_ratio",
    "w1",
    "write_plot_csv",
]

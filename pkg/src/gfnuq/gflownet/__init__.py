"""Generative flow network engine: models, losses, rollouts, replay and training."""

from .continuous import (
    ContinuousGfn,
    ContinuousTrainConfig,
    extract_gaussian_policy,
    policies_along,
    sample_paths,
    train_continuous,
)
from .core import (
    LOSSES,
    GfnModel,
    Trajectory,
    batch_loss,
    detailed_balance,
    flow_matching,
    loss_db,
    loss_fm,
    loss_subtb,
    loss_tb,
    subtrajectory_balance,
    trajectory_balance,
    trajectory_from_actions,
)
from .networks import EdgePolicy, MlpPolicy, SequencePolicy, TablePolicy, policy_from_dict
from .sampling import (
    ReplayBuffer,
    extract_policy,
    policy_along,
    sample_trajectories,
    sample_trajectory,
    tempered_probs,
    terminating_distribution,
)
from .toy import ExplicitDagEnv
from .train import TrainConfig, TrainResult, epsilon_schedule, train, write_loss_curve

__all__ = [
    "LOSSES",
    "ContinuousGfn",
    "ContinuousTrainConfig",
    "extract_gaussian_policy",
    "policies_along",
    "sample_paths",
    "train_continuous",
    "EdgePolicy",
    "ExplicitDagEnv",
    "GfnModel",
    "MlpPolicy",
    "ReplayBuffer",
    "SequencePolicy",
    "TablePolicy",
    "TrainConfig",
    "TrainResult",
    "Trajectory",
    "batch_loss",
    "detailed_balance",
    "epsilon_schedule",
    "extract_policy",
    "flow_matching",
    "loss_db",
    "loss_fm",
    "loss_subtb",
    "loss_tb",
    "policy_along",
    "policy_from_dict",
    "sample_trajectories",
    "sample_trajectory",
    "subtrajectory_balance",
    "tempered_probs",
    "terminating_distribution",
    "train",
    "trajectory_balance",
    "trajectory_from_actions",
    "write_loss_curve",
]

"""Trajectory ranking and counterfactual explanation for tabular agents.

Pipeline: train a tabular Q-learner in a built-in deterministic environment,
collect trajectories across training checkpoints, rank them by a
goal-affinity-weighted importance metric, and explain the best one by
showing that forbidding any of its actions leads somewhere worse.
"""

from .agent import (
    Checkpoint,
    PolicySnapshot,
    QTable,
    TrainResult,
    ValueView,
    train,
    value_iteration,
)
from .counterfactual import CounterfactualRollout, CounterfactualSet, compare, generate
from .envs import Discretizer, EnvSpec, GridWorld, MiniLander, Transition, build_env
from .errors import (
    ConfigError,
    DataError,
    EpisodeFinishedError,
    InvariantViolation,
    OracleConvergenceError,
    ReplayDivergenceError,
    TrajlensError,
)
from .importance import (
    ImportanceBreakdown,
    MetricConfig,
    RadicalKind,
    delta_q,
    score_dataset,
    trajectory_importance,
)
from .ranking import RankingReport, rank, select_explanation_target
from .trajstore import Dataset, Trajectory, collect, load_dataset, save_dataset

__version__ = "0.1.0"

__all__ = [
    "Checkpoint",
    "ConfigError",
    "CounterfactualRollout",
    "CounterfactualSet",
    "DataError",
    "Dataset",
    "Discretizer",
    "EnvSpec",
    "EpisodeFinishedError",
    "GridWorld",
    "ImportanceBreakdown",
    "InvariantViolation",
    "MetricConfig",
    "MiniLander",
    "OracleConvergenceError",
    "PolicySnapshot",
    "QTable",
    "RadicalKind",
    "RankingReport",
    "ReplayDivergenceError",
    "TrainResult",
    "Trajectory",
    "TrajlensError",
    "Transition",
    "ValueView",
    "build_env",
    "collect",
    "compare",
    "delta_q",
    "generate",
    "load_dataset",
    "rank",
    "save_dataset",
    "score_dataset",
    "select_explanation_target",
    "train",
    "trajectory_importance",
    "value_iteration",
]

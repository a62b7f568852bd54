"""Structure learning for Gaussian graphical models observed through
continuous-time single-site Glauber dynamics.

The package is organized around the pipeline:

    model     -- precision-matrix models with bounded-degree assumptions
    dynamics  -- event-driven simulation of the update process
    detector  -- interval grid, observable events, and the ratio statistic
    learner   -- parameter selection, thresholding, and the edge sweep
    analysis  -- Monte-Carlo verifiers and numeric utilities
    cli       -- reproducible experiment harness
"""

from .model import (
    Graph,
    GgmModel,
    EnsembleSpec,
    conditional_coefficients,
    build_bounded_degree_model,
    build_clique_ensemble,
    validate_model,
    stationary_covariance,
)
from .dynamics import Trajectory, simulate
from .detector import IntervalGrid, EdgeEvidence, edge_statistic, check_C
from .learner import (
    Constants,
    LearnerParams,
    LearnResult,
    RecoveryMetrics,
    select_parameters,
    learn,
    baseline_subsample_learn,
    compare,
)

__all__ = [
    "Graph",
    "GgmModel",
    "EnsembleSpec",
    "conditional_coefficients",
    "build_bounded_degree_model",
    "build_clique_ensemble",
    "validate_model",
    "stationary_covariance",
    "Trajectory",
    "simulate",
    "IntervalGrid",
    "EdgeEvidence",
    "edge_statistic",
    "check_C",
    "Constants",
    "LearnerParams",
    "LearnResult",
    "RecoveryMetrics",
    "select_parameters",
    "learn",
    "baseline_subsample_learn",
    "compare",
]

__version__ = "0.1.0"

"""Minimax-optimal aggregation of binary classifier ensembles.

Given an ensemble's predictions on unlabeled test data and lower bounds
on each classifier's correlation with the true labels, the library finds
the aggregation weights minimizing the worst-case average loss over all
label assignments consistent with those bounds, for a broad family of
losses. The minimized convex slack function yields both the optimal
weights and a certificate (the game value) for the resulting
sigmoid-of-margin predictions; brute-force oracles verify the
certificate at small scale.
"""

from .losses import (
    LossSpec, ConvexityReport, get_loss, registry_losses, loss_from_table,
    partial_loss, score, score_inverse, potential_well, potential_well_slope,
    predict_one, expected_loss, convexity_condition_check, REGISTRY_NAMES,
)
from .game import (
    ConstraintSpec, EnsembleProblem, PredictionVector, InfeasibleProblemError,
    make_problem, slack, slack_subgradient, effective_margins, predict,
    transform_general_loss, dual_box_lp, game_value, lipschitz_bound,
    VARIANTS,
)
from .optimize import SolveOptions, SolveReport, minimize_convex, minimize_slack
from .oracle import (
    GridSpec, GridMinimaxResult, SandwichReport, grid_minimax,
    feasible_z_sample, sandwich_check, random_feasible_problem,
)
from .data import (
    ModelFile, load_predictions, save_predictions, load_holdout, estimate_b,
    estimate_general_loss_bounds, save_model, load_model, loss_config_from_file,
)
from .estimator import MinimaxEnsembleAggregator

__version__ = "0.1.0"

__all__ = [
    "LossSpec", "ConvexityReport", "get_loss", "registry_losses",
    "loss_from_table", "partial_loss", "score", "score_inverse",
    "potential_well", "potential_well_slope", "predict_one", "expected_loss",
    "convexity_condition_check", "REGISTRY_NAMES",
    "ConstraintSpec", "EnsembleProblem", "PredictionVector",
    "InfeasibleProblemError", "make_problem", "slack", "slack_subgradient",
    "effective_margins", "predict", "transform_general_loss", "dual_box_lp",
    "game_value", "lipschitz_bound", "VARIANTS",
    "SolveOptions", "SolveReport", "minimize_convex", "minimize_slack",
    "GridSpec", "GridMinimaxResult", "SandwichReport", "grid_minimax",
    "feasible_z_sample", "sandwich_check", "random_feasible_problem",
    "ModelFile", "load_predictions", "save_predictions", "load_holdout",
    "estimate_b", "estimate_general_loss_bounds", "save_model", "load_model",
    "loss_config_from_file",
    "MinimaxEnsembleAggregator",
    "__version__",
]

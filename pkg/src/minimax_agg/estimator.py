"""Scikit-learn style front end for transductive ensemble aggregation.

The estimator is transductive: ``fit`` receives the ensemble predictions
for labeled and unlabeled examples together, estimates per-classifier
constraint levels from the labeled rows, and learns the aggregation
weights against the unlabeled rows — which are exactly the rows it later
predicts on.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import data, game, losses, optimize

__all__ = ["MinimaxEnsembleAggregator"]


class MinimaxEnsembleAggregator(BaseEstimator):
    """Minimax-optimal aggregation of binary classifier predictions.

    Parameters
    ----------
    loss : str, default "zero_one"
        Registry loss name (``"cw:<c>"`` for the cost-weighted family).
    variant : str, default "plain"
        One of ``"plain"``, ``"weighted"``, ``"uncertainty"``,
        ``"general_loss"``.
    b : array-like or None
        Constraint levels. When None they are estimated from the labeled
        rows seen in ``fit``.
    stat_slack : float, default 0.0
        Shrinkage applied to estimated constraint levels.
    r : array-like or None
        Per-example weights (weighted variant), aligned with the
        unlabeled rows.
    epsilon : float, default 0.0
        Constraint uncertainty radius (uncertainty variant).
    solve_options : optimize.SolveOptions or None
        Solver configuration; defaults are used when None.

    Attributes
    ----------
    sigma_ : ndarray of shape (p,)
        Learned classifier weights.
    b_ : ndarray of shape (p,)
        Constraint levels actually used.
    game_value_ : float
        Half the minimized slack: the certified worst-case loss.
    report_ : optimize.SolveReport
        Full solver diagnostics.
    classes_ : ndarray
        Always ``[-1, 1]``.
    """

    def __init__(self, loss="zero_one", variant="plain", b=None,
                 stat_slack=0.0, r=None, epsilon=0.0, solve_options=None):
        self.loss = loss
        self.variant = variant
        self.b = b
        self.stat_slack = stat_slack
        self.r = r
        self.epsilon = epsilon
        self.solve_options = solve_options

    def fit(self, X, y=None):
        """Learn aggregation weights from an (examples x classifiers) matrix.

        ``y`` entries in {-1, +1} mark labeled examples used to estimate
        the constraint levels; 0 or NaN entries mark the unlabeled test
        examples the aggregator is learned (and predicts) on. With
        ``y=None`` or no labeled rows, explicit ``b`` is required.
        """
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be 2-d (examples x classifiers)")
        spec = losses.get_loss(self.loss)

        if y is None:
            labeled = np.zeros(X.shape[0], dtype=bool)
            yv = np.zeros(X.shape[0])
        else:
            yv = np.asarray(y, dtype=float).ravel()
            if yv.shape != (X.shape[0],):
                raise ValueError("y length must match the number of rows in X")
            labeled = np.isfinite(yv) & (yv != 0)
            bad = np.isfinite(yv) & (yv != 0) & ~np.isin(yv, (-1.0, 1.0))
            if np.any(bad):
                raise ValueError("labels must be -1, +1, 0, or NaN")
        test = ~labeled
        if not np.any(test):
            raise ValueError("no unlabeled rows to aggregate on")
        F = X[test].T

        if self.b is not None:
            b = np.asarray(self.b, dtype=float)
        elif self.variant == "general_loss":
            if not np.any(labeled):
                raise ValueError("general_loss needs labeled rows or explicit b")
            eps_ell = data.estimate_general_loss_bounds(
                X[labeled].T, yv[labeled], spec, self.stat_slack)
            F, b = game.transform_general_loss(F, eps_ell, spec)
            self.loss_bounds_ = eps_ell
        else:
            if not np.any(labeled):
                raise ValueError("estimating b requires labeled rows; "
                                 "pass b explicitly otherwise")
            b = data.estimate_b(X[labeled].T, yv[labeled], self.stat_slack)
        if self.variant == "general_loss" and self.b is not None:
            F = np.asarray(losses.score(spec, F), dtype=float)

        problem = game.make_problem(
            F, b, spec, variant=self.variant, r=self.r, epsilon=self.epsilon)
        report = optimize.minimize_slack(problem, options=self.solve_options)

        self.loss_spec_ = spec
        self.problem_ = problem
        self.report_ = report
        self.sigma_ = report.sigma_star
        self.b_ = b
        self.game_value_ = report.game_value
        self.classes_ = np.array([-1.0, 1.0])
        self.n_features_in_ = X.shape[1]
        return self

    def _margins(self, X):
        if not hasattr(self, "sigma_"):
            raise RuntimeError("fit the estimator before predicting")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(f"X must have {self.n_features_in_} columns")
        if self.variant == "general_loss":
            X = np.asarray(losses.score(self.loss_spec_, X), dtype=float)
        return X @ self.sigma_

    def decision_function(self, X):
        """Weighted ensemble margins for each example row."""
        return self._margins(X)

    def aggregate(self, X):
        """Minimax-optimal soft predictions g in [-1, 1]."""
        m = self._margins(X)
        return np.asarray(losses.predict_one(self.loss_spec_, m), dtype=float)

    def predict(self, X):
        """Hard labels in {-1, +1} (ties go to +1)."""
        return np.where(self.aggregate(X) >= 0.0, 1.0, -1.0)

    def predict_proba(self, X):
        """Columns [P(y=-1), P(y=+1)] with P(y=+1) = (1 + g) / 2."""
        g = self.aggregate(X)
        pos = 0.5 * (1.0 + g)
        return np.column_stack([1.0 - pos, pos])
